#include "treeduce/histagg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace treeduce::hist {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt_num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool same_bits(double a, double b)
{
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

Quantity Quantity::parse(std::string text)
{
    Quantity q;
    q.ast = expr::parse(text);
    q.text = std::move(text);
    return q;
}

const Aggregator& Bin::underflow() const { return flows.at(0); }
const Aggregator& Bin::overflow() const { return flows.at(1); }
const Aggregator& Bin::nanflow() const { return flows.at(2); }

long Bin::index_of(double q) const
{
    if (std::isnan(q))
        return -3;
    if (q < low)
        return -1;
    if (q >= high)
        return -2;
    auto idx = static_cast<long>(std::floor((q - low) / (high - low) * static_cast<double>(num)));
    return std::clamp(idx, 0L, static_cast<long>(num) - 1);
}

Aggregator Aggregator::count()
{
    return Aggregator(Count{});
}

Aggregator Aggregator::sum(Quantity q)
{
    Sum s;
    s.quantity = std::move(q);
    return Aggregator(std::move(s));
}

Aggregator Aggregator::bin(std::size_t num, double low, double high, Quantity q)
{
    return bin(num, low, high, std::move(q), count());
}

Aggregator Aggregator::bin(std::size_t num, double low, double high, Quantity q, const Aggregator& sub)
{
    if (num < 1)
        throw HistError(HistError::Kind::Syntax, "bin count must be at least 1");
    if (!std::isfinite(low) || !std::isfinite(high) || !(low < high))
        throw HistError(HistError::Kind::Syntax, "bin range needs finite low < high");
    Bin b;
    b.num = num;
    b.low = low;
    b.high = high;
    b.quantity = std::move(q);
    b.values.assign(num, sub.zero());
    b.flows.assign(3, count());
    return Aggregator(std::move(b));
}

double Aggregator::entries() const
{
    return std::visit([](const auto& n) { return n.entries; }, node_);
}

Aggregator Aggregator::zero() const
{
    return std::visit(overloaded{
                          [](const Count&) { return count(); },
                          [](const Sum& s) { return sum(s.quantity); },
                          [](const Bin& b) { return bin(b.num, b.low, b.high, b.quantity, b.values.front()); },
                      },
                      node_);
}

void Aggregator::check_types(const expr::Schema& schema) const
{
    auto check = [&](const Quantity& q) {
        auto t = expr::typecheck(*q.ast, schema);
        if (t.jagged)
            throw HistError(HistError::Kind::NonScalarQuantity,
                            "histogram quantity '" + q.text + "' is jagged; reduce it with an aggregate first");
    };
    std::visit(overloaded{
                   [](const Count&) {},
                   [&](const Sum& s) { check(s.quantity); },
                   [&](const Bin& b) {
                       check(b.quantity);
                       b.values.front().check_types(schema);
                   },
               },
               node_);
}

std::vector<std::string> Aggregator::columns() const
{
    std::set<std::string> out;
    auto add = [&](const Quantity& q) {
        auto refs = expr::column_refs(*q.ast);
        out.insert(refs.begin(), refs.end());
    };
    std::visit(overloaded{
                   [](const Count&) {},
                   [&](const Sum& s) { add(s.quantity); },
                   [&](const Bin& b) {
                       add(b.quantity);
                       for (auto& c : b.values.front().columns())
                           out.insert(c);
                   },
               },
               node_);
    return {out.begin(), out.end()};
}

struct Aggregator::Batch
{
    const expr::ColumnSet& columns;
    std::map<const expr::Expr*, std::vector<double>> cache;

    const std::vector<double>& values(const Quantity& q)
    {
        auto it = cache.find(q.ast.get());
        if (it != cache.end())
            return it->second;
        auto v = expr::evaluate(*q.ast, columns);
        if (v.type.jagged)
            throw HistError(HistError::Kind::NonScalarQuantity, "histogram quantity '" + q.text + "' is jagged");
        return cache.emplace(q.ast.get(), expr::to_f64(v)).first->second;
    }
};

namespace {

void check_weight(double weight)
{
    if (!(weight >= 0.0) || std::isinf(weight))
        throw HistError(HistError::Kind::NegativeWeight, "fill weight must be finite and non-negative");
}

}  // namespace

void Aggregator::fill(const expr::ColumnSet& columns, double weight)
{
    check_weight(weight);
    std::vector<std::uint32_t> rows(columns.entries());
    std::iota(rows.begin(), rows.end(), 0u);
    Batch batch{columns, {}};
    fill_rows(batch, rows, weight);
    check_conservation();
}

void Aggregator::fill_event(const expr::ColumnSet& columns, std::size_t row, double weight)
{
    check_weight(weight);
    if (row >= columns.entries())
        throw std::out_of_range("fill_event row out of range");
    Batch batch{columns, {}};
    fill_rows(batch, {static_cast<std::uint32_t>(row)}, weight);
    check_conservation();
}

void Aggregator::fill_rows(Batch& batch, const std::vector<std::uint32_t>& rows, double weight)
{
    if (rows.empty())
        return;
    std::visit(overloaded{
                   [&](Count& c) {
                       for (std::size_t i = 0; i < rows.size(); ++i)
                           c.entries += weight;
                   },
                   [&](Sum& s) {
                       const auto& q = batch.values(s.quantity);
                       for (auto r : rows) {
                           s.entries += weight;
                           s.sum += weight * q[r];
                       }
                   },
                   [&](Bin& b) {
                       const auto& q = batch.values(b.quantity);
                       std::vector<std::vector<std::uint32_t>> routed(b.num);
                       for (auto r : rows) {
                           b.entries += weight;
                           auto idx = b.index_of(q[r]);
                           if (idx >= 0) {
                               routed[static_cast<std::size_t>(idx)].push_back(r);
                           } else {
                               auto& flow = std::get<Count>(b.flows[static_cast<std::size_t>(-idx - 1)].node_);
                               flow.entries += weight;
                           }
                       }
                       for (std::size_t i = 0; i < b.num; ++i)
                           b.values[i].fill_rows(batch, routed[i], weight);
                   },
               },
               node_);
}

bool Aggregator::same_structure(const Aggregator& other) const
{
    if (node_.index() != other.node_.index())
        return false;
    return std::visit(overloaded{
                          [](const Count&) { return true; },
                          [&](const Sum& s) { return s.quantity.text == std::get<Sum>(other.node_).quantity.text; },
                          [&](const Bin& b) {
                              const auto& o = std::get<Bin>(other.node_);
                              if (b.num != o.num || !same_bits(b.low, o.low) || !same_bits(b.high, o.high) ||
                                  b.quantity.text != o.quantity.text)
                                  return false;
                              for (std::size_t i = 0; i < b.num; ++i)
                                  if (!b.values[i].same_structure(o.values[i]))
                                      return false;
                              return true;
                          },
                      },
                      node_);
}

bool Aggregator::identical(const Aggregator& other) const
{
    if (!same_structure(other))
        return false;
    return std::visit(overloaded{
                          [&](const Count& c) { return same_bits(c.entries, std::get<Count>(other.node_).entries); },
                          [&](const Sum& s) {
                              const auto& o = std::get<Sum>(other.node_);
                              return same_bits(s.entries, o.entries) && same_bits(s.sum, o.sum);
                          },
                          [&](const Bin& b) {
                              const auto& o = std::get<Bin>(other.node_);
                              if (!same_bits(b.entries, o.entries))
                                  return false;
                              for (std::size_t i = 0; i < b.num; ++i)
                                  if (!b.values[i].identical(o.values[i]))
                                      return false;
                              for (std::size_t i = 0; i < 3; ++i)
                                  if (!b.flows[i].identical(o.flows[i]))
                                      return false;
                              return true;
                          },
                      },
                      node_);
}

void Aggregator::merge(const Aggregator& other)
{
    if (!same_structure(other))
        throw HistError(HistError::Kind::StructureMismatch,
                        "cannot combine " + to_spec() + " with " + other.to_spec());
    std::visit(overloaded{
                   [&](Count& c) { c.entries += std::get<Count>(other.node_).entries; },
                   [&](Sum& s) {
                       const auto& o = std::get<Sum>(other.node_);
                       s.entries += o.entries;
                       s.sum += o.sum;
                   },
                   [&](Bin& b) {
                       const auto& o = std::get<Bin>(other.node_);
                       b.entries += o.entries;
                       for (std::size_t i = 0; i < b.num; ++i)
                           b.values[i].merge(o.values[i]);
                       for (std::size_t i = 0; i < 3; ++i)
                           b.flows[i].merge(o.flows[i]);
                   },
               },
               node_);
    check_conservation();
}

Aggregator Aggregator::combine(const Aggregator& a, const Aggregator& b)
{
    Aggregator out = a;
    out.merge(b);
    return out;
}

bool Aggregator::conserved() const
{
    const auto* b = std::get_if<Bin>(&node_);
    if (!b)
        return true;
    double total = 0.0;
    for (const auto& v : b->values) {
        if (!v.conserved())
            return false;
        total += v.entries();
    }
    for (const auto& f : b->flows)
        total += f.entries();
    return std::abs(total - b->entries) <= 1e-9 * std::max(1.0, std::abs(b->entries));
}

void Aggregator::check_conservation() const
{
#ifndef NDEBUG
    if (!conserved())
        throw std::logic_error("histogram entries not conserved: " + to_spec());
#endif
}

std::string Aggregator::to_spec() const
{
    return std::visit(overloaded{
                          [](const Count&) { return std::string("count()"); },
                          [](const Sum& s) { return "sum('" + s.quantity.text + "')"; },
                          [](const Bin& b) {
                              std::string out = "bin(" + std::to_string(b.num) + ", " + fmt_num(b.low) + ", " +
                                                fmt_num(b.high) + ", '" + b.quantity.text + "'";
                              if (!std::holds_alternative<Count>(b.values.front().node()))
                                  out += ", " + b.values.front().to_spec();
                              return out + ")";
                          },
                      },
                      node_);
}

void render_csv(const Aggregator& agg, std::ostream& out)
{
    const auto* b = std::get_if<Bin>(&agg.node());
    if (!b)
        throw HistError(HistError::Kind::NotRenderable, "only a bin() histogram can be rendered as a table");
    const bool with_sum = std::holds_alternative<Sum>(b->values.front().node());
    out << "bin_low,bin_high,entries" << (with_sum ? ",sum" : "") << '\n';
    const double width = (b->high - b->low) / static_cast<double>(b->num);
    for (std::size_t i = 0; i < b->num; ++i) {
        double lo = b->low + width * static_cast<double>(i);
        double hi = i + 1 == b->num ? b->high : b->low + width * static_cast<double>(i + 1);
        out << fmt_num(lo) << ',' << fmt_num(hi) << ',' << fmt_num(b->values[i].entries());
        if (with_sum)
            out << ',' << fmt_num(std::get<Sum>(b->values[i].node()).sum);
        out << '\n';
    }
    const char* tail = with_sum ? ",\n" : "\n";
    out << "-inf," << fmt_num(b->low) << ',' << fmt_num(b->underflow().entries()) << tail;
    out << fmt_num(b->high) << ",inf," << fmt_num(b->overflow().entries()) << tail;
    out << "nan,nan," << fmt_num(b->nanflow().entries()) << tail;
}

std::string render_csv(const Aggregator& agg)
{
    std::ostringstream os;
    render_csv(agg, os);
    return os.str();
}

}  // namespace treeduce::hist
