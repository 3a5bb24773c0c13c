#include "doctest.h"

#include "support/naive_eval.hpp"
#include "support/random_tree.hpp"
#include "treeduce/expr.hpp"

#include <cmath>
#include <random>
#include <thread>

using namespace treeduce;
using namespace treeduce::expr;

namespace {

ExprError::Kind parse_error_kind(std::string_view text, std::size_t* offset = nullptr)
{
    try {
        (void)parse(text);
    } catch (const ExprError& e) {
        if (offset)
            *offset = e.offset();
        return e.kind();
    }
    FAIL("parsed: " << text);
    return ExprError::Kind::Syntax;
}

ExprError::Kind type_error_kind(std::string_view text, const Schema& schema)
{
    try {
        (void)typecheck(*parse(text), schema);
    } catch (const ExprError& e) {
        return e.kind();
    }
    FAIL("typechecked: " << text);
    return ExprError::Kind::Syntax;
}

const Schema kSchema{
    {"nMuon", {DType::I32, Shape::Flat}},
    {"MET", {DType::F64, Shape::Flat}},
    {"w", {DType::I64, Shape::Flat}},
    {"flag", {DType::Bool, Shape::Flat}},
    {"Muon_pt", {DType::F32, Shape::Jagged}},
    {"Muon_eta", {DType::F32, Shape::Jagged}},
    {"Muon_charge", {DType::I32, Shape::Jagged}},
    {"Muon_tight", {DType::Bool, Shape::Jagged}},
    {"Jet_pt", {DType::F64, Shape::Jagged}},
};

/// Columns matching kSchema: Muon_* share per-event lengths, Jet_pt does not.
struct Dataset
{
    std::map<std::string, ColumnChunk> chunks;

    ColumnSet columns() const
    {
        ColumnSet cs(chunks.begin()->second.range);
        for (const auto& [name, c] : chunks)
            cs.add(name, &c);
        return cs;
    }

    testing::NaiveColumns naive() const
    {
        testing::NaiveColumns m;
        for (const auto& [name, c] : chunks)
            m[name] = &c;
        return m;
    }
};

Dataset make_dataset(std::uint64_t seed, std::size_t n)
{
    std::mt19937_64 rng(seed);
    Dataset d;
    std::vector<std::int32_t> n_muon(n);
    std::vector<std::uint64_t> lengths(n), jet_lengths(n);
    std::vector<double> met(n);
    std::vector<std::int64_t> w(n);
    std::vector<std::uint8_t> flag(n);
    std::vector<float> pt, eta;
    std::vector<std::int32_t> charge;
    std::vector<std::uint8_t> tight;
    std::vector<double> jet;
    for (std::size_t i = 0; i < n; ++i) {
        lengths[i] = rng() % 4;
        jet_lengths[i] = rng() % 4;
        n_muon[i] = static_cast<std::int32_t>(lengths[i]);
        met[i] = (rng() % 10 == 0) ? 0.0 : std::uniform_real_distribution<double>(-5, 60)(rng);
        w[i] = static_cast<std::int64_t>(rng() % 7) - 3;
        flag[i] = rng() % 2;
        for (std::uint64_t k = 0; k < lengths[i]; ++k) {
            pt.push_back(std::uniform_real_distribution<float>(0, 50)(rng));
            eta.push_back(std::uniform_real_distribution<float>(-2.5f, 2.5f)(rng));
            charge.push_back((rng() % 2) ? 1 : -1);
            tight.push_back(rng() % 2);
        }
        for (std::uint64_t k = 0; k < jet_lengths[i]; ++k)
            jet.push_back(std::uniform_real_distribution<double>(-1, 100)(rng));
    }
    d.chunks["nMuon"] = ColumnChunk::flat(n_muon);
    d.chunks["MET"] = ColumnChunk::flat(met);
    d.chunks["w"] = ColumnChunk::flat(w);
    d.chunks["flag"] = ColumnChunk::flat(flag);
    d.chunks["Muon_pt"] = ColumnChunk::jagged_from_lengths(pt, lengths);
    d.chunks["Muon_eta"] = ColumnChunk::jagged_from_lengths(eta, lengths);
    d.chunks["Muon_charge"] = ColumnChunk::jagged_from_lengths(charge, lengths);
    d.chunks["Muon_tight"] = ColumnChunk::jagged_from_lengths(tight, lengths);
    d.chunks["Jet_pt"] = ColumnChunk::jagged_from_lengths(jet, jet_lengths);
    return d;
}

std::string random_expr_text(std::mt19937_64& rng, int depth)
{
    static const char* columns[] = {"nMuon", "MET", "w", "flag", "Muon_pt", "Muon_eta", "Muon_charge",
                                    "Muon_tight", "Jet_pt"};
    static const char* binops[] = {"+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!=", "&&", "||"};
    static const char* funcs[] = {"count", "sum", "max", "min", "abs", "sqrt"};
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    int choice = depth <= 0 ? pick(2) : pick(6);
    switch (choice) {
    case 0: {
        switch (pick(4)) {
        case 0: return std::to_string(pick(41) - 20);
        case 1: return std::to_string(pick(100)) + ".5";
        case 2: return pick(2) ? "true" : "false";
        default: return "0";
        }
    }
    case 1: return columns[pick(9)];
    case 2: return std::string(pick(2) ? "-" : "!") + "(" + random_expr_text(rng, depth - 1) + ")";
    case 3:
    case 4:
        return "(" + random_expr_text(rng, depth - 1) + " " + binops[pick(12)] + " " +
               random_expr_text(rng, depth - 1) + ")";
    default: return std::string(funcs[pick(6)]) + "(" + random_expr_text(rng, depth - 1) + ")";
    }
}

/// Compares the vectorized result with the reference interpreter for every
/// event. Returns false if both agreed that evaluation fails.
bool check_against_oracle(const Expr& e, const Dataset& data)
{
    auto cols = data.columns();
    auto naive_cols = data.naive();
    testing::NaiveInterpreter oracle(naive_cols);

    std::optional<ValueColumn> vec;
    try {
        vec = evaluate(e, cols);
    } catch (const ExprError& err) {
        CHECK((err.kind() == ExprError::Kind::JaggedLengthMismatch ||
               err.kind() == ExprError::Kind::IntegerDivisionByZero));
    }

    bool oracle_failed = false;
    std::vector<testing::NaiveValue> per_event;
    for (std::uint64_t i = 0; i < cols.entries(); ++i) {
        try {
            per_event.push_back(oracle.eval(e, i));
        } catch (const testing::NaiveError&) {
            oracle_failed = true;
            break;
        }
    }
    REQUIRE_MESSAGE(oracle_failed == !vec.has_value(), to_sexpr(e));
    if (!vec)
        return false;

    const auto& v = *vec;
    for (std::uint64_t i = 0; i < cols.entries(); ++i) {
        const auto& ref = per_event[i];
        REQUIRE(ref.jagged == v.type.jagged);
        std::uint64_t lo = i, hi = i + 1;
        if (v.type.jagged) {
            lo = v.offsets[i];
            hi = v.offsets[i + 1];
        }
        REQUIRE_MESSAGE(ref.items.size() == hi - lo, to_sexpr(e));
        for (auto k = lo; k < hi; ++k) {
            const auto& atom = ref.items[k - lo];
            switch (v.type.scalar) {
            case Scalar::I64: REQUIRE(std::get<std::int64_t>(atom) == v.as<std::int64_t>()[k]); break;
            case Scalar::Bool: REQUIRE(std::get<bool>(atom) == (v.as<std::uint8_t>()[k] != 0)); break;
            case Scalar::F64:
                REQUIRE_MESSAGE(testing::same_double(testing::atom_f64(atom), v.as<double>()[k]),
                                to_sexpr(e) << " event " << i);
                break;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("parse respects precedence")
{
    CHECK(to_sexpr(*parse("nMuon >= 2 && max(Muon_pt) > 20")) == "(&& (>= nMuon 2) (> (max Muon_pt) 20))");
    CHECK(to_sexpr(*parse("a*b+c")) == "(+ (* a b) c)");
    CHECK(to_sexpr(*parse("a+b*c")) == "(+ a (* b c))");
    CHECK(to_sexpr(*parse("a || b && c")) == "(|| a (&& b c))");
    CHECK(to_sexpr(*parse("-a * !b")) == "(* (- a) (! b))");
    CHECK(to_sexpr(*parse("(a+b)*c")) == "(* (+ a b) c)");
    CHECK(to_sexpr(*parse("a - b - c")) == "(- (- a b) c)");
    CHECK(to_sexpr(*parse("1.5e2 + 3 + true")) == "(+ (+ 150.0 3) true)");
}

TEST_CASE("parse reports syntax errors with byte offsets")
{
    std::size_t offset = 0;
    CHECK(parse_error_kind("1 + ", &offset) == ExprError::Kind::Syntax);
    CHECK(offset == 4);
    CHECK(parse_error_kind("(a + b", &offset) == ExprError::Kind::Syntax);
    CHECK(offset == 6);
    CHECK(parse_error_kind("a = b", &offset) == ExprError::Kind::Syntax);
    CHECK(offset == 2);
    CHECK(parse_error_kind("max(a, b)", &offset) == ExprError::Kind::Syntax);
    CHECK(offset == 5);
    CHECK(parse_error_kind("a $ b", &offset) == ExprError::Kind::Syntax);
    CHECK(parse_error_kind("", &offset) == ExprError::Kind::Syntax);
    CHECK(offset == 0);
    CHECK(parse_error_kind("99999999999999999999") == ExprError::Kind::Syntax);
    CHECK(parse_error_kind("mean(Muon_pt)", &offset) == ExprError::Kind::UnknownFunction);
    CHECK(offset == 0);
}

TEST_CASE("typecheck rules")
{
    CHECK(typecheck(*parse("max(Muon_pt)"), kSchema) == Type{Scalar::F64, false});
    CHECK(typecheck(*parse("Muon_pt > 20"), kSchema) == Type{Scalar::Bool, true});
    CHECK(typecheck(*parse("nMuon + 1"), kSchema) == Type{Scalar::I64, false});
    CHECK(typecheck(*parse("nMuon + 1.0"), kSchema) == Type{Scalar::F64, false});
    CHECK(typecheck(*parse("sum(Muon_charge)"), kSchema) == Type{Scalar::I64, false});
    CHECK(typecheck(*parse("count(Muon_tight)"), kSchema) == Type{Scalar::I64, false});
    CHECK(typecheck(*parse("sqrt(nMuon)"), kSchema) == Type{Scalar::F64, false});
    CHECK(typecheck(*parse("abs(Muon_charge)"), kSchema) == Type{Scalar::I64, true});
    CHECK(typecheck(*parse("flag == true"), kSchema) == Type{Scalar::Bool, false});

    CHECK(type_error_kind("max(MET)", kSchema) == ExprError::Kind::AggregateOfScalar);
    CHECK(type_error_kind("count(nMuon)", kSchema) == ExprError::Kind::AggregateOfScalar);
    CHECK(type_error_kind("bogus > 1", kSchema) == ExprError::Kind::UnknownColumn);
    CHECK(type_error_kind("flag + 1", kSchema) == ExprError::Kind::TypeMismatch);
    CHECK(type_error_kind("MET && flag", kSchema) == ExprError::Kind::TypeMismatch);
    CHECK(type_error_kind("flag == 1", kSchema) == ExprError::Kind::TypeMismatch);
    CHECK(type_error_kind("sum(Muon_tight)", kSchema) == ExprError::Kind::TypeMismatch);
    CHECK(type_error_kind("!MET", kSchema) == ExprError::Kind::TypeMismatch);

    CHECK_NOTHROW(require_scalar_bool(*parse("nMuon >= 2 && max(Muon_pt) > 20"), kSchema));
    CHECK_THROWS_AS(require_scalar_bool(*parse("Muon_pt > 20"), kSchema), ExprError);
    CHECK_THROWS_AS(require_scalar_bool(*parse("MET"), kSchema), ExprError);
}

TEST_CASE("column_refs collects every referenced name")
{
    CHECK(column_refs(*parse("max(Muon_pt) > 20 && MET < w + nMuon")) ==
          std::set<std::string>{"MET", "Muon_pt", "nMuon", "w"});
    CHECK(column_refs(*parse("1 + 2")).empty());
}

TEST_CASE("aggregates over jagged events")
{
    std::vector<float> pts{5.0f, 30.0f, 7.0f, 8.0f, 9.0f};
    auto pt = ColumnChunk::jagged_from_lengths(pts, {2, 0, 3});
    ColumnSet cs(pt.range);
    cs.add("Muon_pt", &pt);

    auto count = evaluate(*parse("count(Muon_pt)"), cs);
    CHECK(count.as<std::int64_t>() == std::vector<std::int64_t>{2, 0, 3});

    auto mx = evaluate(*parse("max(Muon_pt)"), cs).as<double>();
    CHECK(mx[0] == 30.0);
    CHECK(std::isnan(mx[1]));
    CHECK(mx[2] == 9.0);

    auto mn = evaluate(*parse("min(Muon_pt)"), cs).as<double>();
    CHECK(mn[0] == 5.0);
    CHECK(std::isnan(mn[1]));

    auto sum = evaluate(*parse("sum(Muon_pt)"), cs).as<double>();
    CHECK(sum == std::vector<double>{35.0, 0.0, 24.0});

    auto mask = evaluate(*parse("Muon_pt > 8"), cs);
    CHECK(mask.type == Type{Scalar::Bool, true});
    CHECK(mask.as<std::uint8_t>() == std::vector<std::uint8_t>{0, 1, 0, 0, 1});
    CHECK(mask.offsets == pt.offsets);
}

TEST_CASE("NaN comparisons are false except !=")
{
    auto x = ColumnChunk::flat(std::vector<double>{std::nan("")});
    ColumnSet cs(x.range);
    cs.add("x", &x);
    for (const char* op : {"<", "<=", ">", ">=", "=="})
        CHECK(evaluate_mask(*parse(std::string("x ") + op + " 1"), cs)[0] == 0);
    CHECK(evaluate_mask(*parse("x != x"), cs)[0] == 1);
}

TEST_CASE("division semantics")
{
    auto a = ColumnChunk::flat(std::vector<std::int64_t>{7, -7, 1});
    auto b = ColumnChunk::flat(std::vector<std::int64_t>{2, 2, 0});
    ColumnSet cs(a.range);
    cs.add("a", &a);
    cs.add("b", &b);
    auto f = evaluate(*parse("a / 0.0"), cs).as<double>();
    CHECK(std::isinf(f[0]));
    CHECK(f[0] > 0);
    CHECK(std::isinf(f[1]));
    CHECK(f[1] < 0);
    try {
        (void)evaluate(*parse("a / b"), cs);
        FAIL("integer division by zero accepted");
    } catch (const ExprError& e) {
        CHECK(e.kind() == ExprError::Kind::IntegerDivisionByZero);
    }
    auto first_two = a.slice({0, 2});
    auto b2 = b.slice({0, 2});
    ColumnSet cs2(first_two.range);
    cs2.add("a", &first_two);
    cs2.add("b", &b2);
    CHECK(evaluate(*parse("a / b"), cs2).as<std::int64_t>() == std::vector<std::int64_t>{3, -3});
}

TEST_CASE("jagged operands must agree on per-event length")
{
    auto d = make_dataset(1, 200);
    auto cs = d.columns();
    CHECK_NOTHROW(evaluate(*parse("Muon_pt * Muon_eta"), cs));
    try {
        (void)evaluate(*parse("Muon_pt + Jet_pt"), cs);
        FAIL("mismatched jagged arithmetic accepted");
    } catch (const ExprError& e) {
        CHECK(e.kind() == ExprError::Kind::JaggedLengthMismatch);
    }
}

TEST_CASE("skim predicate selects exactly the oracle's event set")
{
    auto d = make_dataset(42, 1000);
    auto e = parse("nMuon >= 2 && max(Muon_pt) > 20");
    auto mask = evaluate_mask(*e, d.columns());
    auto naive_cols = d.naive();
    testing::NaiveInterpreter oracle(naive_cols);
    std::size_t selected = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        bool expect = std::get<bool>(oracle.eval(*e, i).items.at(0));
        CHECK((mask[i] != 0) == expect);
        selected += expect;
    }
    CHECK(selected > 0);
    CHECK(selected < 1000);
}

TEST_CASE("vectorized evaluation equals the per-event interpreter on random expressions")
{
    auto data = make_dataset(7, 300);
    auto schema = data.columns().schema();
    std::mt19937_64 rng(12345);
    int accepted = 0, evaluated = 0;
    for (int i = 0; i < 20000 && accepted < 1500; ++i) {
        auto text = random_expr_text(rng, 1 + static_cast<int>(rng() % 4));
        auto e = parse(text);
        try {
            (void)typecheck(*e, schema);
        } catch (const ExprError&) {
            continue;
        }
        ++accepted;
        evaluated += check_against_oracle(*e, data) ? 1 : 0;
    }
    CHECK(accepted >= 1000);
    CHECK(evaluated > accepted / 2);
}

TEST_CASE("evaluation is identical across threads and entry splits")
{
    auto data = make_dataset(9, 4000);
    auto e = parse("sum(Muon_pt * Muon_eta) / (MET + 1) + max(abs(Muon_eta))");
    auto full = evaluate(*e, data.columns()).as<double>();

    std::vector<std::vector<double>> parts(4);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            std::map<std::string, ColumnChunk> sliced;
            for (const auto& [name, c] : data.chunks)
                sliced[name] = c.slice({t * 1000, (t + 1) * 1000});
            ColumnSet cs(sliced.begin()->second.range);
            for (const auto& [name, c] : sliced)
                cs.add(name, &c);
            parts[t] = evaluate(*e, cs).as<double>();
        });
    for (auto& th : threads)
        th.join();
    std::vector<double> joined;
    for (const auto& p : parts)
        joined.insert(joined.end(), p.begin(), p.end());
    REQUIRE(joined.size() == full.size());
    for (std::size_t i = 0; i < full.size(); ++i)
        CHECK(testing::same_double(joined[i], full[i]));
}

TEST_CASE("derived values materialize as flat chunks")
{
    auto data = make_dataset(3, 10);
    auto v = evaluate(*parse("count(Muon_pt) * 2"), data.columns());
    auto chunk = to_chunk(v, 5);
    CHECK(chunk.dtype == DType::I64);
    CHECK(chunk.range == EntryRange{5, 15});
    CHECK_THROWS_AS(to_chunk(evaluate(*parse("Muon_pt"), data.columns())), ExprError);
}
