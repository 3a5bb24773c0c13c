#pragma once

// Mergeable histogram aggregators: Count, Sum and Bin. A Bin holds `num`
// sub-aggregators of one shape plus underflow, overflow and nanflow counters.
//
// Text form:
//   spec  := "count()" | "sum(" quote ")" | "bin(" int "," num "," num "," quote [ "," spec ] ")"
//   quote := an exprlang expression in single or double quotes
// A bin without an explicit sub-aggregator uses count().

#include "treeduce/expr.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace treeduce::hist {

class HistError : public std::runtime_error
{
public:
    enum class Kind {
        Syntax,
        NonScalarQuantity,
        NegativeWeight,
        StructureMismatch,
        NotRenderable,
    };
    HistError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// A scalar quantity: source text plus its parsed form.
struct Quantity
{
    std::string text;
    expr::ExprPtr ast;

    static Quantity parse(std::string text);
};

class Aggregator;

struct Count
{
    double entries = 0.0;
};

struct Sum
{
    double entries = 0.0;
    double sum = 0.0;
    Quantity quantity;
};

struct Bin
{
    std::size_t num = 1;
    double low = 0.0;
    double high = 1.0;
    Quantity quantity;
    std::vector<Aggregator> values;
    std::vector<Aggregator> flows;  // underflow, overflow, nanflow; each a Count

    double entries = 0.0;

    [[nodiscard]] const Aggregator& underflow() const;
    [[nodiscard]] const Aggregator& overflow() const;
    [[nodiscard]] const Aggregator& nanflow() const;

    /// Sub-bin for q, or -1 underflow, -2 overflow, -3 nanflow.
    [[nodiscard]] long index_of(double q) const;
};

class Aggregator
{
public:
    using Node = std::variant<Count, Sum, Bin>;

    static Aggregator count();
    static Aggregator sum(Quantity q);
    /// Sub-aggregator defaults to count(); it is cloned empty into every bin.
    static Aggregator bin(std::size_t num, double low, double high, Quantity q);
    static Aggregator bin(std::size_t num, double low, double high, Quantity q, const Aggregator& sub);

    [[nodiscard]] const Node& node() const { return node_; }
    [[nodiscard]] double entries() const;

    /// Empty aggregator of the same shape.
    [[nodiscard]] Aggregator zero() const;

    /// Rejects quantities that are not scalar (or do not typecheck) against `schema`.
    void check_types(const expr::Schema& schema) const;
    /// Names of every column the quantities read.
    [[nodiscard]] std::vector<std::string> columns() const;

    /// Fills every event of `columns` with the same weight.
    void fill(const expr::ColumnSet& columns, double weight = 1.0);
    /// Fills a single event of `columns` (row is local to the set).
    void fill_event(const expr::ColumnSet& columns, std::size_t row, double weight = 1.0);

    /// Throws HistError(StructureMismatch) if shapes differ.
    [[nodiscard]] static Aggregator combine(const Aggregator& a, const Aggregator& b);
    /// Adds `other` into this aggregator.
    void merge(const Aggregator& other);

    [[nodiscard]] bool same_structure(const Aggregator& other) const;
    /// Structure plus bitwise equality of every entries and sum field.
    [[nodiscard]] bool identical(const Aggregator& other) const;

    /// Bin entries equal the sum over their children, recursively. Returns
    /// false on violation; exact for integer weights, 1e-9 relative otherwise.
    [[nodiscard]] bool conserved() const;
    /// Asserts conserved() in debug builds.
    void check_conservation() const;

    /// Renders the spec text back (normalized).
    [[nodiscard]] std::string to_spec() const;

private:
    explicit Aggregator(Node n) : node_(std::move(n)) {}

    struct Batch;
    void fill_rows(Batch& batch, const std::vector<std::uint32_t>& rows, double weight);

    Node node_;
};

Aggregator parse_spec(std::string_view text);

/// CSV with bin_low, bin_high, entries (and sum for Sum bins), followed by
/// underflow, overflow and nanflow rows. Top level must be a Bin.
void render_csv(const Aggregator& agg, std::ostream& out);
std::string render_csv(const Aggregator& agg);

}  // namespace treeduce::hist
