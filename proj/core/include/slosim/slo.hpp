#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "slosim/units.hpp"

namespace slosim {

struct FlowRecord;

/// Half-open byte range [lo, hi). hi may be +infinity.
struct SizeRange {
    Bytes lo = 0.0;
    Bytes hi = std::numeric_limits<double>::infinity();

    bool contains(Bytes size) const { return size >= lo && size < hi; }
    friend bool operator==(const SizeRange&, const SizeRange&) = default;
};

struct Percentile {
    double p;
    friend bool operator==(const Percentile&, const Percentile&) = default;
};
struct Mean {
    friend bool operator==(const Mean&, const Mean&) = default;
};
struct Max {
    friend bool operator==(const Max&, const Max&) = default;
};
using Metric = std::variant<Percentile, Mean, Max>;

/// A service level indicator over slowdowns. Slowdown is the only attribute.
struct SliDef {
    std::string name;
    Metric metric = Percentile{0.99};
    std::optional<SizeRange> size_filter;

    friend bool operator==(const SliDef&, const SliDef&) = default;
};

enum class CmpOp { Less, LessEq, Greater, GreaterEq };

std::string_view to_string(CmpOp op);

/// SLO predicate tree. Comparison leaves hold `ident op value`; And/Or nodes
/// are n-ary and hold at least two children.
struct SloExpr {
    enum class Kind { Compare, And, Or };

    Kind kind = Kind::Compare;
    std::string ident;
    CmpOp op = CmpOp::Less;
    double value = 0.0;
    std::vector<SloExpr> children;

    static SloExpr compare(std::string ident, CmpOp op, double value);
    static SloExpr all_of(std::vector<SloExpr> children);
    static SloExpr any_of(std::vector<SloExpr> children);

    friend bool operator==(const SloExpr&, const SloExpr&) = default;
};

class SloSyntaxError : public std::runtime_error {
public:
    SloSyntaxError(std::size_t offset, const std::string& what);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// expr := and_expr ("||" and_expr)*
/// and_expr := atom ("&&" atom)*
/// atom := IDENT CMP NUMBER | "(" expr ")"
SloExpr parse_slo(std::string_view text);

/// Canonical text form; parse_slo(to_string(e)) == e.
std::string to_string(const SloExpr& expr);

/// Every identifier referenced by the predicate, in order of appearance.
std::vector<std::string> identifiers(const SloExpr& expr);

enum class Verdict { Met, Violated, Indeterminate };
std::string_view to_string(Verdict v);

using SliValues = std::map<std::string, std::optional<double>>;

/// Three-valued evaluation. Identifiers missing from `slis` are a
/// ConfigError; identifiers mapped to nullopt are absent (indeterminate).
Verdict eval_slo(const SloExpr& expr, const SliValues& slis);

/// Applies the size filter then the metric to post-warmup records.
std::optional<double> compute_sli(const SliDef& def, std::span<const FlowRecord> records);

/// -(threshold - value) / threshold. Negative means the bound is met.
double loss(double sli_value, double slo_threshold);

/// One upper-bound comparison's contribution to a class loss.
struct BindingTerm {
    std::string ident;
    std::optional<double> value;
    double threshold;
    double loss;  // 0 when the SLI is absent
};

/// True when every comparison is an upper bound (< or <=).
bool upper_bounds_only(const SloExpr& expr);

/// Class loss: maximum loss over the predicate's upper-bound comparisons. An
/// absent SLI contributes 0 so it can never count as met. Lower-bound
/// comparisons are a ConfigError.
BindingTerm class_loss(const SloExpr& expr, const SliValues& slis);

}  // namespace slosim
