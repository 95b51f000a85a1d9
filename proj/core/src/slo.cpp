#include "slosim/slo.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include "slosim/error.hpp"
#include "slosim/records.hpp"

namespace slosim {

std::string_view to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Less: return "<";
        case CmpOp::LessEq: return "<=";
        case CmpOp::Greater: return ">";
        case CmpOp::GreaterEq: return ">=";
    }
    return "?";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Met: return "met";
        case Verdict::Violated: return "violated";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "?";
}

SloExpr SloExpr::compare(std::string ident, CmpOp op, double value) {
    SloExpr e;
    e.kind = Kind::Compare;
    e.ident = std::move(ident);
    e.op = op;
    e.value = value;
    return e;
}

SloExpr SloExpr::all_of(std::vector<SloExpr> children) {
    if (children.size() == 1) return std::move(children.front());
    SloExpr e;
    e.kind = Kind::And;
    e.children = std::move(children);
    return e;
}

SloExpr SloExpr::any_of(std::vector<SloExpr> children) {
    if (children.size() == 1) return std::move(children.front());
    SloExpr e;
    e.kind = Kind::Or;
    e.children = std::move(children);
    return e;
}

SloSyntaxError::SloSyntaxError(std::size_t offset, const std::string& what)
    : std::runtime_error("SLO syntax error at offset " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    SloExpr parse() {
        SloExpr e = parse_or();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw SloSyntaxError(pos_, what); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    SloExpr parse_or() {
        std::vector<SloExpr> terms;
        terms.push_back(parse_and());
        while (eat("||")) terms.push_back(parse_and());
        return SloExpr::any_of(std::move(terms));
    }

    SloExpr parse_and() {
        std::vector<SloExpr> terms;
        terms.push_back(parse_atom());
        while (eat("&&")) terms.push_back(parse_atom());
        return SloExpr::all_of(std::move(terms));
    }

    SloExpr parse_atom() {
        skip_ws();
        if (eat("(")) {
            SloExpr inner = parse_or();
            if (!eat(")")) fail("expected ')'");
            return inner;
        }
        std::string ident = parse_ident();
        CmpOp op = parse_cmp();
        double value = parse_number();
        return SloExpr::compare(std::move(ident), op, value);
    }

    std::string parse_ident() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ >= text_.size() ||
            !(std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            fail("expected identifier or '('");
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    CmpOp parse_cmp() {
        if (eat("<=")) return CmpOp::LessEq;
        if (eat(">=")) return CmpOp::GreaterEq;
        if (eat("<")) return CmpOp::Less;
        if (eat(">")) return CmpOp::Greater;
        fail("expected comparison operator");
    }

    double parse_number() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::size_t int_digits = pos_ - start;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            std::size_t frac_start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ == frac_start) fail("expected digits after '.'");
        }
        if (int_digits == 0) {
            pos_ = start;
            fail("expected number");
        }
        double value = 0.0;
        auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc{}) {
            pos_ = start;
            fail("number out of range");
        }
        return value;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void print(const SloExpr& e, std::string& out) {
    switch (e.kind) {
        case SloExpr::Kind::Compare: {
            out += e.ident;
            out += ' ';
            out += to_string(e.op);
            out += ' ';
            std::array<char, 64> buf{};
            auto res = std::to_chars(buf.data(), buf.data() + buf.size(), e.value, std::chars_format::fixed);
            out.append(buf.data(), res.ptr);
            return;
        }
        case SloExpr::Kind::And:
        case SloExpr::Kind::Or: {
            const bool is_and = e.kind == SloExpr::Kind::And;
            for (std::size_t i = 0; i < e.children.size(); ++i) {
                if (i) out += is_and ? " && " : " || ";
                const auto& c = e.children[i];
                // And binds tighter than Or; anything else nested keeps its
                // grouping so the tree survives a round trip.
                bool paren = c.kind != SloExpr::Kind::Compare &&
                             (is_and || c.kind == SloExpr::Kind::Or);
                if (paren) out += '(';
                print(c, out);
                if (paren) out += ')';
            }
            return;
        }
    }
}

void collect(const SloExpr& e, std::vector<std::string>& out) {
    if (e.kind == SloExpr::Kind::Compare) {
        out.push_back(e.ident);
        return;
    }
    for (const auto& c : e.children) collect(c, out);
}

bool compare(double lhs, CmpOp op, double rhs) {
    switch (op) {
        case CmpOp::Less: return lhs < rhs;
        case CmpOp::LessEq: return lhs <= rhs;
        case CmpOp::Greater: return lhs > rhs;
        case CmpOp::GreaterEq: return lhs >= rhs;
    }
    return false;
}

const std::optional<double>& lookup(const SliValues& slis, const std::string& ident) {
    auto it = slis.find(ident);
    if (it == slis.end()) throw ConfigError("SLO references undeclared SLI \"" + ident + "\"");
    return it->second;
}

}  // namespace

SloExpr parse_slo(std::string_view text) { return Parser(text).parse(); }

std::string to_string(const SloExpr& expr) {
    std::string out;
    print(expr, out);
    return out;
}

std::vector<std::string> identifiers(const SloExpr& expr) {
    std::vector<std::string> out;
    collect(expr, out);
    return out;
}

Verdict eval_slo(const SloExpr& expr, const SliValues& slis) {
    switch (expr.kind) {
        case SloExpr::Kind::Compare: {
            const auto& v = lookup(slis, expr.ident);
            if (!v) return Verdict::Indeterminate;
            return compare(*v, expr.op, expr.value) ? Verdict::Met : Verdict::Violated;
        }
        case SloExpr::Kind::And: {
            // Evaluate every child so undeclared identifiers are always reported.
            bool any_unknown = false;
            bool any_false = false;
            for (const auto& c : expr.children) {
                Verdict v = eval_slo(c, slis);
                any_false |= v == Verdict::Violated;
                any_unknown |= v == Verdict::Indeterminate;
            }
            if (any_false) return Verdict::Violated;
            return any_unknown ? Verdict::Indeterminate : Verdict::Met;
        }
        case SloExpr::Kind::Or: {
            bool any_unknown = false;
            bool any_true = false;
            for (const auto& c : expr.children) {
                Verdict v = eval_slo(c, slis);
                any_true |= v == Verdict::Met;
                any_unknown |= v == Verdict::Indeterminate;
            }
            if (any_true) return Verdict::Met;
            return any_unknown ? Verdict::Indeterminate : Verdict::Violated;
        }
    }
    return Verdict::Indeterminate;
}

std::optional<double> compute_sli(const SliDef& def, std::span<const FlowRecord> records) {
    const SizeRange filter = def.size_filter.value_or(SizeRange{});
    if (const auto* pct = std::get_if<Percentile>(&def.metric))
        return slowdown_percentile(records, pct->p, filter);

    double sum = 0.0;
    double max = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (!filter.contains(r.size)) continue;
        sum += r.slowdown;
        max = n == 0 ? r.slowdown : std::max(max, r.slowdown);
        ++n;
    }
    if (n == 0) return std::nullopt;
    if (std::holds_alternative<Mean>(def.metric)) return sum / static_cast<double>(n);
    return max;
}

double loss(double sli_value, double slo_threshold) {
    if (!(slo_threshold > 0.0)) throw ConfigError("SLO threshold must be positive to compute a loss");
    return -(slo_threshold - sli_value) / slo_threshold;
}

bool upper_bounds_only(const SloExpr& expr) {
    if (expr.kind == SloExpr::Kind::Compare) return expr.op == CmpOp::Less || expr.op == CmpOp::LessEq;
    return std::all_of(expr.children.begin(), expr.children.end(),
                       [](const SloExpr& c) { return upper_bounds_only(c); });
}

BindingTerm class_loss(const SloExpr& expr, const SliValues& slis) {
    std::vector<const SloExpr*> leaves;
    std::vector<const SloExpr*> stack{&expr};
    while (!stack.empty()) {
        const SloExpr* e = stack.back();
        stack.pop_back();
        if (e->kind == SloExpr::Kind::Compare) {
            leaves.push_back(e);
        } else {
            for (auto it = e->children.rbegin(); it != e->children.rend(); ++it) stack.push_back(&*it);
        }
    }
    std::optional<BindingTerm> worst;
    for (const SloExpr* leaf : leaves) {
        if (leaf->op == CmpOp::Greater || leaf->op == CmpOp::GreaterEq)
            throw ConfigError("loss is only defined for upper-bound comparisons; got \"" +
                              to_string(*leaf) + "\"");
        const auto& v = lookup(slis, leaf->ident);
        BindingTerm term{leaf->ident, v, leaf->value, v ? loss(*v, leaf->value) : 0.0};
        if (!worst || term.loss > worst->loss) worst = term;
    }
    return *worst;
}

}  // namespace slosim
