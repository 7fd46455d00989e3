#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridbook/normalize.hpp"
#include "gridbook/workbook.hpp"

namespace gridbook {

using ValueGrid = std::map<CellAddress, Value>;

struct DependencyGraph {
    std::map<CellAddress, std::vector<CellAddress>> edges;  // cell -> cells it references
    std::vector<std::vector<CellAddress>> cycles;           // SCCs of size > 1, plus self-loops
};

namespace detail {

// ---- proleptic Gregorian calendar, 1900 date system (serial 1 = 1900-01-01)

inline long days_from_civil(long y, int m, int d) {
    y -= m <= 2;
    long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = unsigned(y - era * 400);
    unsigned doy = (153u * unsigned(m + (m > 2 ? -3 : 9)) + 2) / 5 + unsigned(d) - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + long(doe) - 719468;
}

inline void civil_from_days(long z, long& y, int& m, int& d) {
    z += 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = unsigned(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yr = long(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = int(doy - (153 * mp + 2) / 5 + 1);
    m = int(mp + (mp < 10 ? 3 : -9));
    y = yr + (m <= 2);
}

inline const long kSerialEpoch = days_from_civil(1899, 12, 31);

// ---- operands: scalar or rectangular range in some book

struct RangeOperand {
    const Workbook* book = nullptr;  // book owning the sheet
    bool external = false;           // true when book != host workbook
    std::string link_name;           // binding name when external
    std::string sheet;
    int c1 = 0, r1 = 0, c2 = 0, r2 = 0;

    int width() const { return c2 - c1 + 1; }
    int height() const { return r2 - r1 + 1; }
};

struct Operand {
    bool is_range = false;
    Value scalar;
    RangeOperand range;

    static Operand of(Value v) { return Operand{false, std::move(v), {}}; }
    static Operand of(RangeOperand r) { return Operand{true, Value(), std::move(r)}; }
};

struct NumResult {
    bool ok = false;
    double num = 0;
    ErrorKind err = ErrorKind::VALUE;
};

inline NumResult to_number(const Value& v) {
    if (v.is_error()) return {false, 0, v.as_error()};
    if (v.is_number()) return {true, v.as_number()};
    if (v.is_bool()) return {true, v.as_bool() ? 1.0 : 0.0};
    if (v.is_blank()) return {true, 0.0};
    // text numerals coerce, anything else is #VALUE!
    const std::string& s = v.as_text();
    size_t i = 0;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
    bool digits = false;
    size_t j = i;
    while (j < s.size() && std::isdigit((unsigned char)s[j])) { ++j; digits = true; }
    if (j < s.size() && s[j] == '.') {
        ++j;
        while (j < s.size() && std::isdigit((unsigned char)s[j])) { ++j; digits = true; }
    }
    if (digits && j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        size_t d = k;
        while (k < s.size() && std::isdigit((unsigned char)s[k])) ++k;
        if (k > d) j = k;
    }
    if (!digits || j != s.size()) return {false, 0, ErrorKind::VALUE};
    return {true, std::stod(s)};
}

struct BoolResult {
    bool ok = false;
    bool b = false;
    ErrorKind err = ErrorKind::VALUE;
};

inline BoolResult to_bool(const Value& v) {
    if (v.is_error()) return {false, false, v.as_error()};
    if (v.is_bool()) return {true, v.as_bool()};
    if (v.is_number()) return {true, v.as_number() != 0};
    if (v.is_blank()) return {true, false};
    return {false, false, ErrorKind::VALUE};
}

inline std::string to_concat_text(const Value& v) {
    if (v.is_blank()) return "";
    if (v.is_number()) return format_number(v.as_number());
    if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
    return v.as_text();
}

inline std::string ci_fold(const std::string& s) {
    std::string out = s;
    for (auto& c : out) c = ascii_upper(c);
    return out;
}

// host ordering: Number < Text < Bool; Blank coerces to the other side's type
inline Value compare_values(const Value& a, const Value& b, BinOp op) {
    if (a.is_error()) return a;
    if (b.is_error()) return b;
    Value x = a, y = b;
    if (x.is_blank() && y.is_blank()) { x = Value::number(0); y = Value::number(0); }
    else if (x.is_blank()) {
        x = y.is_number() ? Value::number(0) : y.is_text() ? Value::text("") : Value::boolean(false);
    } else if (y.is_blank()) {
        y = x.is_number() ? Value::number(0) : x.is_text() ? Value::text("") : Value::boolean(false);
    }
    auto rank = [](const Value& v) { return v.is_number() ? 0 : v.is_text() ? 1 : 2; };
    int cmp;
    if (rank(x) != rank(y)) {
        cmp = rank(x) < rank(y) ? -1 : 1;
    } else if (x.is_number()) {
        cmp = x.as_number() < y.as_number() ? -1 : x.as_number() > y.as_number() ? 1 : 0;
    } else if (x.is_text()) {
        std::string fx = ci_fold(x.as_text()), fy = ci_fold(y.as_text());
        cmp = fx < fy ? -1 : fx > fy ? 1 : 0;
    } else {
        cmp = int(x.as_bool()) - int(y.as_bool());
    }
    bool r = false;
    switch (op) {
        case BinOp::Eq: r = cmp == 0; break;
        case BinOp::Ne: r = cmp != 0; break;
        case BinOp::Lt: r = cmp < 0; break;
        case BinOp::Le: r = cmp <= 0; break;
        case BinOp::Gt: r = cmp > 0; break;
        default: r = cmp >= 0; break;
    }
    return Value::boolean(r);
}

// type class used by lookup comparisons: only like compares with like
enum class ValClass { Number, Text, Bool, Other };
inline ValClass val_class(const Value& v) {
    if (v.is_number()) return ValClass::Number;
    if (v.is_text()) return ValClass::Text;
    if (v.is_bool()) return ValClass::Bool;
    return ValClass::Other;
}

inline int cmp_same_class(const Value& a, const Value& b) {
    if (a.is_number()) return a.as_number() < b.as_number() ? -1 : a.as_number() > b.as_number() ? 1 : 0;
    if (a.is_text()) {
        std::string x = ci_fold(a.as_text()), y = ci_fold(b.as_text());
        return x < y ? -1 : x > y ? 1 : 0;
    }
    return int(a.as_bool()) - int(b.as_bool());
}

}  // namespace detail

// Evaluates formulas for one workbook. Host-cell values are obtained through
// a caller-supplied lookup so alternative evaluation orders can reuse the
// same formula semantics; linked books are fully evaluated up front.
class Evaluator {
public:
    using LookupFn = std::function<Value(const CellAddress&)>;

    explicit Evaluator(const Workbook& wb);

    Value eval_formula(const CellAddress& at, const AstPtr& ast, const LookupFn& host) const {
        detail::Operand op = eval(ast, at, host);
        return deref(op);
    }

    const std::map<std::string, ValueGrid, CiLess>& link_grids() const { return link_grids_; }

private:
    using Operand = detail::Operand;
    using RangeOperand = detail::RangeOperand;

    Value deref(const Operand& op) const {
        if (!op.is_range) return op.scalar;
        if (op.range.width() == 1 && op.range.height() == 1) return fetch(op.range, 1, 1);
        return Value::error(ErrorKind::VALUE);
    }

    // 1-based (row, col) within the range
    Value fetch(const RangeOperand& r, int row, int col) const {
        int c = r.c1 + col - 1;
        int rr = r.r1 + row - 1;
        const Sheet* sh = r.book->find_sheet(r.sheet);
        if (!sh) return Value::error(ErrorKind::REF);
        const Cell* cell = sh->cell_at(c, rr);
        if (!cell) return Value::blank();
        if (!cell->is_formula()) return cell->literal();
        CellAddress a{sh->name, c, rr};
        if (!r.external) return host_(a);
        auto git = link_grids_.find(r.link_name);
        if (git == link_grids_.end()) return Value::error(ErrorKind::REF);
        auto vit = git->second.find(a);
        return vit == git->second.end() ? Value::blank() : vit->second;
    }

    struct Target {
        const Workbook* book = nullptr;
        bool external = false;
        std::string link_name;
        bool ok = false;
        ErrorKind err = ErrorKind::REF;
    };

    Target target_book(const std::optional<std::string>& book_name) const {
        Target t;
        if (!book_name) {
            t.book = wb_;
            t.ok = true;
            return t;
        }
        auto it = wb_->links.find(*book_name);
        if (it == wb_->links.end()) return t;  // external unresolved -> #REF!
        t.book = &it->second;
        t.external = true;
        t.link_name = it->first;
        t.ok = true;
        return t;
    }

    Operand make_range(const Ref& first, const Ref& second, const CellAddress& ctx) const {
        Target t = target_book(first.workbook);
        if (!t.ok) return Operand::of(Value::error(ErrorKind::REF));
        std::string sheet = first.sheet.value_or(ctx.sheet);
        const Sheet* sh = t.book->find_sheet(sheet);
        if (!sh) return Operand::of(Value::error(ErrorKind::REF));
        RangeOperand r;
        r.book = t.book;
        r.external = t.external;
        r.link_name = t.link_name;
        r.sheet = sh->name;
        r.c1 = first.col;
        r.c2 = second.col;
        if (first.col_only || second.col_only) {
            auto [mc, mr] = sh->used_extent();
            (void)mc;
            r.r1 = 1;
            r.r2 = std::max(1, mr);
        } else {
            r.r1 = first.row;
            r.r2 = second.row;
        }
        return Operand::of(r);
    }

    Operand eval(const AstPtr& a, const CellAddress& ctx, const LookupFn& host) const;
    Value call_function(const Ast::Call& c, const CellAddress& ctx, const LookupFn& host) const;

    Value arith(BinOp op, const Value& a, const Value& b) const {
        using detail::to_number;
        auto na = to_number(a);
        if (!na.ok) return Value::error(na.err);
        auto nb = to_number(b);
        if (!nb.ok) return Value::error(nb.err);
        double r = 0;
        switch (op) {
            case BinOp::Add: r = na.num + nb.num; break;
            case BinOp::Sub: r = na.num - nb.num; break;
            case BinOp::Mul: r = na.num * nb.num; break;
            case BinOp::Div:
                if (nb.num == 0) return Value::error(ErrorKind::DIV0);
                r = na.num / nb.num;
                break;
            case BinOp::Pow: {
                if (na.num == 0 && nb.num == 0) return Value::error(ErrorKind::NUM);
                if (na.num == 0 && nb.num < 0) return Value::error(ErrorKind::DIV0);
                if (na.num < 0 && nb.num != std::floor(nb.num)) return Value::error(ErrorKind::NUM);
                r = std::pow(na.num, nb.num);
                break;
            }
            default: return Value::error(ErrorKind::VALUE);
        }
        if (!std::isfinite(r)) return Value::error(ErrorKind::NUM);
        return Value::number(r);
    }

    const Workbook* wb_;
    std::map<std::string, ValueGrid, CiLess> link_grids_;
    mutable LookupFn host_;  // active host lookup during eval_formula
};

inline ValueGrid evaluate(const Workbook& wb);

inline Evaluator::Evaluator(const Workbook& wb) : wb_(&wb) {
    for (const auto& [name, book] : wb.links) link_grids_.emplace(name, evaluate(book));
}

inline detail::Operand Evaluator::eval(const AstPtr& a, const CellAddress& ctx, const LookupFn& host) const {
    host_ = host;
    if (auto* n = std::get_if<Ast::NumberLit>(&a->node)) return Operand::of(Value::number(n->value));
    if (auto* t = std::get_if<Ast::TextLit>(&a->node)) return Operand::of(Value::text(t->value));
    if (auto* b = std::get_if<Ast::BoolLit>(&a->node)) return Operand::of(Value::boolean(b->value));
    if (auto* e = std::get_if<Ast::ErrorLit>(&a->node)) return Operand::of(Value::error(e->kind));
    if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
        Operand rng = make_range(r->ref, r->ref, ctx);
        if (!rng.is_range) return rng;
        return Operand::of(fetch(rng.range, 1, 1));
    }
    if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) return make_range(rg->first, rg->second, ctx);
    if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
        Target t = target_book(nm->workbook);
        if (!t.ok) return Operand::of(Value::error(ErrorKind::REF));
        const DefinedName* dn = t.book->find_name(nm->name);
        if (!dn) return Operand::of(Value::error(ErrorKind::NAME));
        Ref first = dn->target_first;
        Ref second = dn->target_second.value_or(first);
        first.workbook = nm->workbook;
        Operand rng = make_range(first, second, ctx);
        if (rng.is_range && rng.range.width() == 1 && rng.range.height() == 1)
            return Operand::of(fetch(rng.range, 1, 1));
        return rng;
    }
    if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
        Value v = deref(eval(u->operand, ctx, host));
        auto n = detail::to_number(v);
        if (!n.ok) return Operand::of(Value::error(n.err));
        return Operand::of(Value::number(u->op == '-' ? -n.num : n.num / 100.0));
    }
    if (auto* bi = std::get_if<Ast::Binary>(&a->node)) {
        Value lhs = deref(eval(bi->lhs, ctx, host));
        Value rhs = deref(eval(bi->rhs, ctx, host));
        switch (bi->op) {
            case BinOp::Concat: {
                if (lhs.is_error()) return Operand::of(lhs);
                if (rhs.is_error()) return Operand::of(rhs);
                return Operand::of(Value::text(detail::to_concat_text(lhs) + detail::to_concat_text(rhs)));
            }
            case BinOp::Eq:
            case BinOp::Ne:
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge:
                return Operand::of(detail::compare_values(lhs, rhs, bi->op));
            default:
                return Operand::of(arith(bi->op, lhs, rhs));
        }
    }
    const auto& c = std::get<Ast::Call>(a->node);
    return Operand::of(call_function(c, ctx, host));
}

inline Value Evaluator::call_function(const Ast::Call& c, const CellAddress& ctx, const LookupFn& host) const {
    using detail::to_bool;
    using detail::to_number;
    const auto& f = c.func;
    auto argc = c.args.size();
    auto scalar = [&](size_t i) { return deref(eval(c.args[i], ctx, host)); };
    auto operand = [&](size_t i) { return eval(c.args[i], ctx, host); };
    auto as_1x1 = [&](const Operand& op) {  // scalar arg viewed as a 1-cell "range"
        return op;
    };
    (void)as_1x1;

    if (f == "IF") {
        if (argc < 2 || argc > 3) return Value::error(ErrorKind::VALUE);
        auto b = to_bool(scalar(0));
        if (!b.ok) return Value::error(b.err);
        if (b.b) return scalar(1);
        return argc == 3 ? scalar(2) : Value::boolean(false);
    }
    if (f == "IFERROR") {
        if (argc != 2) return Value::error(ErrorKind::VALUE);
        Value v = scalar(0);
        return v.is_error() ? scalar(1) : v;
    }
    if (f == "ISNA") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        Value v = scalar(0);
        return Value::boolean(v.is_error() && v.as_error() == ErrorKind::NA);
    }
    if (f == "ISERROR") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        return Value::boolean(scalar(0).is_error());
    }
    if (f == "ISBLANK") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        Value v = scalar(0);
        if (v.is_error()) return v;
        return Value::boolean(v.is_blank());
    }
    if (f == "NA") {
        return argc == 0 ? Value::error(ErrorKind::NA) : Value::error(ErrorKind::VALUE);
    }
    if (f == "NOT") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        auto b = to_bool(scalar(0));
        if (!b.ok) return Value::error(b.err);
        return Value::boolean(!b.b);
    }
    if (f == "AND" || f == "OR") {
        if (argc == 0) return Value::error(ErrorKind::VALUE);
        bool any = false;
        bool acc = f == "AND";
        for (size_t i = 0; i < argc; ++i) {
            Operand op = operand(i);
            if (!op.is_range) {
                if (op.scalar.is_error()) return op.scalar;
                auto b = to_bool(op.scalar);
                if (!b.ok) return Value::error(b.err);
                any = true;
                acc = f == "AND" ? (acc && b.b) : (acc || b.b);
            } else {
                for (int r = 1; r <= op.range.height(); ++r)
                    for (int col = 1; col <= op.range.width(); ++col) {
                        Value v = fetch(op.range, r, col);
                        if (v.is_error()) return v;
                        if (v.is_text() || v.is_blank()) continue;
                        auto b = to_bool(v);
                        if (!b.ok) return Value::error(b.err);
                        any = true;
                        acc = f == "AND" ? (acc && b.b) : (acc || b.b);
                    }
            }
        }
        if (!any) return Value::error(ErrorKind::VALUE);
        return Value::boolean(acc);
    }
    if (f == "SUM" || f == "MAX" || f == "MIN") {
        double sum = 0;
        bool have = false;
        double best = 0;
        for (size_t i = 0; i < argc; ++i) {
            Operand op = operand(i);
            if (!op.is_range) {
                const Value& v = op.scalar;
                if (v.is_error()) return v;
                if (v.is_blank()) continue;
                auto n = to_number(v);
                if (!n.ok) return Value::error(n.err);
                sum += n.num;
                if (!have || (f == "MAX" ? n.num > best : n.num < best)) best = n.num;
                have = true;
            } else {
                for (int r = 1; r <= op.range.height(); ++r)
                    for (int col = 1; col <= op.range.width(); ++col) {
                        Value v = fetch(op.range, r, col);
                        if (v.is_error()) return v;
                        if (!v.is_number()) continue;  // ranges: skip Blank/Text/Bool
                        sum += v.as_number();
                        if (!have || (f == "MAX" ? v.as_number() > best : v.as_number() < best)) best = v.as_number();
                        have = true;
                    }
            }
        }
        if (f == "SUM") return std::isfinite(sum) ? Value::number(sum) : Value::error(ErrorKind::NUM);
        return Value::number(have ? best : 0.0);
    }
    if (f == "SUMPRODUCT") {
        if (argc == 0) return Value::error(ErrorKind::VALUE);
        std::vector<Operand> ops;
        for (size_t i = 0; i < argc; ++i) ops.push_back(operand(i));
        int w = -1, h = -1;
        for (auto& op : ops) {
            int ow = op.is_range ? op.range.width() : 1;
            int oh = op.is_range ? op.range.height() : 1;
            if (!op.is_range && op.scalar.is_error()) return op.scalar;
            if (w < 0) { w = ow; h = oh; }
            else if (w != ow || h != oh) return Value::error(ErrorKind::VALUE);
        }
        double total = 0;
        for (int r = 1; r <= h; ++r)
            for (int col = 1; col <= w; ++col) {
                double prod = 1;
                for (auto& op : ops) {
                    Value v = op.is_range ? fetch(op.range, r, col) : op.scalar;
                    if (v.is_error()) return v;
                    prod *= v.is_number() ? v.as_number() : 0.0;  // non-numeric counts as 0
                }
                total += prod;
            }
        return std::isfinite(total) ? Value::number(total) : Value::error(ErrorKind::NUM);
    }
    if (f == "VLOOKUP" || f == "HLOOKUP") {
        if (argc < 3 || argc > 4) return Value::error(ErrorKind::VALUE);
        Value v = scalar(0);
        if (v.is_error()) return v;
        if (v.is_blank()) v = Value::number(0);
        Operand table = operand(1);
        if (!table.is_range) {
            if (table.scalar.is_error()) return table.scalar;
            return Value::error(ErrorKind::VALUE);
        }
        auto idx = to_number(scalar(2));
        if (!idx.ok) return Value::error(idx.err);
        int want = int(idx.num);
        bool exact = false;
        if (argc == 4) {
            auto b = to_bool(scalar(3));
            if (!b.ok) return Value::error(b.err);
            exact = !b.b;
        }
        bool vertical = f == "VLOOKUP";
        int n = vertical ? table.range.height() : table.range.width();
        int breadth = vertical ? table.range.width() : table.range.height();
        if (want < 1) return Value::error(ErrorKind::VALUE);
        if (want > breadth) return Value::error(ErrorKind::REF);
        auto key_at = [&](int i) { return vertical ? fetch(table.range, i, 1) : fetch(table.range, 1, i); };
        auto out_at = [&](int i) { return vertical ? fetch(table.range, i, want) : fetch(table.range, want, i); };
        detail::ValClass cls = detail::val_class(v);
        int found = 0;
        for (int i = 1; i <= n; ++i) {
            Value k = key_at(i);
            if (detail::val_class(k) != cls) continue;
            int cmp = detail::cmp_same_class(k, v);
            if (exact) {
                if (cmp == 0) { found = i; break; }
            } else {
                if (cmp <= 0) found = i;  // deterministic linear scan, last key <= value
            }
        }
        if (found == 0) return Value::error(ErrorKind::NA);
        return out_at(found);
    }
    if (f == "MATCH") {
        if (argc < 2 || argc > 3) return Value::error(ErrorKind::VALUE);
        Value v = scalar(0);
        if (v.is_error()) return v;
        if (v.is_blank()) v = Value::number(0);
        Operand vec = operand(1);
        if (!vec.is_range) {
            if (vec.scalar.is_error()) return vec.scalar;
            return Value::error(ErrorKind::NUM);
        }
        if (vec.range.width() != 1 && vec.range.height() != 1) return Value::error(ErrorKind::NUM);
        int type = 1;
        if (argc == 3) {
            auto t = to_number(scalar(2));
            if (!t.ok) return Value::error(t.err);
            type = t.num > 0 ? 1 : t.num < 0 ? -1 : 0;
        }
        int n = std::max(vec.range.width(), vec.range.height());
        bool vertical = vec.range.width() == 1;
        detail::ValClass cls = detail::val_class(v);
        int found = 0;
        for (int i = 1; i <= n; ++i) {
            Value k = vertical ? fetch(vec.range, i, 1) : fetch(vec.range, 1, i);
            if (detail::val_class(k) != cls) continue;
            int cmp = detail::cmp_same_class(k, v);
            if (type == 0) {
                if (cmp == 0) { found = i; break; }
            } else if (type == 1) {
                if (cmp <= 0) found = i;
            } else {
                if (cmp >= 0) found = i;
            }
        }
        if (found == 0) return Value::error(ErrorKind::NA);
        return Value::number(found);
    }
    if (f == "INDEX") {
        if (argc < 2 || argc > 3) return Value::error(ErrorKind::VALUE);
        Operand rng = operand(0);
        if (!rng.is_range) {
            if (rng.scalar.is_error()) return rng.scalar;
            return Value::error(ErrorKind::REF);
        }
        auto ri = to_number(scalar(1));
        if (!ri.ok) return Value::error(ri.err);
        int row = int(ri.num);
        int w = rng.range.width(), h = rng.range.height();
        if (argc == 2) {
            // vector form only
            if (w == 1) {
                if (row < 1 || row > h) return Value::error(ErrorKind::REF);
                return fetch(rng.range, row, 1);
            }
            if (h == 1) {
                if (row < 1 || row > w) return Value::error(ErrorKind::REF);
                return fetch(rng.range, 1, row);
            }
            return Value::error(ErrorKind::REF);
        }
        auto ci = to_number(scalar(2));
        if (!ci.ok) return Value::error(ci.err);
        int col = int(ci.num);
        if (row < 1 || row > h || col < 1 || col > w) return Value::error(ErrorKind::REF);
        return fetch(rng.range, row, col);
    }
    if (f == "ABS") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        auto n = to_number(scalar(0));
        if (!n.ok) return Value::error(n.err);
        return Value::number(std::fabs(n.num));
    }
    if (f == "ROUND") {
        if (argc != 2) return Value::error(ErrorKind::VALUE);
        auto x = to_number(scalar(0));
        if (!x.ok) return Value::error(x.err);
        auto d = to_number(scalar(1));
        if (!d.ok) return Value::error(d.err);
        double factor = std::pow(10.0, std::trunc(d.num));
        double r = std::floor(std::fabs(x.num) * factor + 0.5) / factor;
        if (x.num < 0) r = -r;
        if (!std::isfinite(r)) return Value::error(ErrorKind::NUM);
        return Value::number(r);
    }
    if (f == "DATE") {
        if (argc != 3) return Value::error(ErrorKind::VALUE);
        double parts[3];
        for (int i = 0; i < 3; ++i) {
            auto n = to_number(scalar(size_t(i)));
            if (!n.ok) return Value::error(n.err);
            parts[i] = std::trunc(n.num);
        }
        long y = long(parts[0]);
        long months = y * 12 + long(parts[1]) - 1;  // month/day overflow rolls over
        long y2 = months >= 0 ? months / 12 : (months - 11) / 12;
        int m2 = int(months - y2 * 12) + 1;
        long serial = detail::days_from_civil(y2, m2, 1) + long(parts[2]) - 1 - detail::kSerialEpoch;
        if (serial < 1) return Value::error(ErrorKind::NUM);
        return Value::number(double(serial));
    }
    if (f == "YEAR") {
        if (argc != 1) return Value::error(ErrorKind::VALUE);
        auto n = to_number(scalar(0));
        if (!n.ok) return Value::error(n.err);
        long serial = long(std::trunc(n.num));
        if (serial < 1) return Value::error(ErrorKind::NUM);
        long y;
        int m, d;
        detail::civil_from_days(serial + detail::kSerialEpoch, y, m, d);
        return Value::number(double(y));
    }
    return Value::error(ErrorKind::NAME);  // outside the supported set
}

// ---- reference collection & dependency graph ------------------------------

namespace detail {

// addresses a formula depends on, host book only; when `existing_only`,
// ranges contribute just the populated cells (what evaluation order needs)
inline void collect_refs(const Workbook& wb, const CellAddress& at, const AstPtr& a,
                         std::vector<CellAddress>& out, bool existing_only) {
    auto add_rect = [&](const std::string& sheet_name, int c1, int r1, int c2, int r2) {
        const Sheet* sh = wb.find_sheet(sheet_name);
        if (!sh) return;
        if (existing_only) {
            for (const auto& [key, cell] : sh->cells) {
                (void)cell;
                if (key.first >= r1 && key.first <= r2 && key.second >= c1 && key.second <= c2)
                    out.push_back(CellAddress{sh->name, key.second, key.first});
            }
        } else {
            for (int r = r1; r <= r2; ++r)
                for (int c = c1; c <= c2; ++c) out.push_back(CellAddress{sh->name, c, r});
        }
    };
    auto add_pair = [&](const Ref& first, const Ref& second) {
        if (first.workbook) return;  // external cells are not host graph nodes
        std::string sheet = first.sheet.value_or(at.sheet);
        const Sheet* sh = wb.find_sheet(sheet);
        if (!sh) return;
        int r1 = first.row, r2 = second.row;
        if (first.col_only || second.col_only) {
            auto [mc, mr] = sh->used_extent();
            (void)mc;
            r1 = 1;
            r2 = std::max(1, mr);
        }
        add_rect(sheet, first.col, r1, second.col, r2);
    };
    if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
        add_pair(r->ref, r->ref);
    } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
        add_pair(rg->first, rg->second);
    } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
        if (!nm->workbook) {
            if (const DefinedName* dn = wb.find_name(nm->name))
                add_pair(dn->target_first, dn->target_second.value_or(dn->target_first));
        }
    } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
        collect_refs(wb, at, u->operand, out, existing_only);
    } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
        collect_refs(wb, at, b->lhs, out, existing_only);
        collect_refs(wb, at, b->rhs, out, existing_only);
    } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
        for (const auto& arg : c->args) collect_refs(wb, at, arg, out, existing_only);
    }
}

}  // namespace detail

inline DependencyGraph build_graph(const Workbook& wb) {
    DependencyGraph g;
    std::vector<CellAddress> formulas;
    for (const auto& sheet : wb.sheets)
        for (const auto& [key, cell] : sheet.cells)
            if (cell.is_formula()) {
                CellAddress at{sheet.name, key.second, key.first};
                std::vector<CellAddress> deps;
                detail::collect_refs(wb, at, cell.formula().ast, deps, false);
                std::sort(deps.begin(), deps.end());
                deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
                g.edges[at] = std::move(deps);
                formulas.push_back(at);
            }

    // SCCs over formula cells (iterative Tarjan), restricted to formula edges
    std::map<CellAddress, int> index, low;
    std::map<CellAddress, bool> onstack;
    std::vector<CellAddress> stack;
    int counter = 0;
    auto formula_deps = [&](const CellAddress& a) {
        std::vector<CellAddress> out;
        for (const auto& d : g.edges.at(a))
            if (g.edges.count(d)) out.push_back(d);
        return out;
    };
    struct Frame {
        CellAddress node;
        std::vector<CellAddress> deps;
        size_t next = 0;
    };
    for (const auto& root : formulas) {
        if (index.count(root)) continue;
        std::vector<Frame> frames;
        frames.push_back({root, formula_deps(root), 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        onstack[root] = true;
        while (!frames.empty()) {
            Frame& fr = frames.back();
            if (fr.next < fr.deps.size()) {
                CellAddress child = fr.deps[fr.next++];
                if (!index.count(child)) {
                    index[child] = low[child] = counter++;
                    stack.push_back(child);
                    onstack[child] = true;
                    frames.push_back({child, formula_deps(child), 0});
                } else if (onstack[child]) {
                    low[fr.node] = std::min(low[fr.node], index[child]);
                }
            } else {
                CellAddress done = fr.node;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().node] = std::min(low[frames.back().node], low[done]);
                if (low[done] == index[done]) {
                    std::vector<CellAddress> scc;
                    for (;;) {
                        CellAddress w = stack.back();
                        stack.pop_back();
                        onstack[w] = false;
                        scc.push_back(w);
                        if (w == done) break;
                    }
                    bool self_loop = false;
                    if (scc.size() == 1) {
                        for (const auto& d : g.edges.at(scc[0]))
                            if (d == scc[0]) self_loop = true;
                    }
                    if (scc.size() > 1 || self_loop) {
                        std::sort(scc.begin(), scc.end());
                        g.cycles.push_back(std::move(scc));
                    }
                }
            }
        }
    }
    std::sort(g.cycles.begin(), g.cycles.end());
    return g;
}

inline ValueGrid evaluate(const Workbook& wb) {
    Evaluator ev(wb);
    ValueGrid grid;
    std::map<CellAddress, const Formula*> formulas;
    for (const auto& sheet : wb.sheets)
        for (const auto& [key, cell] : sheet.cells) {
            CellAddress at{sheet.name, key.second, key.first};
            if (cell.is_formula())
                formulas[at] = &cell.formula();
            else
                grid[at] = cell.literal();
        }

    DependencyGraph g = build_graph(wb);
    std::set<CellAddress> in_cycle;
    for (const auto& scc : g.cycles)
        for (const auto& a : scc) in_cycle.insert(a);
    for (const auto& a : in_cycle) grid[a] = Value::error(ErrorKind::CYCLE);

    // Kahn over formula->formula edges, cycle members pre-valued
    std::map<CellAddress, std::vector<CellAddress>> dependents;
    std::map<CellAddress, int> indegree;
    for (const auto& [at, fm] : formulas) {
        (void)fm;
        if (in_cycle.count(at)) continue;
        int deg = 0;
        std::vector<CellAddress> deps;
        detail::collect_refs(wb, at, formulas.at(at)->ast, deps, true);
        std::sort(deps.begin(), deps.end());
        deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
        for (const auto& d : deps) {
            if (!formulas.count(d) || in_cycle.count(d)) continue;
            dependents[d].push_back(at);
            ++deg;
        }
        indegree[at] = deg;
    }
    std::deque<CellAddress> ready;
    for (const auto& [at, deg] : indegree)
        if (deg == 0) ready.push_back(at);
    auto lookup = [&grid](const CellAddress& a) {
        auto it = grid.find(a);
        return it == grid.end() ? Value::blank() : it->second;
    };
    while (!ready.empty()) {
        CellAddress at = ready.front();
        ready.pop_front();
        grid[at] = ev.eval_formula(at, formulas.at(at)->ast, lookup);
        auto dit = dependents.find(at);
        if (dit != dependents.end())
            for (const auto& d : dit->second)
                if (--indegree[d] == 0) ready.push_back(d);
    }
    return grid;
}

inline Value evaluate_cell(const Workbook& wb, const CellAddress& addr) {
    ValueGrid grid = evaluate(wb);
    auto it = grid.find(addr);
    return it == grid.end() ? Value::blank() : it->second;
}

}  // namespace gridbook
