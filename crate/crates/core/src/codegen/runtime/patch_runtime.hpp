// Runtime support for C++ code generated from Patch programs.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace patch {

const int64_t LOOP_BUDGET = 1000000;
const int MAX_DEPTH = 100;

struct Error {
    std::string kind;
    std::string message;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message = "") {
    throw Error{kind, message};
}

enum class K { Unset, Bool, Int, Real, Str, List, Set, Tuple };

struct Value {
    K k = K::Unset;
    bool b = false;
    int64_t i = 0;
    double r = 0.0;
    std::string s;
    std::vector<Value> items;
    std::vector<std::string> names;

    static Value boolean(bool x) { Value v; v.k = K::Bool; v.b = x; return v; }
    static Value integer(int64_t x) { Value v; v.k = K::Int; v.i = x; return v; }
    static Value real(double x) { Value v; v.k = K::Real; v.r = x; return v; }
    static Value str(std::string x) { Value v; v.k = K::Str; v.s = std::move(x); return v; }
    static Value list(std::vector<Value> xs) { Value v; v.k = K::List; v.items = std::move(xs); return v; }
    static Value set(std::vector<Value> xs);
    static Value tuple(std::vector<std::string> ns, std::vector<Value> xs) {
        Value v; v.k = K::Tuple; v.names = std::move(ns); v.items = std::move(xs); return v;
    }
};

using Outputs = std::map<std::string, Value>;

inline int rank(const Value& v) {
    switch (v.k) {
    case K::Bool: return 0;
    case K::Int: case K::Real: return 1;
    case K::Str: return 2;
    case K::List: return 3;
    case K::Set: return 4;
    default: return 5;
    }
}

inline const char* type_name(const Value& v) {
    switch (v.k) {
    case K::Bool: return "boolean";
    case K::Int: return "integer";
    case K::Real: return "real";
    case K::Str: return "string";
    case K::List: return "list";
    case K::Set: return "set";
    case K::Tuple: return "tuple";
    default: return "unset";
    }
}

inline double as_f64(const Value& v) { return v.k == K::Int ? (double)v.i : v.r; }

template <class T> int sign3(const T& a, const T& b) { return (a > b) - (a < b); }

inline int num_cmp(const Value& a, const Value& b) {
    if (a.k == K::Int && b.k == K::Int) return sign3(a.i, b.i);
    return sign3(as_f64(a), as_f64(b));
}

int ccmp(const Value& a, const Value& b);

inline int seq_cmp(const std::vector<Value>& x, const std::vector<Value>& y) {
    size_t n = std::min(x.size(), y.size());
    for (size_t k = 0; k < n; ++k) {
        int c = ccmp(x[k], y[k]);
        if (c) return c;
    }
    return sign3(x.size(), y.size());
}

inline int ccmp(const Value& a, const Value& b) {
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return sign3(ra, rb);
    switch (ra) {
    case 0: return sign3((int)a.b, (int)b.b);
    case 1: return num_cmp(a, b);
    case 2: return sign3(a.s.compare(b.s), 0);
    default: return seq_cmp(a.items, b.items);
    }
}

inline bool equal(const Value& a, const Value& b) { return rank(a) == rank(b) && ccmp(a, b) == 0; }

inline Value Value::set(std::vector<Value> xs) {
    std::stable_sort(xs.begin(), xs.end(), [](const Value& a, const Value& b) { return ccmp(a, b) < 0; });
    std::vector<Value> out;
    for (auto& x : xs)
        if (out.empty() || ccmp(out.back(), x) != 0) out.push_back(std::move(x));
    Value v;
    v.k = K::Set;
    v.items = std::move(out);
    return v;
}

// Arithmetic

[[noreturn]] inline void mismatch(const char* op, const Value& a, const Value& b) {
    fail("type-mismatch", std::string("operator ") + op + " does not apply to " + type_name(a) + " and " + type_name(b));
}

[[noreturn]] inline void mismatch1(const char* op, const Value& a) {
    fail("type-mismatch", std::string("operator ") + op + " does not apply to " + type_name(a));
}

inline Value finite(double x) {
    if (!std::isfinite(x)) fail("arith-overflow");
    return Value::real(x);
}

inline void numbers(const char* op, const Value& a, const Value& b) {
    if (rank(a) != 1 || rank(b) != 1) mismatch(op, a, b);
}

inline Value add(const Value& a, const Value& b) {
    if (a.k == K::Int && b.k == K::Int) {
        int64_t r;
        if (__builtin_add_overflow(a.i, b.i, &r)) fail("arith-overflow");
        return Value::integer(r);
    }
    numbers("+", a, b);
    return finite(as_f64(a) + as_f64(b));
}

inline Value sub(const Value& a, const Value& b) {
    if (a.k == K::Int && b.k == K::Int) {
        int64_t r;
        if (__builtin_sub_overflow(a.i, b.i, &r)) fail("arith-overflow");
        return Value::integer(r);
    }
    numbers("-", a, b);
    return finite(as_f64(a) - as_f64(b));
}

inline Value mul(const Value& a, const Value& b) {
    if (a.k == K::Int && b.k == K::Int) {
        int64_t r;
        if (__builtin_mul_overflow(a.i, b.i, &r)) fail("arith-overflow");
        return Value::integer(r);
    }
    numbers("*", a, b);
    return finite(as_f64(a) * as_f64(b));
}

inline Value div(const Value& a, const Value& b) {
    numbers("/", a, b);
    double y = as_f64(b);
    if (y == 0.0) fail("division-by-zero");
    return finite(as_f64(a) / y);
}

inline Value pow(const Value& a, const Value& b) {
    numbers("^", a, b);
    return finite(std::pow(as_f64(a), as_f64(b)));
}

inline Value neg(const Value& a) {
    if (a.k == K::Int) {
        if (a.i == INT64_MIN) fail("arith-overflow");
        return Value::integer(-a.i);
    }
    if (a.k == K::Real) return Value::real(-a.r);
    mismatch1("-", a);
}

inline Value not_(const Value& a) {
    if (a.k != K::Bool) mismatch1("NOT", a);
    return Value::boolean(!a.b);
}

inline Value len(const Value& a) {
    if (a.k != K::List && a.k != K::Set) mismatch1("LEN", a);
    return Value::integer((int64_t)a.items.size());
}

inline int ordered(const char* op, const Value& a, const Value& b) {
    int ra = rank(a), rb = rank(b);
    if (ra == rb && (ra == 0 || ra == 2)) return ccmp(a, b);
    if (ra == 1 && rb == 1) return num_cmp(a, b);
    mismatch(op, a, b);
}

inline Value lt(const Value& a, const Value& b) { return Value::boolean(ordered("<", a, b) < 0); }
inline Value gt(const Value& a, const Value& b) { return Value::boolean(ordered(">", a, b) > 0); }
inline Value le(const Value& a, const Value& b) { return Value::boolean(ordered("<=", a, b) <= 0); }
inline Value ge(const Value& a, const Value& b) { return Value::boolean(ordered(">=", a, b) >= 0); }

inline Value eq(const Value& a, const Value& b) {
    int ra = rank(a), rb = rank(b);
    if (ra != rb) mismatch("=", a, b);
    return Value::boolean(equal(a, b));
}

template <class F> Value and_(const Value& a, F rest) {
    if (a.k != K::Bool) mismatch("AND", a, Value::boolean(true));
    if (!a.b) return a;
    Value b = rest();
    if (b.k != K::Bool) mismatch("AND", a, b);
    return b;
}

template <class F> Value or_(const Value& a, F rest) {
    if (a.k != K::Bool) mismatch("OR", a, Value::boolean(true));
    if (a.b) return a;
    Value b = rest();
    if (b.k != K::Bool) mismatch("OR", a, b);
    return b;
}

inline Value in(const Value& a, const Value& b) {
    if (b.k != K::Set) mismatch("IN", a, b);
    for (auto& x : b.items)
        if (equal(a, x)) return Value::boolean(true);
    return Value::boolean(false);
}

inline void sets(const char* op, const Value& a, const Value& b) {
    if (a.k != K::Set || b.k != K::Set) mismatch(op, a, b);
}

inline bool member(const Value& x, const Value& s) {
    for (auto& y : s.items)
        if (equal(x, y)) return true;
    return false;
}

inline Value union_(const Value& a, const Value& b) {
    sets("UNION", a, b);
    std::vector<Value> xs = a.items;
    xs.insert(xs.end(), b.items.begin(), b.items.end());
    return Value::set(std::move(xs));
}

inline Value intersect(const Value& a, const Value& b) {
    sets("INTERSECT", a, b);
    std::vector<Value> xs;
    for (auto& x : a.items)
        if (member(x, b)) xs.push_back(x);
    return Value::set(std::move(xs));
}

inline Value except(const Value& a, const Value& b) {
    sets("EXCEPT", a, b);
    std::vector<Value> xs;
    for (auto& x : a.items)
        if (!member(x, b)) xs.push_back(x);
    return Value::set(std::move(xs));
}

inline Value cross(const Value& a, const Value& b) {
    sets("CROSS", a, b);
    std::vector<Value> xs;
    for (auto& p : a.items)
        for (auto& q : b.items) xs.push_back(Value::tuple({"first", "second"}, {p, q}));
    return Value::set(std::move(xs));
}

inline bool cond(const Value& v) {
    if (v.k != K::Bool) fail("type-mismatch", "condition must be boolean");
    return v.b;
}

inline int64_t as_int(const Value& v) {
    if (v.k != K::Int) fail("type-mismatch", "expected an integer");
    return v.i;
}

inline const std::vector<Value>& items_of(const Value& v) {
    if (v.k != K::List) fail("type-mismatch", "a sentinel loop needs a list");
    return v.items;
}

// Access

inline const Value& get(const Value& v, const char* name) {
    if (v.k == K::Unset) fail("unbound-variable", std::string(name) + " has no value yet");
    return v;
}

inline size_t position(const Value& c, const Value& i) {
    if (c.k != K::List && c.k != K::Tuple) fail("not-indexable");
    if (i.k != K::Int) fail("type-mismatch", "index must be an integer");
    if (i.i < 0 || (uint64_t)i.i >= c.items.size()) fail("index-out-of-range");
    return (size_t)i.i;
}

// `i` is already shifted to a 0-based position.
inline Value at(const Value& c, const Value& i) { return c.items[position(c, i)]; }

// Operands gathered in a braced list are evaluated left to right, which a
// plain argument list does not promise.
struct Both {
    Value a, b;
};
#define PATCH_BOTH(f) \
    inline Value f(const Both& o) { return f(o.a, o.b); }
PATCH_BOTH(add) PATCH_BOTH(sub) PATCH_BOTH(mul) PATCH_BOTH(div) PATCH_BOTH(pow)
PATCH_BOTH(lt) PATCH_BOTH(gt) PATCH_BOTH(le) PATCH_BOTH(ge) PATCH_BOTH(eq) PATCH_BOTH(in)
PATCH_BOTH(union_) PATCH_BOTH(intersect) PATCH_BOTH(except) PATCH_BOTH(cross) PATCH_BOTH(at)
#undef PATCH_BOTH

inline size_t field_pos(const Value& c, const std::string& name) {
    if (c.k != K::Tuple) fail("type-mismatch", "field access");
    for (size_t k = 0; k < c.names.size(); ++k)
        if (c.names[k] == name) return k;
    fail("no-such-field", name);
}

inline Value fld(const Value& c, const std::string& name) { return c.items[field_pos(c, name)]; }

struct Acc {
    bool field;
    Value index;
    std::string name;
};

inline Acc IX(Value i) { return Acc{false, std::move(i), ""}; }
inline Acc FLD(std::string n) { return Acc{true, Value(), std::move(n)}; }

inline void put(Value& root, const char* name, const std::vector<Acc>& path, Value v) {
    get(root, name);
    Value* cur = &root;
    for (auto& a : path) {
        size_t k = a.field ? field_pos(*cur, a.name) : position(*cur, a.index);
        cur = &cur->items[k];
    }
    *cur = std::move(v);
}

inline Value read(const Value& root, const char* name, const std::vector<Acc>& path) {
    const Value* cur = &get(root, name);
    for (auto& a : path) {
        size_t k = a.field ? field_pos(*cur, a.name) : position(*cur, a.index);
        cur = &cur->items[k];
    }
    return *cur;
}

inline Value to_int(Value v) {
    if (v.k != K::Real) return v;
    double t = std::trunc(v.r);
    if (!(std::isfinite(t) && t >= -9223372036854775808.0 && t < 9223372036854775808.0)) fail("arith-overflow");
    return Value::integer((int64_t)t);
}

inline Value to_real(Value v) {
    if (v.k != K::Int) return v;
    return Value::real((double)v.i);
}

inline Value out(const Outputs& o, const std::string& name) {
    auto it = o.find(name);
    if (it == o.end() || it->second.k == K::Unset) fail("unbound-variable", "output " + name + " was never set");
    return it->second;
}

// Rendering

inline std::string render_real(double x) {
    if (x == 0.0) return std::signbit(x) ? "-0.0" : "0.0";
    std::string sign = x < 0 ? "-" : "";
    double a = std::fabs(x);
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, a, std::chars_format::scientific);
    std::string t(buf, res.ptr);
    size_t e = t.find('e');
    std::string mant = t.substr(0, e);
    int exp10 = std::atoi(t.c_str() + e + 1);
    std::string ds;
    for (char c : mant)
        if (c != '.') ds.push_back(c);
    while (ds.size() > 1 && ds.back() == '0') ds.pop_back();
    if (a < 1e-4 || a >= 1e16) {
        std::string body = ds.substr(0, 1);
        if (ds.size() > 1) body += "." + ds.substr(1);
        return sign + body + "e" + std::to_string(exp10);
    }
    int n = exp10 + 1;  // digits before the point
    if (n >= (int)ds.size()) return sign + ds + std::string(n - ds.size(), '0') + ".0";
    if (n > 0) return sign + ds.substr(0, n) + "." + ds.substr(n);
    return sign + "0." + std::string(-n, '0') + ds;
}

inline std::string render_string(const std::string& s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (c < 0x20 || c == 0x7f) {
                char b[8];
                std::snprintf(b, sizeof b, "\\u%04x", c);
                out += b;
            } else {
                out.push_back((char)c);
            }
        }
    }
    return out + "\"";
}

inline std::string render(const Value& v) {
    switch (v.k) {
    case K::Bool: return v.b ? "TRUE" : "FALSE";
    case K::Int: return std::to_string(v.i);
    case K::Real: return render_real(v.r);
    case K::Str: return render_string(v.s);
    case K::Unset: return "?";
    default: break;
    }
    const char* open = v.k == K::List ? "[" : v.k == K::Set ? "{" : "<";
    const char* close = v.k == K::List ? "]" : v.k == K::Set ? "}" : ">";
    std::string out = open;
    for (size_t k = 0; k < v.items.size(); ++k) {
        if (k) out += ", ";
        out += render(v.items[k]);
    }
    return out + close;
}

// Reading

struct Type {
    std::string k;
    std::vector<Type> sub;
    std::vector<std::string> names;
};

inline Type T_INT() { return Type{"integer", {}, {}}; }
inline Type T_REAL() { return Type{"real", {}, {}}; }
inline Type T_BOOL() { return Type{"boolean", {}, {}}; }
inline Type T_STR() { return Type{"string", {}, {}}; }
inline Type T_UNKNOWN() { return Type{"unknown", {}, {}}; }
inline Type T_LIST(Type e) { return Type{"list", {std::move(e)}, {}}; }
inline Type T_SET(Type e) { return Type{"set", {std::move(e)}, {}}; }
inline Type T_TUPLE(std::vector<std::string> ns, std::vector<Type> ts) { return Type{"tuple", std::move(ts), std::move(ns)}; }

struct Reader {
    const std::string& s;
    size_t i = 0;

    [[noreturn]] void bad(const std::string& m) { fail("literal-syntax-error", m); }

    void ws() {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r' || s[i] == '\f' || s[i] == '\v')) ++i;
    }

    bool eat(char c) {
        ws();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }

    static bool alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool digit(char c) { return c >= '0' && c <= '9'; }

    std::string word() {
        ws();
        size_t j = i;
        if (j < s.size() && alpha(s[j])) {
            ++j;
            while (j < s.size() && (alpha(s[j]) || digit(s[j]))) ++j;
        }
        std::string w = s.substr(i, j - i);
        i = j;
        return w;
    }

    Value value() {
        ws();
        if (i >= s.size()) bad("expected a value");
        char c = s[i];
        if (c == '"') return Value::str(string());
        if (c == '[' || c == '{') {
            ++i;
            char close = c == '[' ? ']' : '}';
            std::vector<Value> xs;
            if (!eat(close)) {
                for (;;) {
                    xs.push_back(value());
                    if (eat(close)) break;
                    if (!eat(',')) bad("expected , or close");
                }
            }
            return c == '[' ? Value::list(std::move(xs)) : Value::set(std::move(xs));
        }
        if (c == '<') {
            ++i;
            std::vector<std::string> ns;
            std::vector<Value> xs;
            if (!eat('>')) {
                for (;;) {
                    size_t save = i;
                    std::string w = word();
                    if (w.empty() || !eat(':')) {
                        i = save;
                        w = "f" + std::to_string(xs.size() + 1);
                    }
                    for (auto& ch : w) ch = (char)std::tolower((unsigned char)ch);
                    ns.push_back(w);
                    xs.push_back(value());
                    if (eat('>')) break;
                    if (!eat(',')) bad("expected , or >");
                }
            }
            return Value::tuple(std::move(ns), std::move(xs));
        }
        if (digit(c) || c == '-' || c == '+') return number();
        std::string w = word();
        for (auto& ch : w) ch = (char)std::toupper((unsigned char)ch);
        if (w == "TRUE") return Value::boolean(true);
        if (w == "FALSE") return Value::boolean(false);
        bad("expected a value");
    }

    Value number() {
        size_t j = i;
        if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
        size_t d0 = j;
        while (j < s.size() && digit(s[j])) ++j;
        if (j == d0) bad("expected digits");
        bool real = false;
        if (j + 1 < s.size() && s[j] == '.' && digit(s[j + 1])) {
            real = true;
            ++j;
            while (j < s.size() && digit(s[j])) ++j;
        }
        if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
            size_t k = j + 1;
            if (k < s.size() && (s[k] == '-' || s[k] == '+')) ++k;
            if (k < s.size() && digit(s[k])) {
                real = true;
                while (k < s.size() && digit(s[k])) ++k;
                j = k;
            }
        }
        std::string tok = s.substr(i, j - i);
        i = j;
        if (real) {
            double x = std::strtod(tok.c_str(), nullptr);
            if (!std::isfinite(x)) bad("real out of range");
            return Value::real(x);
        }
        const char* p = tok.c_str();
        if (*p == '+') ++p;
        int64_t n = 0;
        auto res = std::from_chars(p, tok.c_str() + tok.size(), n);
        if (res.ec != std::errc() || res.ptr != tok.c_str() + tok.size()) bad("integer out of range");
        return Value::integer(n);
    }

    static void utf8(std::string& out, unsigned cp) {
        if (cp < 0x80) {
            out.push_back((char)cp);
        } else if (cp < 0x800) {
            out.push_back((char)(0xC0 | (cp >> 6)));
            out.push_back((char)(0x80 | (cp & 0x3F)));
        } else {
            out.push_back((char)(0xE0 | (cp >> 12)));
            out.push_back((char)(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back((char)(0x80 | (cp & 0x3F)));
        }
    }

    std::string string() {
        ++i;
        std::string out;
        for (;;) {
            if (i >= s.size()) bad("unterminated string");
            char c = s[i++];
            if (c == '"') return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (i >= s.size()) bad("unterminated escape");
            char e = s[i++];
            switch (e) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            case 'u': {
                if (i + 4 > s.size()) bad("bad escape");
                unsigned cp = 0;
                for (int k = 0; k < 4; ++k) {
                    char h = s[i + k];
                    cp <<= 4;
                    if (h >= '0' && h <= '9') cp |= h - '0';
                    else if (h >= 'a' && h <= 'f') cp |= h - 'a' + 10;
                    else if (h >= 'A' && h <= 'F') cp |= h - 'A' + 10;
                    else bad("bad escape");
                }
                if (cp >= 0xD800 && cp < 0xE000) bad("bad escape");
                i += 4;
                utf8(out, cp);
                break;
            }
            default: bad("unknown escape");
            }
        }
    }
};

inline Value conform(const Value& v, const Type& t) {
    auto bad = [&]() { fail("literal-syntax-error", "expected a " + t.k + " value"); };
    if (t.k == "unknown") return v;
    if (t.k == "real") {
        if (v.k == K::Int) return Value::real((double)v.i);
        if (v.k != K::Real) bad();
        return v;
    }
    if (t.k == "integer") { if (v.k != K::Int) bad(); return v; }
    if (t.k == "boolean") { if (v.k != K::Bool) bad(); return v; }
    if (t.k == "string") { if (v.k != K::Str) bad(); return v; }
    if (t.k == "list" || t.k == "set") {
        if (v.k != (t.k == "list" ? K::List : K::Set)) bad();
        std::vector<Value> xs;
        for (auto& x : v.items) xs.push_back(conform(x, t.sub[0]));
        return t.k == "list" ? Value::list(std::move(xs)) : Value::set(std::move(xs));
    }
    if (v.k != K::Tuple || v.items.size() != t.sub.size()) bad();
    std::vector<Value> xs;
    for (size_t k = 0; k < v.items.size(); ++k) {
        if (v.names[k] != t.names[k] && v.names[k] != "f" + std::to_string(k + 1)) bad();
        xs.push_back(conform(v.items[k], t.sub[k]));
    }
    return Value::tuple(t.names, std::move(xs));
}

inline Value parse_value(const std::string& text, const Type& t) {
    Reader r{text};
    Value v = r.value();
    r.ws();
    if (r.i != text.size()) r.bad("trailing text after value");
    return conform(v, t);
}

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

// Execution context

struct Ctx {
    std::deque<std::string> lines;
    std::vector<std::string>* out;
    std::map<std::pair<std::string, std::string>, Value> repo;
    int64_t ticks = 0;

    void tick() {
        if (++ticks > LOOP_BUDGET) fail("budget-exceeded");
    }

    std::string read_line(const char* name) {
        if (lines.empty()) fail("console-exhausted", std::string("no input left for ") + name);
        std::string l = trim(lines.front());
        lines.pop_front();
        return l;
    }

    void display(const Value& v) { out->push_back("display " + render(v)); }

    void repo_put(const char* module, const char* name, Value v) { repo[{module, name}] = std::move(v); }

    Value repo_get(const char* module, const char* name) {
        auto it = repo.find({module, name});
        if (it == repo.end()) fail("repository-missing", name);
        return it->second;
    }
};

struct Program {
    std::function<Outputs(Ctx&, int, std::vector<Value>&)> entry;
    std::vector<Type> inputs;
    std::vector<std::string> outputs;
};

// Reads `#run <program> <line-count>` blocks from stdin and answers each
// with `#run`, the displayed values, outputs or error, and `#end`.
inline int serve(const std::vector<Program>& programs) {
    std::ios::sync_with_stdio(false);
    std::vector<std::string> data;
    std::string line;
    while (std::getline(std::cin, line)) data.push_back(line);
    std::vector<std::string> buf;
    size_t pos = 0;
    while (pos < data.size()) {
        std::string head = data[pos++];
        if (trim(head).empty()) continue;
        unsigned which = 0, count = 0;
        std::sscanf(head.c_str(), "#run %u %u", &which, &count);
        std::vector<std::string> lines;
        for (unsigned k = 0; k < count && pos < data.size(); ++k) lines.push_back(data[pos++]);
        buf.push_back("#run");
        const Program& p = programs.at(which);
        Ctx ctx;
        ctx.out = &buf;
        try {
            if (lines.size() < p.inputs.size()) fail("console-exhausted", "missing caller inputs");
            std::vector<Value> args;
            for (size_t k = 0; k < p.inputs.size(); ++k) args.push_back(parse_value(trim(lines[k]), p.inputs[k]));
            for (size_t k = p.inputs.size(); k < lines.size(); ++k) ctx.lines.push_back(lines[k]);
            Outputs o = p.entry(ctx, 0, args);
            std::vector<std::string> shown;
            for (auto& name : p.outputs) shown.push_back("output " + name + " " + render(out(o, name)));
            buf.insert(buf.end(), shown.begin(), shown.end());
        } catch (const Error& e) {
            buf.push_back("error " + e.kind);
        }
        buf.push_back("#end");
    }
    std::string text;
    for (auto& l : buf) text += l + "\n";
    std::fwrite(text.data(), 1, text.size(), stdout);
    return 0;
}

}  // namespace patch
