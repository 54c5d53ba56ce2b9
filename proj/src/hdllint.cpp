// Structural consistency pass over generated VHDL. This is not a VHDL
// parser: it understands the subset the generator emits (entity headers,
// signal and integer constant declarations, for-generate indices and
// direct entity instantiations) and checks every instantiation against the
// declaration it names.

#include <cctype>
#include <map>
#include <optional>
#include <set>

#include "snnforge/hdlgen.hpp"

namespace snnforge::hdl {

namespace {

enum class Tok { Ident, Number, String, Char, Symbol };

struct Token {
    Tok kind;
    std::string text; // identifiers lowercased
    std::size_t line;
};

std::vector<Token> tokenize(const std::string& src) {
    std::vector<Token> out;
    std::size_t line = 1;
    for (std::size_t i = 0; i < src.size();) {
        const char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
            while (i < src.size() && src[i] != '\n') ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            std::string id = src.substr(i, j - i);
            for (char& ch : id) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            out.push_back({Tok::Ident, id, line});
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            out.push_back({Tok::Number, src.substr(i, j - i), line});
            i = j;
        } else if (c == '"') {
            const std::size_t j = src.find('"', i + 1);
            const std::size_t end = j == std::string::npos ? src.size() : j;
            out.push_back({Tok::String, src.substr(i + 1, end - i - 1), line});
            i = end + 1;
        } else if (c == '\'' && i + 2 < src.size() && src[i + 2] == '\'' &&
                   (out.empty() || out.back().kind != Tok::Ident)) {
            out.push_back({Tok::Char, src.substr(i + 1, 1), line});
            i += 3;
        } else {
            static const char* pairs[] = {"=>", ":=", "<=", ">=", "/=", "**"};
            std::string sym(1, c);
            for (const char* p : pairs) {
                if (src.compare(i, 2, p) == 0) sym = p;
            }
            out.push_back({Tok::Symbol, sym, line});
            i += sym.size();
        }
    }
    return out;
}

using Env = std::map<std::string, std::int64_t>;
using Span = std::vector<Token>;

// Integer expression over + - * / ** and parentheses.
class Eval {
public:
    Eval(const Span& t, const Env& env) : t_(t), env_(env) {}

    std::optional<std::int64_t> run() {
        auto v = sum();
        if (!v || pos_ != t_.size()) return std::nullopt;
        return v;
    }

private:
    bool at(const char* s) const { return pos_ < t_.size() && t_[pos_].kind == Tok::Symbol && t_[pos_].text == s; }

    std::optional<std::int64_t> sum() {
        auto v = product();
        while (v && (at("+") || at("-"))) {
            const bool plus = t_[pos_++].text == "+";
            const auto r = product();
            if (!r) return std::nullopt;
            v = plus ? *v + *r : *v - *r;
        }
        return v;
    }

    std::optional<std::int64_t> product() {
        auto v = power();
        while (v && (at("*") || at("/"))) {
            const bool mul = t_[pos_++].text == "*";
            const auto r = power();
            if (!r || (!mul && *r == 0)) return std::nullopt;
            v = mul ? *v * *r : *v / *r;
        }
        return v;
    }

    std::optional<std::int64_t> power() {
        auto v = unary();
        if (v && at("**")) {
            ++pos_;
            const auto r = unary();
            if (!r || *r < 0 || *r > 62) return std::nullopt;
            std::int64_t p = 1;
            for (std::int64_t k = 0; k < *r; ++k) p *= *v;
            v = p;
        }
        return v;
    }

    std::optional<std::int64_t> unary() {
        if (at("-")) {
            ++pos_;
            const auto v = unary();
            return v ? std::optional<std::int64_t>(-*v) : std::nullopt;
        }
        if (at("(")) {
            ++pos_;
            const auto v = sum();
            if (!at(")")) return std::nullopt;
            ++pos_;
            return v;
        }
        if (pos_ >= t_.size()) return std::nullopt;
        const Token& tok = t_[pos_++];
        if (tok.kind == Tok::Number) return std::stoll(tok.text);
        if (tok.kind == Tok::Ident) {
            const auto it = env_.find(tok.text);
            if (it != env_.end()) return it->second;
        }
        return std::nullopt;
    }

    const Span& t_;
    const Env& env_;
    std::size_t pos_ = 0;
};

std::optional<std::int64_t> evaluate(const Span& t, const Env& env) { return Eval(t, env).run(); }

struct TypeDecl {
    std::string kind;
    Span left, right; // range bounds, empty for scalar types
    bool ranged() const { return !left.empty(); }
};

bool is_vector_kind(const std::string& k) {
    return k == "std_logic_vector" || k == "signed" || k == "unsigned" || k == "bit_vector";
}

struct Resolved {
    std::string kind;
    std::optional<std::int64_t> width; // nullopt for scalars
};

std::optional<Resolved> resolve(const TypeDecl& t, const Env& env) {
    if (!t.ranged()) return Resolved{t.kind, std::nullopt};
    const auto a = evaluate(t.left, env), b = evaluate(t.right, env);
    if (!a || !b) return std::nullopt;
    return Resolved{t.kind, (*a > *b ? *a - *b : *b - *a) + 1};
}

std::string describe(const Resolved& r) {
    return r.width ? r.kind + "(" + std::to_string(*r.width) + ")" : r.kind;
}

struct Decl {
    std::string name;
    std::string mode; // ports only
    TypeDecl type;
    bool has_default = false;
};

struct Entity {
    std::string unit;
    std::vector<Decl> generics;
    std::vector<Decl> ports;

    const Decl* port(const std::string& n) const {
        for (const auto& p : ports) {
            if (p.name == n) return &p;
        }
        return nullptr;
    }
    const Decl* generic(const std::string& n) const {
        for (const auto& g : generics) {
            if (g.name == n) return &g;
        }
        return nullptr;
    }
};

struct Assoc {
    std::string formal;
    Span actual;
};

struct Instance {
    std::string label;
    std::string entity;
    std::vector<Assoc> generics;
    std::vector<Assoc> ports;
    Env env; // constants and generate indices visible at the instantiation
    std::size_t line;
};

struct Architecture {
    std::string unit;
    std::string entity;
    std::map<std::string, TypeDecl> signals;
    Env constants;
    std::vector<Instance> instances;
};

class Parser {
public:
    Parser(const std::string& unit, std::vector<Token> toks, std::vector<std::string>& problems)
        : unit_(unit), t_(std::move(toks)), problems_(problems) {}

    void run(std::map<std::string, Entity>& entities, std::vector<Architecture>& archs, std::set<std::string>& mems) {
        Architecture* arch = nullptr;
        Env gen;
        for (const Token& tok : t_) {
            if (tok.kind == Tok::String && tok.text.ends_with(".mem")) mems.insert(tok.text);
        }
        while (pos_ < t_.size()) {
            const Token& tok = t_[pos_];
            if (is("entity") && peek_kind(1, Tok::Ident) && peek_is(2, "is")) {
                const std::string name = t_[pos_ + 1].text;
                pos_ += 3;
                Entity e{unit_, {}, {}};
                if (is("generic")) {
                    ++pos_;
                    e.generics = decl_list(false);
                }
                if (is("port")) {
                    ++pos_;
                    e.ports = decl_list(true);
                }
                if (entities.contains(name)) problem("entity " + name + " declared twice");
                entities[name] = std::move(e);
            } else if (is("architecture") && peek_is(2, "of") && peek_is(4, "is")) {
                archs.push_back({unit_, t_[pos_ + 3].text, {}, {}, {}});
                arch = &archs.back();
                gen.clear();
                pos_ += 5;
            } else if (arch && is("signal")) {
                ++pos_;
                std::vector<std::string> names = name_list();
                const TypeDecl type = type_decl();
                for (const auto& n : names) arch->signals[n] = type;
                skip_past(";");
            } else if (arch && is("constant") && peek_kind(1, Tok::Ident) && peek_is(2, ":")) {
                const std::string name = t_[pos_ + 1].text;
                pos_ += 3;
                const std::string type = pos_ < t_.size() ? t_[pos_].text : "";
                const std::size_t semi = find(";");
                if ((type == "natural" || type == "integer" || type == "positive") && pos_ + 2 < semi &&
                    t_[pos_ + 1].text == ":=") {
                    const Span expr(t_.begin() + static_cast<std::ptrdiff_t>(pos_ + 2),
                                    t_.begin() + static_cast<std::ptrdiff_t>(semi));
                    Env env = arch->constants;
                    if (const auto v = evaluate(expr, env)) arch->constants[name] = *v;
                }
                pos_ = semi + 1;
            } else if (arch && tok.kind == Tok::Ident && peek_is(1, ":") && peek_is(2, "for") &&
                       peek_kind(3, Tok::Ident) && peek_is(4, "in")) {
                // label : for i in a to b generate
                const std::string var = t_[pos_ + 3].text;
                pos_ += 5;
                const std::size_t to = find("to");
                const std::size_t g = find("generate");
                if (to < g && g < t_.size()) {
                    const Span lo(t_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  t_.begin() + static_cast<std::ptrdiff_t>(to));
                    Env env = arch->constants;
                    if (const auto v = evaluate(lo, env)) gen[var] = *v;
                }
            } else if (arch && tok.kind == Tok::Ident && peek_is(1, ":") && peek_is(2, "entity") &&
                       peek_is(3, "work") && peek_is(4, ".") && peek_kind(5, Tok::Ident)) {
                Env env = arch->constants;
                for (const auto& [k, v] : gen) env[k] = v;
                Instance inst{tok.text, t_[pos_ + 5].text, {}, {}, std::move(env), tok.line};
                pos_ += 6;
                if (is("generic") && peek_is(1, "map")) {
                    pos_ += 2;
                    inst.generics = assoc_list();
                }
                if (is("port") && peek_is(1, "map")) {
                    pos_ += 2;
                    inst.ports = assoc_list();
                } else {
                    problem("instance " + inst.label + " has no port map");
                }
                arch->instances.push_back(std::move(inst));
            } else {
                ++pos_;
            }
        }
    }

private:
    bool is(const char* s) const { return pos_ < t_.size() && t_[pos_].text == s && t_[pos_].kind != Tok::String; }
    bool peek_is(std::size_t k, const char* s) const {
        return pos_ + k < t_.size() && t_[pos_ + k].text == s && t_[pos_ + k].kind != Tok::String;
    }
    bool peek_kind(std::size_t k, Tok kind) const { return pos_ + k < t_.size() && t_[pos_ + k].kind == kind; }

    std::size_t find(const char* s) const {
        std::size_t i = pos_;
        while (i < t_.size() && !(t_[i].text == s && t_[i].kind != Tok::String)) ++i;
        return i;
    }
    void skip_past(const char* s) { pos_ = std::min(t_.size(), find(s) + 1); }

    void problem(const std::string& what) {
        const std::size_t line = pos_ < t_.size() ? t_[pos_].line : (t_.empty() ? 0 : t_.back().line);
        problems_.push_back(unit_ + ".vhd:" + std::to_string(line) + ": " + what);
    }

    std::vector<std::string> name_list() {
        std::vector<std::string> names;
        while (pos_ < t_.size() && t_[pos_].kind == Tok::Ident) {
            names.push_back(t_[pos_++].text);
            if (!is(",")) break;
            ++pos_;
        }
        if (is(":")) {
            ++pos_;
        } else {
            problem("expected ':' in declaration");
        }
        return names;
    }

    TypeDecl type_decl() {
        TypeDecl d;
        if (pos_ >= t_.size()) return d;
        d.kind = t_[pos_++].text;
        if (!is("(")) return d;
        ++pos_;
        int depth = 0;
        Span* side = &d.left;
        while (pos_ < t_.size()) {
            const Token& tok = t_[pos_];
            if (tok.kind == Tok::Symbol && tok.text == "(") ++depth;
            if (tok.kind == Tok::Symbol && tok.text == ")") {
                if (depth == 0) break;
                --depth;
            }
            if (depth == 0 && tok.kind == Tok::Ident && (tok.text == "downto" || tok.text == "to")) {
                side = &d.right;
            } else {
                side->push_back(tok);
            }
            ++pos_;
        }
        ++pos_;
        if (d.right.empty()) problem("unsupported range in type " + d.kind);
        return d;
    }

    // ( name : [mode] type [:= default] ; ... ) ;
    std::vector<Decl> decl_list(bool ports) {
        std::vector<Decl> out;
        if (!is("(")) {
            problem("expected '('");
            return out;
        }
        ++pos_;
        while (pos_ < t_.size() && !is(")")) {
            const auto names = name_list();
            std::string mode;
            if (ports && (is("in") || is("out") || is("inout") || is("buffer"))) mode = t_[pos_++].text;
            if (ports && mode.empty()) problem("port without a mode");
            const TypeDecl type = type_decl();
            bool has_default = false;
            int depth = 0;
            while (pos_ < t_.size()) {
                const Token& tok = t_[pos_];
                if (tok.kind == Tok::Symbol && tok.text == "(") ++depth;
                if (tok.kind == Tok::Symbol && tok.text == ")") {
                    if (depth == 0) break;
                    --depth;
                }
                if (depth == 0 && tok.kind == Tok::Symbol && tok.text == ";") break;
                if (tok.kind == Tok::Symbol && tok.text == ":=") has_default = true;
                ++pos_;
            }
            for (const auto& n : names) out.push_back({n, mode, type, has_default});
            if (is(";")) ++pos_;
        }
        skip_past(";");
        return out;
    }

    // ( formal => actual , ... )
    std::vector<Assoc> assoc_list() {
        std::vector<Assoc> out;
        if (!is("(")) {
            problem("expected '(' after map");
            return out;
        }
        ++pos_;
        while (pos_ < t_.size() && !is(")")) {
            Assoc a;
            if (!(peek_kind(0, Tok::Ident) && peek_is(1, "=>"))) {
                problem("positional association is not supported");
                skip_past(")");
                return out;
            }
            a.formal = t_[pos_].text;
            pos_ += 2;
            int depth = 0;
            while (pos_ < t_.size()) {
                const Token& tok = t_[pos_];
                if (tok.kind == Tok::Symbol && tok.text == "(") ++depth;
                if (tok.kind == Tok::Symbol && tok.text == ")") {
                    if (depth == 0) break;
                    --depth;
                }
                if (depth == 0 && tok.kind == Tok::Symbol && tok.text == ",") break;
                a.actual.push_back(tok);
                ++pos_;
            }
            out.push_back(std::move(a));
            if (is(",")) ++pos_;
        }
        ++pos_;
        return out;
    }

    std::string unit_;
    std::vector<Token> t_;
    std::vector<std::string>& problems_;
    std::size_t pos_ = 0;
};

struct Actual {
    bool open = false;
    bool literal = false;
    Resolved type;
};

std::optional<Actual> classify_actual(const Span& a, const Architecture& arch, const Entity* owner, const Env& env,
                                      std::string& why) {
    if (a.size() == 1 && a[0].kind == Tok::Ident && a[0].text == "open") return Actual{true, false, {}};
    if (a.size() == 1 && a[0].kind == Tok::Char) return Actual{false, true, {"std_logic", std::nullopt}};
    if (a.empty() || a[0].kind != Tok::Ident) {
        why = "unsupported actual";
        return std::nullopt;
    }
    const TypeDecl* decl = nullptr;
    if (const auto it = arch.signals.find(a[0].text); it != arch.signals.end()) decl = &it->second;
    if (!decl && owner) {
        if (const Decl* p = owner->port(a[0].text)) decl = &p->type;
    }
    if (!decl) {
        why = "'" + a[0].text + "' is not declared";
        return std::nullopt;
    }
    const auto base = resolve(*decl, env);
    if (!base) {
        why = "cannot evaluate the width of '" + a[0].text + "'";
        return std::nullopt;
    }
    if (a.size() == 1) return Actual{false, false, *base};
    if (a.size() < 4 || a[1].text != "(" || a.back().text != ")") {
        why = "unsupported actual expression";
        return std::nullopt;
    }
    if (!is_vector_kind(base->kind)) {
        why = "'" + a[0].text + "' is not indexable";
        return std::nullopt;
    }
    const Span inner(a.begin() + 2, a.end() - 1);
    Span left, right;
    bool ranged = false;
    for (const Token& tok : inner) {
        if (tok.kind == Tok::Ident && (tok.text == "downto" || tok.text == "to")) {
            ranged = true;
        } else {
            (ranged ? right : left).push_back(tok);
        }
    }
    if (!ranged) {
        if (!evaluate(left, env)) {
            why = "cannot evaluate the index of '" + a[0].text + "'";
            return std::nullopt;
        }
        return Actual{false, false, {base->kind == "bit_vector" ? "bit" : "std_logic", std::nullopt}};
    }
    const auto l = evaluate(left, env), r = evaluate(right, env);
    if (!l || !r) {
        why = "cannot evaluate the slice of '" + a[0].text + "'";
        return std::nullopt;
    }
    return Actual{false, false, {base->kind, (*l > *r ? *l - *r : *r - *l) + 1}};
}

void check_instance(const Instance& inst, const Architecture& arch, const std::map<std::string, Entity>& entities,
                    std::vector<std::string>& problems) {
    const auto where = arch.unit + ".vhd:" + std::to_string(inst.line) + ": " + inst.label + ": ";
    const auto it = entities.find(inst.entity);
    if (it == entities.end()) {
        problems.push_back(where + "entity " + inst.entity + " is not in the bundle");
        return;
    }
    const Entity& e = it->second;
    const auto owner_it = entities.find(arch.entity);
    const Entity* owner = owner_it == entities.end() ? nullptr : &owner_it->second;

    // generic values become the environment for the formal port widths
    Env formal_env;
    std::set<std::string> bound;
    for (const auto& a : inst.generics) {
        const Decl* g = e.generic(a.formal);
        if (!g) {
            problems.push_back(where + "generic " + a.formal + " is not declared by " + inst.entity);
            continue;
        }
        if (!bound.insert(a.formal).second) problems.push_back(where + "generic " + a.formal + " bound twice");
        const Span& v = a.actual;
        if (v.size() == 1 && v[0].kind == Tok::String) {
            const auto r = resolve(g->type, formal_env);
            if (!is_vector_kind(g->type.kind) || !r || !r->width) {
                problems.push_back(where + "generic " + a.formal + " does not take a bit string");
            } else if (static_cast<std::int64_t>(v[0].text.size()) != *r->width ||
                       v[0].text.find_first_not_of("01") != std::string::npos) {
                problems.push_back(where + "generic " + a.formal + " expects " + std::to_string(*r->width) +
                                   " bits, got \"" + v[0].text + "\"");
            }
        } else if (v.size() == 1 && v[0].kind == Tok::Ident && (v[0].text == "true" || v[0].text == "false")) {
            if (g->type.kind != "boolean") problems.push_back(where + "generic " + a.formal + " is not boolean");
        } else {
            const auto n = evaluate(v, formal_env);
            if (!n) {
                problems.push_back(where + "generic " + a.formal + " has an unsupported value");
            } else if (g->type.kind == "natural" && *n < 0) {
                problems.push_back(where + "generic " + a.formal + " must be natural");
            } else if (g->type.kind == "positive" && *n < 1) {
                problems.push_back(where + "generic " + a.formal + " must be positive");
            } else if (g->type.kind != "natural" && g->type.kind != "positive" && g->type.kind != "integer") {
                problems.push_back(where + "generic " + a.formal + " is not an integer");
            } else {
                formal_env[a.formal] = *n;
            }
        }
    }
    for (const auto& g : e.generics) {
        if (!g.has_default && !bound.contains(g.name)) {
            problems.push_back(where + "generic " + g.name + " of " + inst.entity + " is not bound");
        }
    }

    std::set<std::string> mapped;
    for (const auto& a : inst.ports) {
        const Decl* p = e.port(a.formal);
        if (!p) {
            problems.push_back(where + "port " + a.formal + " is not declared by " + inst.entity);
            continue;
        }
        if (!mapped.insert(a.formal).second) problems.push_back(where + "port " + a.formal + " mapped twice");
        std::string why;
        const auto actual = classify_actual(a.actual, arch, owner, inst.env, why);
        if (!actual) {
            problems.push_back(where + "port " + a.formal + ": " + why);
            continue;
        }
        if (actual->open) {
            if (p->mode == "in") problems.push_back(where + "input " + a.formal + " left open");
            continue;
        }
        if (actual->literal && p->mode != "in") {
            problems.push_back(where + "output " + a.formal + " connected to a literal");
            continue;
        }
        const auto formal = resolve(p->type, formal_env);
        if (!formal) {
            problems.push_back(where + "cannot evaluate the width of port " + a.formal);
            continue;
        }
        if (formal->kind != actual->type.kind || formal->width != actual->type.width) {
            problems.push_back(where + "port " + a.formal + " is " + describe(*formal) + " but the actual is " +
                               describe(actual->type));
        }
    }
    for (const auto& p : e.ports) {
        if (p.mode == "in" && !mapped.contains(p.name)) {
            problems.push_back(where + "input " + p.name + " of " + inst.entity + " is not driven");
        }
    }
}

} // namespace

std::vector<std::string> lint(const HdlBundle& bundle) {
    std::vector<std::string> problems;
    std::map<std::string, Entity> entities;
    std::vector<Architecture> archs;
    std::set<std::string> mems;
    for (const auto& [unit, text] : bundle.units) {
        Parser(unit, tokenize(text), problems).run(entities, archs, mems);
        if (!entities.contains(unit)) problems.push_back(unit + ".vhd: does not declare entity " + unit);
    }
    std::set<std::string> implemented;
    for (const auto& arch : archs) {
        implemented.insert(arch.entity);
        if (!entities.contains(arch.entity)) {
            problems.push_back(arch.unit + ".vhd: architecture of undeclared entity " + arch.entity);
        }
        for (const auto& inst : arch.instances) check_instance(inst, arch, entities, problems);
    }
    for (const auto& [name, e] : entities) {
        if (!implemented.contains(name)) problems.push_back(e.unit + ".vhd: entity " + name + " has no architecture");
        if (name != "testbench" && (!e.port("start") || !e.port("ready"))) {
            problems.push_back(e.unit + ".vhd: entity " + name + " lacks a start/ready handshake");
        }
    }
    for (const auto& m : mems) {
        if (!bundle.memories.contains(m)) problems.push_back("memory file " + m + " is referenced but not generated");
    }
    return problems;
}

} // namespace snnforge::hdl
