#pragma once

// POWL Construction Language (PCL): the closed language a model generator
// must emit. Six whitelisted calls, single-assignment identifiers, and a
// final(...) declaration naming the root model. Interpretation only ever
// calls the powl.hpp constructors; there is no I/O path in this file.
//
//   program    = { stmt } , finaldecl ;
//   stmt       = ident , "=" , expr , term ;
//   finaldecl  = "final" , "(" , ident , ")" ;
//   expr       = call | ident ;
//   call       = activity("label") | silent() | xor(expr, expr, ...)
//              | loop(expr, expr) | partial_order([expr, ...], [(i,j), ...]) ;
//   term       = newline | ";" ;     comments: "#" to end of line

#include <promoai/powl.hpp>

#include <array>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promoai {

inline constexpr std::size_t kMaxPclSourceChars = 20'000;
inline constexpr std::size_t kMaxPclStatements = 500;
inline constexpr std::size_t kMaxPclNesting = 64;

struct SourceLocation {
    std::size_t line = 1;
    std::size_t column = 1;
    friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

enum class PclErrorKind {
    lex,
    parse,
    unknown_function,
    arity,
    undefined_ident,
    reassignment,
    reuse_of_submodel,
    unused_submodel,
    bad_edge,
    cyclic_order,
    no_final,
    limit_exceeded,
    forbidden_construct,
};

inline std::string_view to_string(PclErrorKind kind) {
    switch (kind) {
    case PclErrorKind::lex: return "lex";
    case PclErrorKind::parse: return "parse";
    case PclErrorKind::unknown_function: return "unknown-function";
    case PclErrorKind::arity: return "arity";
    case PclErrorKind::undefined_ident: return "undefined-ident";
    case PclErrorKind::reassignment: return "reassignment";
    case PclErrorKind::reuse_of_submodel: return "reuse-of-submodel";
    case PclErrorKind::unused_submodel: return "unused-submodel";
    case PclErrorKind::bad_edge: return "bad-edge";
    case PclErrorKind::cyclic_order: return "cyclic-order";
    case PclErrorKind::no_final: return "no-final";
    case PclErrorKind::limit_exceeded: return "limit-exceeded";
    case PclErrorKind::forbidden_construct: return "forbidden-construct";
    }
    return "unknown";
}

/// A rejected program. The message is self-contained: it is sent back to
/// the model generator verbatim.
class PclError : public std::runtime_error {
  public:
    PclError(PclErrorKind kind, SourceLocation location, const std::string& message)
        : std::runtime_error(message), kind_(kind), location_(location) {}

    [[nodiscard]] PclErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] SourceLocation location() const noexcept { return location_; }
    [[nodiscard]] std::string message() const { return what(); }

    /// "reuse-of-submodel at line 3, column 12: ..."
    [[nodiscard]] std::string describe() const {
        return std::string(to_string(kind_)) + " at line " + std::to_string(location_.line) + ", column " +
               std::to_string(location_.column) + ": " + what();
    }

  private:
    PclErrorKind kind_;
    SourceLocation location_;
};

// ---------------------------------------------------------------------------
// Syntax tree

struct EdgeLiteral {
    std::size_t from = 0;
    std::size_t to = 0;
    SourceLocation loc;
};

struct Expr {
    enum class Kind { ident, activity, silent, xor_choice, loop, partial_order };
    Kind kind = Kind::ident;
    SourceLocation loc;
    std::string text;              // identifier name, or activity label
    std::vector<Expr> args;        // operands / partial-order children
    std::vector<EdgeLiteral> edges;
};

struct Statement {
    std::string target;
    SourceLocation loc;
    Expr value;
};

struct PclProgram {
    std::vector<Statement> statements;
    std::string final_ident;
    SourceLocation final_loc;
};

// ---------------------------------------------------------------------------
// Lexer

namespace pcl_detail {

enum class Tok { ident, string, integer, lparen, rparen, lbracket, rbracket, comma, equals, semicolon, newline, end };

struct Token {
    Tok type;
    std::string text;
    SourceLocation loc;
};

inline constexpr std::array<std::string_view, 6> kFunctions{"activity", "silent", "xor", "loop", "partial_order",
                                                            "final"};

// Words of general-purpose languages that have no meaning here. Rejecting
// them up front gives the generator a precise message instead of a
// confusing parse error.
inline constexpr std::array<std::string_view, 35> kForbiddenWords{
    "import", "from",   "exec",    "eval",    "open",    "compile", "def",        "class",  "lambda",
    "global", "nonlocal", "while", "for",     "if",      "else",    "elif",       "try",    "except",
    "finally", "with",  "return",  "yield",   "del",     "assert",  "raise",      "async",  "await",
    "getattr", "setattr", "delattr", "globals", "locals", "os",     "subprocess", "builtins"};

inline bool is_function_name(std::string_view s) {
    for (auto f : kFunctions) {
        if (f == s) return true;
    }
    return false;
}

inline bool is_forbidden_word(std::string_view s) {
    if (s.starts_with("__")) return true;
    for (auto f : kForbiddenWords) {
        if (f == s) return true;
    }
    return false;
}

inline bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            const SourceLocation here{line_, col_};
            if (c == '\n') {
                if (depth_ == 0) out.push_back({Tok::newline, "\n", here});
                advance();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (is_letter(c) || c == '_') {
                out.push_back(word(here));
            } else if (is_digit(c)) {
                std::string digits;
                while (pos_ < src_.size() && is_digit(src_[pos_])) {
                    digits += src_[pos_];
                    advance();
                }
                out.push_back({Tok::integer, std::move(digits), here});
            } else if (c == '"') {
                out.push_back(string_literal(here));
            } else {
                Tok t;
                switch (c) {
                case '(': t = Tok::lparen; ++depth_; break;
                case ')': t = Tok::rparen; depth_ = depth_ ? depth_ - 1 : 0; break;
                case '[': t = Tok::lbracket; ++depth_; break;
                case ']': t = Tok::rbracket; depth_ = depth_ ? depth_ - 1 : 0; break;
                case ',': t = Tok::comma; break;
                case '=': t = Tok::equals; break;
                case ';': t = Tok::semicolon; break;
                case '.':
                    throw PclError(PclErrorKind::forbidden_construct, here,
                                   "attribute access with '.' is not part of the construction language; use only "
                                   "activity, silent, xor, loop, partial_order and final");
                default: {
                    std::string shown = (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f)
                                            ? "byte 0x" + hex(static_cast<unsigned char>(c))
                                            : std::string("'") + c + "'";
                    throw PclError(PclErrorKind::lex, here, "unexpected character " + shown);
                }
                }
                out.push_back({t, std::string(1, c), here});
                advance();
            }
        }
        out.push_back({Tok::end, "", {line_, col_}});
        return out;
    }

  private:
    static std::string hex(unsigned char c) {
        constexpr char digits[] = "0123456789abcdef";
        return {digits[c >> 4], digits[c & 0xf]};
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    Token word(SourceLocation here) {
        std::string w;
        while (pos_ < src_.size() && (is_letter(src_[pos_]) || is_digit(src_[pos_]) || src_[pos_] == '_')) {
            w += src_[pos_];
            advance();
        }
        if (is_forbidden_word(w)) {
            throw PclError(PclErrorKind::forbidden_construct, here,
                           "'" + w + "' is not allowed; the construction language has no imports, control flow or "
                                     "library access, only activity, silent, xor, loop, partial_order and final");
        }
        if (w.front() == '_') {
            throw PclError(PclErrorKind::lex, here, "identifier '" + w + "' must start with a letter");
        }
        return {Tok::ident, std::move(w), here};
    }

    Token string_literal(SourceLocation here) {
        advance();  // opening quote
        std::string value;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') {
                throw PclError(PclErrorKind::lex, here, "string literal is not terminated on the same line");
            }
            const char c = src_[pos_];
            if (c == '"') {
                advance();
                break;
            }
            if (c == '\\') {
                const SourceLocation esc{line_, col_};
                advance();
                if (pos_ >= src_.size() || (src_[pos_] != '"' && src_[pos_] != '\\')) {
                    throw PclError(PclErrorKind::lex, esc,
                                   "unsupported escape sequence in string literal; only \\\" and \\\\ are allowed");
                }
                value += src_[pos_];
                advance();
                continue;
            }
            value += c;
            advance();
        }
        return {Tok::string, std::move(value), here};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    std::size_t depth_ = 0;
};

inline std::string describe(const Token& t) {
    switch (t.type) {
    case Tok::ident: return "'" + t.text + "'";
    case Tok::string: return "string \"" + t.text + "\"";
    case Tok::integer: return "number " + t.text;
    case Tok::newline: return "end of line";
    case Tok::end: return "end of program";
    default: return "'" + t.text + "'";
    }
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
  public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    PclProgram run() {
        PclProgram program;
        skip_terms();
        if (peek().type == Tok::end) {
            throw PclError(PclErrorKind::parse, peek().loc.line == 1 ? peek().loc : SourceLocation{1, 1},
                           "the program is empty; expected statements followed by final(...)");
        }
        while (true) {
            skip_terms();
            const Token& t = peek();
            if (t.type == Tok::end) {
                const SourceLocation where = last_loc_;
                throw PclError(PclErrorKind::no_final, where,
                               "the program has no final(...) declaration; end it with final(<identifier of the "
                               "complete model>)");
            }
            if (t.type != Tok::ident) {
                throw PclError(PclErrorKind::parse, t.loc, "expected a statement '<name> = ...', found " + describe(t));
            }
            if (t.text == "final") {
                parse_final(program);
                return program;
            }
            if (program.statements.size() == kMaxPclStatements) {
                throw PclError(PclErrorKind::limit_exceeded, t.loc,
                               "the program has more than " + std::to_string(kMaxPclStatements) + " statements");
            }
            program.statements.push_back(parse_statement());
        }
    }

  private:
    const Token& peek(std::size_t ahead = 0) const {
        const auto i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }

    const Token& take() {
        const Token& t = toks_[pos_];
        if (t.type != Tok::end) {
            last_loc_ = t.loc;
            ++pos_;
        }
        return t;
    }

    const Token& expect(Tok type, std::string_view what) {
        const Token& t = peek();
        if (t.type != type) {
            throw PclError(PclErrorKind::parse, t.loc, "expected " + std::string(what) + ", found " + describe(t));
        }
        return take();
    }

    void skip_terms() {
        while (peek().type == Tok::newline || peek().type == Tok::semicolon) take();
    }

    void parse_final(PclProgram& program) {
        const Token& kw = take();
        program.final_loc = kw.loc;
        expect(Tok::lparen, "'(' after final");
        const Token& id = peek();
        if (id.type != Tok::ident) {
            throw PclError(PclErrorKind::parse, id.loc,
                           "final(...) takes the identifier of the complete model, found " + describe(id));
        }
        program.final_ident = take().text;
        program.final_loc = id.loc;
        if (peek().type == Tok::comma) {
            throw PclError(PclErrorKind::arity, peek().loc, "final takes exactly 1 identifier");
        }
        expect(Tok::rparen, "')' closing final(...)");
        skip_terms();
        if (peek().type != Tok::end) {
            throw PclError(PclErrorKind::parse, peek().loc,
                           "unexpected " + describe(peek()) + " after final(...); final must be the last statement");
        }
    }

    Statement parse_statement() {
        const Token& target = take();
        Statement st;
        st.target = target.text;
        st.loc = target.loc;
        const Token& next = peek();
        if (next.type == Tok::lparen) {
            if (is_function_name(target.text)) {
                throw PclError(PclErrorKind::parse, target.loc,
                               "the result of " + target.text + "(...) must be assigned: write '<name> = " +
                                   target.text + "(...)'");
            }
            throw unknown_function(target);
        }
        if (next.type != Tok::equals) {
            throw PclError(PclErrorKind::parse, next.loc,
                           "expected '=' after '" + target.text + "', found " + describe(next));
        }
        if (is_function_name(target.text)) {
            throw PclError(PclErrorKind::parse, target.loc,
                           "'" + target.text + "' is a reserved function name and cannot be assigned");
        }
        take();
        st.value = parse_expr(0);
        const Token& term = peek();
        if (term.type == Tok::newline || term.type == Tok::semicolon) {
            take();
        } else if (term.type == Tok::ident && (term.text == "final" || peek(1).type == Tok::equals)) {
            // a following statement on the same line is unambiguous; tolerated
        } else if (term.type != Tok::end) {
            throw PclError(PclErrorKind::parse, term.loc,
                           "expected end of statement (newline or ';') after the definition of '" + st.target +
                               "', found " + describe(term));
        }
        return st;
    }

    static PclError unknown_function(const Token& name) {
        return PclError(PclErrorKind::unknown_function, name.loc,
                        "unknown function '" + name.text +
                            "'; the only functions are activity, silent, xor, loop, partial_order and final");
    }

    // One call argument before per-function checking.
    struct Arg {
        enum class Kind { expr, string, expr_list, edge_list, empty_list } kind;
        SourceLocation loc;
        Expr expr;
        std::string text;
        std::vector<Expr> list;
        std::vector<EdgeLiteral> edges;
    };

    Expr parse_expr(std::size_t depth) {
        if (depth > kMaxPclNesting) {
            throw PclError(PclErrorKind::limit_exceeded, peek().loc,
                           "expressions are nested more than " + std::to_string(kMaxPclNesting) +
                               " levels deep; assign submodels to identifiers instead");
        }
        const Token& t = peek();
        if (t.type != Tok::ident) {
            throw PclError(PclErrorKind::parse, t.loc, "expected a submodel (identifier or call), found " + describe(t));
        }
        const Token& name = take();
        if (peek().type != Tok::lparen) {
            if (is_function_name(name.text)) {
                throw PclError(PclErrorKind::parse, name.loc,
                               "'" + name.text + "' must be called, e.g. " + name.text + "(...)");
            }
            return Expr{Expr::Kind::ident, name.loc, name.text, {}, {}};
        }
        if (!is_function_name(name.text) || name.text == "final") {
            if (name.text == "final") {
                throw PclError(PclErrorKind::parse, name.loc, "final(...) must appear on its own as the last statement");
            }
            throw unknown_function(name);
        }
        take();  // (
        std::vector<Arg> args;
        if (peek().type != Tok::rparen) {
            while (true) {
                args.push_back(parse_arg(depth));
                if (peek().type == Tok::comma) {
                    take();
                    continue;
                }
                break;
            }
        }
        expect(Tok::rparen, "')' or ',' in the argument list of " + name.text);
        return build_call(name, std::move(args));
    }

    Arg parse_arg(std::size_t depth) {
        const Token& t = peek();
        Arg a{Arg::Kind::expr, t.loc, {}, {}, {}, {}};
        if (t.type == Tok::string) {
            a.kind = Arg::Kind::string;
            a.text = take().text;
            return a;
        }
        if (t.type != Tok::lbracket) {
            a.expr = parse_expr(depth + 1);
            return a;
        }
        take();  // [
        if (peek().type == Tok::rbracket) {
            take();
            a.kind = Arg::Kind::empty_list;
            return a;
        }
        if (peek().type == Tok::lparen) {
            a.kind = Arg::Kind::edge_list;
            while (true) {
                a.edges.push_back(parse_edge());
                if (peek().type == Tok::comma) {
                    take();
                    continue;
                }
                break;
            }
            expect(Tok::rbracket, "']' or ',' in the order list");
            return a;
        }
        a.kind = Arg::Kind::expr_list;
        while (true) {
            a.list.push_back(parse_expr(depth + 1));
            if (peek().type == Tok::comma) {
                take();
                continue;
            }
            break;
        }
        expect(Tok::rbracket, "']' or ',' in the list of submodels");
        return a;
    }

    EdgeLiteral parse_edge() {
        const Token& open = expect(Tok::lparen, "an order pair (i,j)");
        EdgeLiteral e;
        e.loc = open.loc;
        e.from = parse_index();
        expect(Tok::comma, "',' inside an order pair (i,j)");
        e.to = parse_index();
        expect(Tok::rparen, "')' closing an order pair (i,j)");
        return e;
    }

    std::size_t parse_index() {
        const Token& t = peek();
        if (t.type != Tok::integer) {
            throw PclError(PclErrorKind::parse, t.loc,
                           "order pairs contain child positions (0-based integers), found " + describe(t));
        }
        std::size_t value = 0;
        const auto* first = t.text.data();
        const auto* last = first + t.text.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last) {
            throw PclError(PclErrorKind::bad_edge, t.loc, "child position " + t.text + " is out of range");
        }
        take();
        return value;
    }

    static PclError arity(const Token& name, const std::string& expectation, std::size_t got) {
        return PclError(PclErrorKind::arity, name.loc,
                        name.text + " " + expectation + ", got " + std::to_string(got) + " argument" +
                            (got == 1 ? "" : "s"));
    }

    static Expr expect_submodel(const Token& name, Arg& a, std::size_t position) {
        if (a.kind == Arg::Kind::expr) return std::move(a.expr);
        const char* what = a.kind == Arg::Kind::string ? "a string literal" : "a list";
        throw PclError(PclErrorKind::parse, a.loc,
                       "argument " + std::to_string(position) + " of " + name.text +
                           " must be a submodel (identifier or call), not " + what);
    }

    Expr build_call(const Token& name, std::vector<Arg> args) {
        Expr e;
        e.loc = name.loc;
        const auto n = args.size();
        if (name.text == "activity") {
            e.kind = Expr::Kind::activity;
            if (n != 1) throw arity(name, "takes exactly 1 argument (the label string)", n);
            if (args[0].kind != Arg::Kind::string) {
                throw PclError(PclErrorKind::parse, args[0].loc,
                               "activity takes a double-quoted label string, e.g. activity(\"check order\")");
            }
            try {
                e.text = Label::make(args[0].text).text();
            } catch (const ModelError& err) {
                throw PclError(PclErrorKind::parse, args[0].loc, err.what());
            }
        } else if (name.text == "silent") {
            e.kind = Expr::Kind::silent;
            if (n != 0) throw arity(name, "takes no arguments", n);
        } else if (name.text == "xor") {
            e.kind = Expr::Kind::xor_choice;
            if (n < 2) throw arity(name, "needs at least 2 alternatives", n);
            for (std::size_t i = 0; i < n; ++i) e.args.push_back(expect_submodel(name, args[i], i + 1));
        } else if (name.text == "loop") {
            e.kind = Expr::Kind::loop;
            if (n != 2) throw arity(name, "takes exactly 2 arguments (do part, redo part)", n);
            for (std::size_t i = 0; i < n; ++i) e.args.push_back(expect_submodel(name, args[i], i + 1));
        } else {
            e.kind = Expr::Kind::partial_order;
            if (n != 2) throw arity(name, "takes exactly 2 arguments ([submodels], [order pairs])", n);
            if (args[0].kind == Arg::Kind::empty_list) {
                throw PclError(PclErrorKind::arity, args[0].loc, "partial_order needs at least 1 submodel");
            }
            if (args[0].kind != Arg::Kind::expr_list) {
                throw PclError(PclErrorKind::parse, args[0].loc,
                               "the first argument of partial_order must be a list of submodels, e.g. [a, b]");
            }
            if (args[1].kind != Arg::Kind::edge_list && args[1].kind != Arg::Kind::empty_list) {
                throw PclError(PclErrorKind::parse, args[1].loc,
                               "the second argument of partial_order must be a list of order pairs, e.g. "
                               "[(0,1)], or []");
            }
            e.args = std::move(args[0].list);
            e.edges = std::move(args[1].edges);
        }
        return e;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    SourceLocation last_loc_{1, 1};
};

}  // namespace pcl_detail

/// Parses PCL source. Throws PclError (lex, parse, unknown-function, arity,
/// no-final, limit-exceeded, forbidden-construct).
inline PclProgram parse(std::string_view source) {
    if (source.size() > kMaxPclSourceChars) {
        throw PclError(PclErrorKind::limit_exceeded, {1, 1},
                       "the program is " + std::to_string(source.size()) + " characters long; the limit is " +
                           std::to_string(kMaxPclSourceChars));
    }
    pcl_detail::Lexer lexer(source);
    pcl_detail::Parser parser(lexer.run());
    return parser.run();
}

// ---------------------------------------------------------------------------
// Static checks

namespace pcl_detail {

struct Binding {
    SourceLocation assigned_at;
    std::optional<std::string> consumed_by;
    SourceLocation consumed_at;
};

inline std::optional<PclError> check_uses(const Expr& e, const std::string& owner,
                                          std::map<std::string, Binding>& env) {
    if (e.kind == Expr::Kind::ident) {
        const auto it = env.find(e.text);
        if (it == env.end()) {
            return PclError(PclErrorKind::undefined_ident, e.loc,
                            "identifier '" + e.text + "' is used before it is assigned");
        }
        if (it->second.consumed_by) {
            return PclError(PclErrorKind::reuse_of_submodel, e.loc,
                            "submodel '" + e.text + "' is already used in '" + *it->second.consumed_by +
                                "' at line " + std::to_string(it->second.consumed_at.line) +
                                "; each submodel can be used only once, so create a new submodel (e.g. another "
                                "activity(...) call) for the repeated part");
        }
        it->second.consumed_by = owner;
        it->second.consumed_at = e.loc;
        return std::nullopt;
    }
    for (const auto& a : e.args) {
        if (auto err = check_uses(a, owner, env)) return err;
    }
    return std::nullopt;
}

}  // namespace pcl_detail

/// Checks single assignment, define-before-use, single consumption and
/// reachability from final. Returns the first violation in statement order.
inline std::optional<PclError> check(const PclProgram& program) {
    std::map<std::string, pcl_detail::Binding> env;
    for (const auto& st : program.statements) {
        if (auto err = pcl_detail::check_uses(st.value, st.target, env)) return err;
        if (const auto it = env.find(st.target); it != env.end()) {
            return PclError(PclErrorKind::reassignment, st.loc,
                            "identifier '" + st.target + "' is already assigned at line " +
                                std::to_string(it->second.assigned_at.line) + "; every identifier is assigned once");
        }
        env.emplace(st.target, pcl_detail::Binding{st.loc, std::nullopt, {}});
    }
    const auto root = env.find(program.final_ident);
    if (root == env.end()) {
        return PclError(PclErrorKind::undefined_ident, program.final_loc,
                        "final refers to '" + program.final_ident + "', which is never assigned");
    }
    if (root->second.consumed_by) {
        return PclError(PclErrorKind::reuse_of_submodel, program.final_loc,
                        "final refers to '" + program.final_ident + "', which is already used inside '" +
                            *root->second.consumed_by + "'; final must name the outermost model");
    }
    for (const auto& st : program.statements) {
        const auto& b = env.at(st.target);
        if (!b.consumed_by && st.target != program.final_ident) {
            return PclError(PclErrorKind::unused_submodel, st.loc,
                            "submodel '" + st.target + "' is never used; every submodel must be part of the final "
                                                       "model '" +
                                program.final_ident + "'");
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Interpreter

namespace pcl_detail {

inline PclErrorKind map_kind(ModelErrorKind k) {
    switch (k) {
    case ModelErrorKind::arity: return PclErrorKind::arity;
    case ModelErrorKind::bad_edge: return PclErrorKind::bad_edge;
    case ModelErrorKind::cyclic_order: return PclErrorKind::cyclic_order;
    case ModelErrorKind::too_large: return PclErrorKind::limit_exceeded;
    case ModelErrorKind::invalid_label: return PclErrorKind::parse;
    }
    return PclErrorKind::parse;
}

inline PowlNode eval(const Expr& e, std::map<std::string, PowlNode>& env) {
    try {
        switch (e.kind) {
        case Expr::Kind::ident: {
            auto node = env.extract(e.text);
            if (node.empty()) {
                throw PclError(PclErrorKind::undefined_ident, e.loc,
                               "identifier '" + e.text + "' is not available at this point");
            }
            return std::move(node.mapped());
        }
        case Expr::Kind::activity: return make_activity(e.text);
        case Expr::Kind::silent: return make_silent();
        case Expr::Kind::xor_choice: {
            std::vector<PowlNode> children;
            for (const auto& a : e.args) children.push_back(eval(a, env));
            return make_xor(std::move(children));
        }
        case Expr::Kind::loop: return make_loop(eval(e.args[0], env), eval(e.args[1], env));
        case Expr::Kind::partial_order: {
            std::vector<PowlNode> children;
            for (const auto& a : e.args) children.push_back(eval(a, env));
            EdgeSet order;
            for (const auto& edge : e.edges) order.emplace(edge.from, edge.to);
            return make_partial_order(std::move(children), order);
        }
        }
    } catch (const ModelError& err) {
        SourceLocation where = e.loc;
        if (err.edge()) {
            for (const auto& edge : e.edges) {
                if (edge.from == err.edge()->first && edge.to == err.edge()->second) where = edge.loc;
            }
        }
        throw PclError(map_kind(err.kind()), where, err.what());
    }
    throw std::logic_error("unreachable expression kind");
}

}  // namespace pcl_detail

/// Evaluates a checked program with the model constructors only.
inline PowlNode interpret(const PclProgram& program) {
    std::map<std::string, PowlNode> env;
    for (const auto& st : program.statements) {
        auto value = pcl_detail::eval(st.value, env);
        env.insert_or_assign(st.target, std::move(value));
    }
    return env.at(program.final_ident);
}

/// parse, check and interpret in one step. Throws the first PclError.
inline PowlNode run_pcl(std::string_view source) {
    const auto program = parse(source);
    if (auto err = check(program)) throw *err;
    return interpret(program);
}

}  // namespace promoai
