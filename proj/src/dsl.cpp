#include "plra/dsl.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace plra::dsl {

NodeRef make_node(NodeKind kind, int value, std::vector<NodeRef> kids, bool has_else) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->value = value;
    n->kids = std::move(kids);
    n->has_else = has_else;
    return n;
}

bool ast_equal(const NodeRef& a, const NodeRef& b) {
    if (a == b) {
        return true;
    }
    if (!a || !b) {
        return false;
    }
    if (a->kind != b->kind || a->value != b->value || a->has_else != b->has_else ||
        a->kids.size() != b->kids.size()) {
        return false;
    }
    for (size_t i = 0; i < a->kids.size(); ++i) {
        if (!ast_equal(a->kids[i], b->kids[i])) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

const char* kVarNames[5] = {"x", "v0", "v1", "v2", "v3"};

}  // namespace

int vocab_index(const Token& t) {
    // 0..9 digits, 10..14 vars, 15..18 keywords, 19..21 + - *,
    // 22..24 < == >, 25..29 = ( ) { }.
    switch (t.kind) {
        case TokenKind::digit: return t.value;
        case TokenKind::var: return 10 + t.value;
        case TokenKind::kw_if: return 15;
        case TokenKind::kw_else: return 16;
        case TokenKind::kw_repeat: return 17;
        case TokenKind::kw_return: return 18;
        case TokenKind::plus: return 19;
        case TokenKind::minus: return 20;
        case TokenKind::star: return 21;
        case TokenKind::lt: return 22;
        case TokenKind::eq_eq: return 23;
        case TokenKind::gt: return 24;
        case TokenKind::assign: return 25;
        case TokenKind::lparen: return 26;
        case TokenKind::rparen: return 27;
        case TokenKind::lbrace: return 28;
        case TokenKind::rbrace: return 29;
        default: return -1;
    }
}

std::vector<Token> lex(const std::string& text, std::optional<ParseError>& error) {
    std::vector<Token> out;
    error.reset();
    int sig = 0;
    size_t i = 0;

    auto push = [&](TokenKind k, int v = 0) {
        if (k != TokenKind::separator) {
            if (sig >= kMaxTokens) {
                error = ParseError{ParseErrorCode::length_overflow, sig,
                                   "program exceeds " + std::to_string(kMaxTokens) + " tokens"};
                return false;
            }
            out.push_back({k, v, sig});
            ++sig;
        } else if (out.empty() || out.back().kind != TokenKind::separator) {
            out.push_back({k, v, sig});
        }
        return true;
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        bool ok = true;
        if (c == '\n' || c == ';') {
            ok = push(TokenKind::separator);
            ++i;
        } else if (c >= '0' && c <= '9') {
            ok = push(TokenKind::digit, c - '0');
            ++i;
        } else if (c == '+') {
            ok = push(TokenKind::plus);
            ++i;
        } else if (c == '-') {
            ok = push(TokenKind::minus);
            ++i;
        } else if (c == '*') {
            ok = push(TokenKind::star);
            ++i;
        } else if (c == '<') {
            ok = push(TokenKind::lt);
            ++i;
        } else if (c == '>') {
            ok = push(TokenKind::gt);
            ++i;
        } else if (c == '(') {
            ok = push(TokenKind::lparen);
            ++i;
        } else if (c == ')') {
            ok = push(TokenKind::rparen);
            ++i;
        } else if (c == '{') {
            ok = push(TokenKind::lbrace);
            ++i;
        } else if (c == '}') {
            ok = push(TokenKind::rbrace);
            ++i;
        } else if (c == '=') {
            if (i + 1 < text.size() && text[i + 1] == '=') {
                ok = push(TokenKind::eq_eq);
                i += 2;
            } else {
                ok = push(TokenKind::assign);
                ++i;
            }
        } else if (c >= 'a' && c <= 'z') {
            size_t j = i;
            while (j < text.size() && ((text[j] >= 'a' && text[j] <= 'z') || (text[j] >= '0' && text[j] <= '9'))) {
                ++j;
            }
            const std::string word = text.substr(i, j - i);
            if (word == "if") {
                ok = push(TokenKind::kw_if);
            } else if (word == "else") {
                ok = push(TokenKind::kw_else);
            } else if (word == "repeat") {
                ok = push(TokenKind::kw_repeat);
            } else if (word == "return") {
                ok = push(TokenKind::kw_return);
            } else {
                int var = -1;
                for (int k = 0; k < 5; ++k) {
                    if (word == kVarNames[k]) {
                        var = k;
                        break;
                    }
                }
                if (var < 0) {
                    error = ParseError{ParseErrorCode::unexpected_token, sig, "unknown identifier '" + word + "'"};
                    return out;
                }
                ok = push(TokenKind::var, var);
            }
            i = j;
        } else {
            error = ParseError{ParseErrorCode::unexpected_token, sig,
                               std::string("unexpected character '") + c + "'"};
            return out;
        }
        if (!ok) {
            return out;
        }
    }
    out.push_back({TokenKind::end, 0, sig});
    return out;
}

// ---------------------------------------------------------------------------
// Parser (recursive descent, LL(1))
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

    ParseResult run() {
        ParseResult res;
        std::vector<NodeRef> stmts;
        skip_seps();
        while (!failed_ && !at(TokenKind::kw_return) && !at(TokenKind::end)) {
            stmts.push_back(parse_stmt());
            skip_seps();
        }
        if (!failed_) {
            expect(TokenKind::kw_return, "expected 'return'");
        }
        NodeRef ret_expr = failed_ ? nullptr : parse_expr();
        if (!failed_) {
            skip_seps();
            expect(TokenKind::end, "trailing input after return expression");
        }
        if (failed_) {
            res.error = error_;
            return res;
        }
        stmts.push_back(make_node(NodeKind::ret, 0, {ret_expr}));
        res.ast = make_node(NodeKind::prog, 0, std::move(stmts));
        res.token_count = count_significant();
        return res;
    }

private:
    const std::vector<Token>& toks_;
    size_t pos_ = 0;
    int nesting_ = 0;
    bool failed_ = false;
    ParseError error_{};

    int count_significant() const {
        int n = 0;
        for (const auto& t : toks_) {
            if (t.kind != TokenKind::separator && t.kind != TokenKind::end) {
                ++n;
            }
        }
        return n;
    }

    const Token& peek() const { return toks_[pos_]; }
    bool at(TokenKind k) const { return peek().kind == k; }

    void fail(ParseErrorCode code, const std::string& msg) {
        if (!failed_) {
            failed_ = true;
            error_ = ParseError{code, peek().index, msg};
        }
    }

    const Token& advance() {
        const Token& t = toks_[pos_];
        if (t.kind != TokenKind::end) {
            ++pos_;
        }
        return t;
    }

    void expect(TokenKind k, const std::string& msg) {
        if (failed_) {
            return;
        }
        if (!at(k)) {
            fail(ParseErrorCode::unexpected_token, msg);
            return;
        }
        advance();
    }

    void skip_seps() {
        while (at(TokenKind::separator)) {
            advance();
        }
    }

    void enter_nesting() {
        ++nesting_;
        if (nesting_ > kMaxNesting) {
            fail(ParseErrorCode::depth_overflow,
                 "nesting exceeds depth " + std::to_string(kMaxNesting));
        }
    }
    void leave_nesting() { --nesting_; }

    std::vector<NodeRef> parse_block() {
        std::vector<NodeRef> stmts;
        expect(TokenKind::lbrace, "expected '{'");
        enter_nesting();
        skip_seps();
        while (!failed_ && !at(TokenKind::rbrace) && !at(TokenKind::end)) {
            stmts.push_back(parse_stmt());
            skip_seps();
        }
        expect(TokenKind::rbrace, "expected '}'");
        leave_nesting();
        return stmts;
    }

    NodeRef parse_stmt() {
        if (failed_) {
            return nullptr;
        }
        if (at(TokenKind::var)) {
            const Token& t = advance();
            if (t.value == 0) {
                fail(ParseErrorCode::unexpected_token, "cannot assign to input 'x'");
                return nullptr;
            }
            expect(TokenKind::assign, "expected '='");
            NodeRef e = parse_expr();
            if (failed_) {
                return nullptr;
            }
            return make_node(NodeKind::assign, t.value, {e});
        }
        if (at(TokenKind::kw_if)) {
            advance();
            NodeRef cond = parse_cond();
            std::vector<NodeRef> then_stmts = parse_block();
            const int then_count = static_cast<int>(then_stmts.size());
            bool has_else = false;
            std::vector<NodeRef> kids;
            kids.push_back(cond);
            for (auto& s : then_stmts) {
                kids.push_back(std::move(s));
            }
            skip_seps();
            if (at(TokenKind::kw_else)) {
                advance();
                has_else = true;
                for (auto& s : parse_block()) {
                    kids.push_back(std::move(s));
                }
            }
            if (failed_) {
                return nullptr;
            }
            return make_node(NodeKind::if_stmt, then_count, std::move(kids), has_else);
        }
        if (at(TokenKind::kw_repeat)) {
            advance();
            if (!at(TokenKind::digit)) {
                fail(ParseErrorCode::unexpected_token, "expected repeat count");
                return nullptr;
            }
            const int count = advance().value;
            if (count > kMaxRepeat) {
                fail(ParseErrorCode::unexpected_token, "repeat count exceeds " + std::to_string(kMaxRepeat));
                return nullptr;
            }
            std::vector<NodeRef> body = parse_block();
            if (failed_) {
                return nullptr;
            }
            return make_node(NodeKind::repeat, count, std::move(body));
        }
        fail(ParseErrorCode::unexpected_token, "expected statement");
        return nullptr;
    }

    NodeRef parse_expr() {
        NodeRef lhs = parse_term();
        if (failed_) {
            return nullptr;
        }
        BinOp op;
        if (at(TokenKind::plus)) {
            op = BinOp::add;
        } else if (at(TokenKind::minus)) {
            op = BinOp::sub;
        } else if (at(TokenKind::star)) {
            op = BinOp::mul;
        } else {
            return lhs;
        }
        advance();
        NodeRef rhs = parse_term();
        if (failed_) {
            return nullptr;
        }
        return make_node(NodeKind::binop, static_cast<int>(op), {lhs, rhs});
    }

    NodeRef parse_term() {
        if (failed_) {
            return nullptr;
        }
        if (at(TokenKind::digit)) {
            return make_node(NodeKind::constant, advance().value);
        }
        if (at(TokenKind::var)) {
            return make_node(NodeKind::var, advance().value);
        }
        if (at(TokenKind::lparen)) {
            advance();
            enter_nesting();
            NodeRef e = parse_expr();
            expect(TokenKind::rparen, "expected ')'");
            leave_nesting();
            return e;
        }
        fail(ParseErrorCode::unexpected_token, "expected constant, variable or '('");
        return nullptr;
    }

    NodeRef parse_cond() {
        NodeRef lhs = parse_expr();
        if (failed_) {
            return nullptr;
        }
        CmpOp op;
        if (at(TokenKind::lt)) {
            op = CmpOp::lt;
        } else if (at(TokenKind::eq_eq)) {
            op = CmpOp::eq;
        } else if (at(TokenKind::gt)) {
            op = CmpOp::gt;
        } else {
            fail(ParseErrorCode::unexpected_token, "expected comparison operator");
            return nullptr;
        }
        advance();
        NodeRef rhs = parse_expr();
        if (failed_) {
            return nullptr;
        }
        return make_node(NodeKind::cond, static_cast<int>(op), {lhs, rhs});
    }
};

}  // namespace

ParseResult parse(const std::string& text) {
    std::optional<ParseError> lex_error;
    std::vector<Token> tokens = lex(text, lex_error);
    if (lex_error) {
        ParseResult res;
        res.error = lex_error;
        return res;
    }
    return Parser(tokens).run();
}

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

namespace {

void print_expr(std::ostringstream& out, const NodeRef& e, bool parenthesize_binop);

void print_term(std::ostringstream& out, const NodeRef& t) {
    print_expr(out, t, true);
}

void print_expr(std::ostringstream& out, const NodeRef& e, bool parenthesize_binop) {
    switch (e->kind) {
        case NodeKind::constant:
            out << e->value;
            break;
        case NodeKind::var:
            out << kVarNames[e->value];
            break;
        case NodeKind::binop: {
            if (parenthesize_binop) {
                out << "( ";
            }
            print_term(out, e->kids[0]);
            out << (e->value == 0 ? " + " : e->value == 1 ? " - " : " * ");
            print_term(out, e->kids[1]);
            if (parenthesize_binop) {
                out << " )";
            }
            break;
        }
        default:
            throw std::logic_error("print_expr: not an expression node");
    }
}

void print_cond(std::ostringstream& out, const NodeRef& c) {
    print_expr(out, c->kids[0], false);
    out << (c->value == 0 ? " < " : c->value == 1 ? " == " : " > ");
    print_expr(out, c->kids[1], false);
}

void print_stmt(std::ostringstream& out, const NodeRef& s) {
    switch (s->kind) {
        case NodeKind::assign:
            out << kVarNames[s->value] << " = ";
            print_expr(out, s->kids[0], false);
            out << "\n";
            break;
        case NodeKind::if_stmt: {
            out << "if ";
            print_cond(out, s->kids[0]);
            out << " {\n";
            const int then_count = s->value;
            for (int i = 0; i < then_count; ++i) {
                print_stmt(out, s->kids[static_cast<size_t>(1 + i)]);
            }
            if (s->has_else) {
                out << "} else {\n";
                for (size_t i = static_cast<size_t>(1 + then_count); i < s->kids.size(); ++i) {
                    print_stmt(out, s->kids[i]);
                }
            }
            out << "}\n";
            break;
        }
        case NodeKind::repeat:
            out << "repeat " << s->value << " {\n";
            for (const auto& k : s->kids) {
                print_stmt(out, k);
            }
            out << "}\n";
            break;
        case NodeKind::ret:
            out << "return ";
            print_expr(out, s->kids[0], false);
            out << "\n";
            break;
        default:
            throw std::logic_error("print_stmt: not a statement node");
    }
}

}  // namespace

std::string pretty_print(const NodeRef& program) {
    if (!program || program->kind != NodeKind::prog) {
        throw std::invalid_argument("pretty_print: expected a program node");
    }
    std::ostringstream out;
    for (const auto& s : program->kids) {
        print_stmt(out, s);
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

namespace {

struct Interp {
    std::array<int, 5> vars{};  // [0] = x, 1..4 = v0..v3
    long ops = 0;
    bool exceeded = false;

    bool charge() {
        if (++ops > kOpBudget) {
            exceeded = true;
        }
        return !exceeded;
    }

    int eval_expr(const NodeRef& e) {
        if (!charge()) {
            return 0;
        }
        switch (e->kind) {
            case NodeKind::constant:
                return e->value % kModulus;
            case NodeKind::var:
                return vars[static_cast<size_t>(e->value)];
            case NodeKind::binop: {
                const int l = eval_expr(e->kids[0]);
                if (exceeded) {
                    return 0;
                }
                const int r = eval_expr(e->kids[1]);
                if (exceeded) {
                    return 0;
                }
                long v = 0;
                switch (static_cast<BinOp>(e->value)) {
                    case BinOp::add: v = l + r; break;
                    case BinOp::sub: v = l - r; break;
                    case BinOp::mul: v = static_cast<long>(l) * r; break;
                }
                return static_cast<int>(((v % kModulus) + kModulus) % kModulus);
            }
            default:
                throw std::logic_error("eval_expr: not an expression node");
        }
    }

    bool eval_cond(const NodeRef& c) {
        if (!charge()) {
            return false;
        }
        const int l = eval_expr(c->kids[0]);
        if (exceeded) {
            return false;
        }
        const int r = eval_expr(c->kids[1]);
        if (exceeded) {
            return false;
        }
        switch (static_cast<CmpOp>(c->value)) {
            case CmpOp::lt: return l < r;
            case CmpOp::eq: return l == r;
            case CmpOp::gt: return l > r;
        }
        return false;
    }

    void exec_stmt(const NodeRef& s) {
        if (exceeded || !charge()) {
            return;
        }
        switch (s->kind) {
            case NodeKind::assign:
                vars[static_cast<size_t>(s->value)] = eval_expr(s->kids[0]);
                break;
            case NodeKind::if_stmt: {
                const bool taken = eval_cond(s->kids[0]);
                if (exceeded) {
                    return;
                }
                const int then_count = s->value;
                if (taken) {
                    for (int i = 0; i < then_count && !exceeded; ++i) {
                        exec_stmt(s->kids[static_cast<size_t>(1 + i)]);
                    }
                } else if (s->has_else) {
                    for (size_t i = static_cast<size_t>(1 + then_count); i < s->kids.size() && !exceeded; ++i) {
                        exec_stmt(s->kids[i]);
                    }
                }
                break;
            }
            case NodeKind::repeat:
                for (int i = 0; i < s->value && !exceeded; ++i) {
                    for (const auto& k : s->kids) {
                        exec_stmt(k);
                        if (exceeded) {
                            return;
                        }
                    }
                }
                break;
            default:
                throw std::logic_error("exec_stmt: not a statement node");
        }
    }
};

}  // namespace

EvalResult interpret(const NodeRef& program, int x) {
    if (!program || program->kind != NodeKind::prog) {
        throw std::invalid_argument("interpret: expected a program node");
    }
    Interp interp;
    interp.vars[0] = ((x % kModulus) + kModulus) % kModulus;
    EvalResult res;
    for (const auto& s : program->kids) {
        if (s->kind == NodeKind::ret) {
            if (interp.charge()) {
                res.output = interp.eval_expr(s->kids[0]);
            }
            break;
        }
        interp.exec_stmt(s);
        if (interp.exceeded) {
            break;
        }
    }
    res.budget_exceeded = interp.exceeded;
    res.ops_used = interp.ops;
    return res;
}

IoTable enumerate_io(const NodeRef& program) {
    IoTable table;
    table.all_within_budget = true;
    for (int x = 0; x < kNumInputs; ++x) {
        const EvalResult r = interpret(program, x);
        if (r.budget_exceeded) {
            table.all_within_budget = false;
            table.outputs[static_cast<size_t>(x)] = 0;
        } else {
            table.outputs[static_cast<size_t>(x)] = r.output;
        }
    }
    table.constant_output = table.all_within_budget &&
        std::all_of(table.outputs.begin(), table.outputs.end(),
                    [&](int v) { return v == table.outputs[0]; });
    return table;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

int node_depth(const NodeRef& n) {
    int best = 0;
    for (const auto& k : n->kids) {
        best = std::max(best, node_depth(k));
    }
    return 1 + best;
}

void walk_metrics(const NodeRef& n, ComplexityDescriptor& d, std::array<bool, 5>& assigned) {
    switch (n->kind) {
        case NodeKind::if_stmt:
            d.cyclomatic += 1;
            d.loc += 1;
            break;
        case NodeKind::repeat:
            d.cyclomatic += 1;
            d.loc += 1;
            break;
        case NodeKind::assign:
            d.loc += 1;
            assigned[static_cast<size_t>(n->value)] = true;
            break;
        default:
            break;
    }
    for (const auto& k : n->kids) {
        walk_metrics(k, d, assigned);
    }
}

}  // namespace

ComplexityDescriptor complexity(const NodeRef& program) {
    if (!program || program->kind != NodeKind::prog) {
        throw std::invalid_argument("complexity: expected a program node");
    }
    ComplexityDescriptor d;
    d.ast_depth = node_depth(program);
    d.cyclomatic = 1;
    d.loc = 1;  // the return
    std::array<bool, 5> assigned{};
    for (const auto& s : program->kids) {
        if (s->kind == NodeKind::ret) {
            continue;
        }
        walk_metrics(s, d, assigned);
    }
    d.var_count = 0;
    for (int i = 1; i < 5; ++i) {
        if (assigned[static_cast<size_t>(i)]) {
            ++d.var_count;
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Grammar tables
// ---------------------------------------------------------------------------

namespace grammar {

int num_productions(Nt nt) {
    switch (nt) {
        case Nt::prog: return 1;
        case Nt::stmt_list: return 2;
        case Nt::stmt: return 14;
        case Nt::expr: return 4;
        case Nt::term: return 16;
        case Nt::cond: return 3;
    }
    return 0;
}

bool production_allowed(Nt nt, int production, int budget) {
    if (production < 0 || production >= num_productions(nt)) {
        return false;
    }
    switch (nt) {
        case Nt::prog:
            return budget >= 1;
        case Nt::stmt_list:
            return production == 0 ? true : budget >= 2;
        case Nt::stmt:
            if (production <= 3) {
                return budget >= 1;  // assign
            }
            if (production == 4 || production == 5) {
                return budget >= 2;  // if / if-else need a cond one level down
            }
            return budget >= 1;  // repeat
        case Nt::expr:
            return production == 0 ? true : budget >= 1;
        case Nt::term:
            return production == 15 ? budget >= 1 : true;
        case Nt::cond:
            return budget >= 1;
    }
    return false;
}

int context_index(Nt nt, int depth) {
    const int bucket = std::min(std::max(depth, 0), kDepthBuckets - 1);
    return static_cast<int>(nt) * kDepthBuckets + bucket;
}

}  // namespace grammar

}  // namespace plra::dsl
