#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace plra::dsl {

// Bounded deterministic mini-language: straight-line assignments over
// x, v0..v3, constants 0..9, if/else on <,==,> comparisons, constant-count
// repeat loops, one final return. All arithmetic is mod 64; inputs range
// over 0..15. Loop counts are constants, so every program terminates and
// evaluation is deterministic; validity reduces to parse + op budget.
inline constexpr int kModulus = 64;
inline constexpr int kNumInputs = 16;  // x in 0..15
inline constexpr int kMaxConst = 9;
inline constexpr int kMaxRepeat = 8;
inline constexpr int kMaxNesting = 8;    // parse-time structural nesting bound
inline constexpr int kMaxTokens = 128;   // parse-time significant-token bound
inline constexpr long kOpBudget = 10000;
inline constexpr int kNumVars = 4;       // assignable v0..v3

enum class NodeKind { prog, assign, if_stmt, repeat, ret, binop, cond, constant, var };

enum class BinOp { add = 0, sub = 1, mul = 2 };
enum class CmpOp { lt = 0, eq = 1, gt = 2 };

// Immutable tree; children vectors are owned, programs share subtrees freely.
struct Node;
using NodeRef = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    // constant: value; var: 0 = x, 1..4 = v0..v3; assign: target 1..4;
    // repeat: count; binop: BinOp; cond: CmpOp; if_stmt: then-branch length.
    int value = 0;
    bool has_else = false;  // if_stmt only
    std::vector<NodeRef> kids;
};

NodeRef make_node(NodeKind kind, int value, std::vector<NodeRef> kids = {}, bool has_else = false);
bool ast_equal(const NodeRef& a, const NodeRef& b);

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

enum class TokenKind {
    digit,      // 0..9, value carries the digit
    var,        // value: 0 = x, 1..4 = v0..v3
    kw_if,
    kw_else,
    kw_repeat,
    kw_return,
    plus,
    minus,
    star,
    lt,
    eq_eq,
    gt,
    assign,
    lparen,
    rparen,
    lbrace,
    rbrace,
    separator,  // ';' or newline; not counted against the token budget
    end,
};

struct Token {
    TokenKind kind;
    int value = 0;
    int index = 0;  // significant-token index, for error positions
};

// Number of distinct countable token kinds (digits expanded to 10, vars to
// 5); used by the student feature map.
inline constexpr int kVocabSize = 30;
// Stable vocabulary slot of a significant token; -1 for separators/end.
int vocab_index(const Token& t);

// ---------------------------------------------------------------------------
// Parse / print
// ---------------------------------------------------------------------------

enum class ParseErrorCode { unexpected_token, depth_overflow, length_overflow };

struct ParseError {
    ParseErrorCode code;
    int position = 0;  // significant-token index
    std::string message;
};

struct ParseResult {
    NodeRef ast;
    std::optional<ParseError> error;
    int token_count = 0;

    bool ok() const { return ast != nullptr; }
};

std::vector<Token> lex(const std::string& text, std::optional<ParseError>& error);
ParseResult parse(const std::string& text);

// Canonical form: one statement per line, single spaces, no semicolons,
// minimal parentheses. parse(pretty_print(ast)) reproduces the tree.
std::string pretty_print(const NodeRef& program);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
    bool budget_exceeded = false;
    int output = 0;       // meaningful when !budget_exceeded
    long ops_used = 0;
};

EvalResult interpret(const NodeRef& program, int x);

struct IoTable {
    bool all_within_budget = false;
    std::array<int, kNumInputs> outputs{};
    bool constant_output = false;
};

// Evaluates the program on every input 0..15.
IoTable enumerate_io(const NodeRef& program);

// ---------------------------------------------------------------------------
// Structural metrics
// ---------------------------------------------------------------------------

struct ComplexityDescriptor {
    int ast_depth = 0;   // max node depth, root = 1
    int cyclomatic = 0;  // 1 + #if + #repeat
    int loc = 0;         // statement count + 1 for the return
    int var_count = 0;   // distinct assigned variables
};

ComplexityDescriptor complexity(const NodeRef& program);

// ---------------------------------------------------------------------------
// Grammar tables (shared with the teacher-side sampler)
// ---------------------------------------------------------------------------

namespace grammar {

enum class Nt { prog = 0, stmt_list = 1, stmt = 2, expr = 3, term = 4, cond = 5 };
inline constexpr int kNumNonterminals = 6;
inline constexpr int kMaxProductions = 16;
inline constexpr int kDepthBuckets = 4;
inline constexpr int kNumContexts = kNumNonterminals * kDepthBuckets;  // 24

// Production slots per nonterminal:
//   prog:      0 = stmt-list followed by return
//   stmt_list: 0 = stop, 1 = statement then rest
//   stmt:      0..3 assign v0..v3, 4 if, 5 if/else, 6..13 repeat 1..8
//   expr:      0 single term, 1 add, 2 sub, 3 mul
//   term:      0..9 constant, 10 x, 11..14 v0..v3, 15 parenthesized expr
//   cond:      0 <, 1 ==, 2 >
int num_productions(Nt nt);

// Whether a production can start at the given remaining nesting budget and
// still terminate. Recursive productions pass budget - 1 to their children;
// the unit production expr -> term passes budget through.
bool production_allowed(Nt nt, int production, int budget);

// Policy context row: nonterminal kind x min(depth, 3).
int context_index(Nt nt, int depth);

}  // namespace grammar

}  // namespace plra::dsl
