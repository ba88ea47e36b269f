#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "plra/dsl.hpp"

using namespace plra::dsl;

namespace {

const char* kCorpus[] = {
    "return x",
    "return 3",
    "v0 = 3\nreturn v0 + x",
    "v0 = x * 2\nv1 = v0 + 1\nreturn v1",
    "if x < 3 {\nv0 = 1\n} else {\nv0 = 2\n}\nreturn v0",
    "repeat 3 {\nv0 = v0 + x\n}\nreturn v0",
    "if x == 0 {\nrepeat 2 {\nv1 = v1 + 1\n}\n}\nreturn v1 + ( x * x )",
    "v2 = ( x + 1 ) * ( x - 1 )\nreturn v2",
    "repeat 8 {\nif v0 > 4 {\nv0 = 0\n}\nv0 = v0 + 1\n}\nreturn v0",
};

}  // namespace

TEST_CASE("parse hand example: assignment then return") {
    const ParseResult res = parse("v0 = 3 ; return v0 + x");
    REQUIRE(res.ok());
    const NodeRef prog = res.ast;
    REQUIRE(prog->kind == NodeKind::prog);
    REQUIRE(prog->kids.size() == 2);
    CHECK(prog->kids[0]->kind == NodeKind::assign);
    CHECK(prog->kids[0]->value == 1);  // v0
    CHECK(prog->kids[0]->kids[0]->kind == NodeKind::constant);
    CHECK(prog->kids[1]->kind == NodeKind::ret);
    CHECK(prog->kids[1]->kids[0]->kind == NodeKind::binop);
}

TEST_CASE("parse rejects bad input with positions") {
    SUBCASE("empty stream") {
        const ParseResult res = parse("");
        CHECK(!res.ok());
        CHECK(res.error->code == ParseErrorCode::unexpected_token);
    }
    SUBCASE("assignment to the input variable") {
        const ParseResult res = parse("x = 3\nreturn x");
        CHECK(!res.ok());
        CHECK(res.error->code == ParseErrorCode::unexpected_token);
    }
    SUBCASE("unknown identifier") {
        const ParseResult res = parse("return y");
        CHECK(!res.ok());
        CHECK(res.error->position == 1);
    }
    SUBCASE("repeat count out of range") {
        const ParseResult res = parse("repeat 9 {\n}\nreturn x");
        CHECK(!res.ok());
    }
    SUBCASE("trailing tokens after return") {
        const ParseResult res = parse("return x x");
        CHECK(!res.ok());
    }
}

TEST_CASE("length overflow at 129 significant tokens") {
    // 'v0 = 1' is 3 tokens and 'return x' is 2; 43 assignments give
    // 129 + 2 tokens, tripping the bound at token 128.
    std::string text;
    for (int i = 0; i < 43; ++i) {
        text += "v0 = 1\n";
    }
    text += "return x";
    const ParseResult res = parse(text);
    CHECK(!res.ok());
    CHECK(res.error->code == ParseErrorCode::length_overflow);

    // one statement fewer fits
    std::string shorter;
    for (int i = 0; i < 42; ++i) {
        shorter += "v0 = 1\n";
    }
    shorter += "return x";
    CHECK(parse(shorter).ok());
}

TEST_CASE("nesting overflow beyond depth 8") {
    std::string text = "return ";
    for (int i = 0; i < 9; ++i) {
        text += "( ";
    }
    text += "x";
    for (int i = 0; i < 9; ++i) {
        text += " )";
    }
    const ParseResult res = parse(text);
    CHECK(!res.ok());
    CHECK(res.error->code == ParseErrorCode::depth_overflow);
}

TEST_CASE("interpret hand examples") {
    SUBCASE("assignment flows into the return") {
        const ParseResult res = parse("v0 = 3 ; return v0 + x");
        REQUIRE(res.ok());
        const EvalResult out = interpret(res.ast, 4);
        CHECK(!out.budget_exceeded);
        CHECK(out.output == 7);
    }
    SUBCASE("identity program") {
        const ParseResult res = parse("return x");
        REQUIRE(res.ok());
        CHECK(interpret(res.ast, 9).output == 9);
    }
    SUBCASE("arithmetic is mod 64") {
        const ParseResult res = parse("v0 = 9 * 9\nreturn v0");
        REQUIRE(res.ok());
        CHECK(interpret(res.ast, 0).output == 81 % 64);
        const ParseResult neg = parse("return 0 - 1");
        REQUIRE(neg.ok());
        CHECK(interpret(neg.ast, 0).output == 63);
    }
    SUBCASE("branching") {
        const ParseResult res = parse("if x < 3 {\nv0 = 1\n} else {\nv0 = 2\n}\nreturn v0");
        REQUIRE(res.ok());
        CHECK(interpret(res.ast, 0).output == 1);
        CHECK(interpret(res.ast, 5).output == 2);
    }
}

TEST_CASE("op budget: nested repeats blow the limit by the hand formula") {
    // innermost assign 'v0 = v0 + 1' costs 4 ops (assign, binop, var, const);
    // k nested 'repeat 8' wrappers cost f(k) = 1 + 8 f(k-1), f(0) = 4:
    // f(3) = 2121 stays under 1e4, f(4) = 16969 exceeds it.
    std::string three = "repeat 8 {\nrepeat 8 {\nrepeat 8 {\nv0 = v0 + 1\n}\n}\n}\nreturn v0";
    const ParseResult r3 = parse(three);
    REQUIRE(r3.ok());
    const EvalResult e3 = interpret(r3.ast, 0);
    CHECK(!e3.budget_exceeded);
    CHECK(e3.ops_used == 2121 + 2);  // plus return + its expression

    std::string four = "repeat 8 {\nrepeat 8 {\nrepeat 8 {\nrepeat 8 {\nv0 = v0 + 1\n}\n}\n}\n}\nreturn v0";
    const ParseResult r4 = parse(four);
    REQUIRE(r4.ok());
    CHECK(interpret(r4.ast, 0).budget_exceeded);
}

TEST_CASE("complexity metrics") {
    SUBCASE("return x") {
        const ParseResult res = parse("return x");
        REQUIRE(res.ok());
        const ComplexityDescriptor d = complexity(res.ast);
        CHECK(d.ast_depth == 3);  // prog -> return -> var
        CHECK(d.cyclomatic == 1);
        CHECK(d.loc == 1);
        CHECK(d.var_count == 0);
    }
    SUBCASE("if with else counts one branch point") {
        const ParseResult res = parse("if x < 3 {\nv0 = 1\n} else {\nv0 = 2\n}\nreturn v0");
        REQUIRE(res.ok());
        const ComplexityDescriptor d = complexity(res.ast);
        CHECK(d.cyclomatic == 2);
        CHECK(d.loc == 4);  // if + two assigns + return
        CHECK(d.var_count == 1);
    }
    SUBCASE("distinct assigned variables") {
        const ParseResult res = parse("v0 = 1\nv1 = 2\nv0 = 3\nreturn v0");
        REQUIRE(res.ok());
        CHECK(complexity(res.ast).var_count == 2);
    }
}

TEST_CASE("enumerate_io") {
    SUBCASE("identity program") {
        const ParseResult res = parse("return x");
        REQUIRE(res.ok());
        const IoTable io = enumerate_io(res.ast);
        CHECK(io.all_within_budget);
        CHECK(!io.constant_output);
        for (int x = 0; x < kNumInputs; ++x) {
            CHECK(io.outputs[static_cast<size_t>(x)] == x);
        }
    }
    SUBCASE("constant program") {
        const ParseResult res = parse("return 3");
        REQUIRE(res.ok());
        const IoTable io = enumerate_io(res.ast);
        CHECK(io.constant_output);
        for (int x = 0; x < kNumInputs; ++x) {
            CHECK(io.outputs[static_cast<size_t>(x)] == 3);
        }
    }
    SUBCASE("budget overrun is reported") {
        std::string four =
            "repeat 8 {\nrepeat 8 {\nrepeat 8 {\nrepeat 8 {\nv0 = v0 + 1\n}\n}\n}\n}\nreturn v0";
        const ParseResult res = parse(four);
        REQUIRE(res.ok());
        CHECK(!enumerate_io(res.ast).all_within_budget);
    }
}

TEST_CASE("pretty-print round trip over the corpus") {
    for (const char* text : kCorpus) {
        const ParseResult first = parse(text);
        REQUIRE(first.ok());
        const std::string printed = pretty_print(first.ast);
        const ParseResult second = parse(printed);
        REQUIRE(second.ok());
        CHECK(ast_equal(first.ast, second.ast));
        // canonical form is a fixed point
        CHECK(pretty_print(second.ast) == printed);
    }
}

TEST_CASE("interpretation is deterministic over the corpus") {
    for (const char* text : kCorpus) {
        const ParseResult res = parse(text);
        REQUIRE(res.ok());
        for (int x = 0; x < kNumInputs; ++x) {
            const EvalResult a = interpret(res.ast, x);
            const EvalResult b = interpret(res.ast, x);
            CHECK(a.budget_exceeded == b.budget_exceeded);
            CHECK(a.output == b.output);
            CHECK(a.ops_used == b.ops_used);
        }
    }
}

TEST_CASE("wrapping the body in a repeat bumps depth and cyclomatic") {
    for (const char* text : kCorpus) {
        const ParseResult res = parse(text);
        REQUIRE(res.ok());
        const NodeRef prog = res.ast;

        // move statements and the return expression into 'repeat 1 { ...;
        // v3 = <ret expr> }; return v3'
        std::vector<NodeRef> inner(prog->kids.begin(), prog->kids.end() - 1);
        const NodeRef ret = prog->kids.back();
        inner.push_back(make_node(NodeKind::assign, 4, {ret->kids[0]}));
        std::vector<NodeRef> outer;
        outer.push_back(make_node(NodeKind::repeat, 1, std::move(inner)));
        outer.push_back(make_node(NodeKind::ret, 0, {make_node(NodeKind::var, 4)}));
        const NodeRef wrapped = make_node(NodeKind::prog, 0, std::move(outer));

        const ComplexityDescriptor before = complexity(prog);
        const ComplexityDescriptor after = complexity(wrapped);
        CHECK(after.ast_depth >= before.ast_depth + 1);
        CHECK(after.cyclomatic == before.cyclomatic + 1);
    }
}

TEST_CASE("grammar tables") {
    using namespace grammar;
    CHECK(num_productions(Nt::prog) == 1);
    CHECK(num_productions(Nt::stmt_list) == 2);
    CHECK(num_productions(Nt::stmt) == 14);
    CHECK(num_productions(Nt::expr) == 4);
    CHECK(num_productions(Nt::term) == 16);
    CHECK(num_productions(Nt::cond) == 3);

    // at budget 0 only leaf productions survive
    CHECK(production_allowed(Nt::stmt_list, 0, 0));
    CHECK(!production_allowed(Nt::stmt_list, 1, 0));
    CHECK(production_allowed(Nt::expr, 0, 0));
    CHECK(!production_allowed(Nt::expr, 1, 0));
    CHECK(production_allowed(Nt::term, 0, 0));
    CHECK(!production_allowed(Nt::term, 15, 0));

    // if statements need room for their condition
    CHECK(!production_allowed(Nt::stmt, 4, 1));
    CHECK(production_allowed(Nt::stmt, 4, 2));
    CHECK(production_allowed(Nt::stmt, 0, 1));   // assign
    CHECK(production_allowed(Nt::stmt, 6, 1));   // repeat 1

    CHECK(context_index(Nt::prog, 0) == 0);
    CHECK(context_index(Nt::term, 2) == 4 * 4 + 2);
    CHECK(context_index(Nt::cond, 11) == 5 * 4 + 3);  // bucket saturates at 3
}
