#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ultra/ball_tree.hpp"
#include "ultra/canonical.hpp"

using namespace ultra;
using namespace testutil;

TEST_CASE("matrix shape validation") {
    CHECK_THROWS_AS(FiniteSpace::from_matrix({"a", "b"}, {{0, 1}}), MalformedInputError);
    CHECK_THROWS_AS(FiniteSpace::from_matrix({"a", "b"}, {{0, 1}, {2, 0}}), MalformedInputError);
    CHECK_THROWS_AS(FiniteSpace::from_matrix({"a", "b"}, {{0, -1}, {-1, 0}}), MalformedInputError);
    CHECK_THROWS_AS(FiniteSpace::from_matrix({"a", "b"}, {{1, 1}, {1, 0}}), MalformedInputError);
    CHECK_THROWS_AS(FiniteSpace::from_matrix({"a", "b"}, {{0, 0}, {0, 0}}), MalformedInputError);
}

TEST_CASE("distance interning") {
    auto s = from_rows({"a", "b", "c"}, {{0, 1, 2}, {1, 0, 2}, {2, 2, 0}});
    CHECK(s.n() == 3);
    CHECK(s.d(0, 1) == Rational(1));
    CHECK(s.dcode(0, 1) == 1);
    CHECK(s.dcode(0, 2) == 2);
    CHECK(s.levels() == std::vector<Rational>{Rational(0), Rational(1), Rational(2)});
    CHECK(s.distance_set() == std::vector<Rational>{Rational(1), Rational(2)});
}

TEST_CASE("ultrametric verdict and violating triple") {
    auto good = from_rows({"a", "b", "c"}, {{0, 1, 2}, {1, 0, 2}, {2, 2, 0}});
    CHECK(!check_ultrametric(good).has_value());

    auto bad = from_rows({"a", "b", "c"}, {{0, 1, 5}, {1, 0, 1}, {5, 1, 0}});
    auto v = check_ultrametric(bad);
    REQUIRE(v.has_value());
    // the reported triple really violates the law on the reported pairs
    CHECK(bad.d(v->x, v->z) > std::max(bad.d(v->x, v->y), bad.d(v->y, v->z)));
}

TEST_CASE("induced subspace") {
    auto s = from_rows({"a", "b", "c", "d"},
                       {{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 2}, {3, 3, 2, 0}});
    auto sub = s.induced({0, 2, 3});
    CHECK(sub.n() == 3);
    CHECK(sub.label(0) == "a");
    CHECK(sub.d(0, 1) == Rational(3));
    CHECK(sub.d(1, 2) == Rational(2));
    // the level table is re-interned: distance 1 is gone
    CHECK(sub.levels() == std::vector<Rational>{Rational(0), Rational(2), Rational(3)});
}

TEST_CASE("ball tree structure") {
    auto s = from_rows({"a", "b", "c", "d"},
                       {{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 2}, {3, 3, 2, 0}});
    BallTree t = build_ball_tree(s);
    CHECK(t.n_points() == 4);
    CHECK(t.level_of(t.root) == Rational(3));
    // every point has a leaf, leaves carry singleton pts
    for (int p = 0; p < 4; ++p) {
        int v = t.point_leaf[p];
        CHECK(t.nodes[v].point == p);
        CHECK(t.nodes[v].pts == std::vector<int>{p});
    }
    // the matrix rebuilt from the tree equals the input
    auto back = tree_to_matrix(t, s.labels());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(back.d(i, j) == s.d(i, j));
}

TEST_CASE("ball_around radius semantics") {
    auto s = from_rows({"a", "b", "c"}, {{0, 1, 2}, {1, 0, 2}, {2, 2, 0}});
    BallTree t = build_ball_tree(s);
    // open balls: radius must exceed a distance to absorb it
    CHECK(t.nodes[t.ball_around(0, 1)].pts == std::vector<int>{0});
    CHECK(t.nodes[t.ball_around(0, 2)].pts == std::vector<int>{0, 1});
    CHECK(t.nodes[t.ball_around(0, 3)].pts == std::vector<int>{0, 1, 2});
}

TEST_CASE("tree round trip over the exhaustive family") {
    for (const auto& s : exhaustive_family(5)) {
        BallTree t = build_ball_tree(s);
        auto back = tree_to_matrix(t, s.labels());
        for (int i = 0; i < s.n(); ++i)
            for (int j = 0; j < s.n(); ++j) REQUIRE(back.d(i, j) == s.d(i, j));
    }
}

TEST_CASE("canonical code is a relabeling invariant") {
    auto s = from_rows({"a", "b", "c", "d"},
                       {{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 2}, {3, 3, 2, 0}});
    std::vector<int> perm{2, 0, 3, 1};
    std::vector<std::vector<Rational>> m(4, std::vector<Rational>(4, Rational(0)));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) m[i][j] = s.d(perm[i], perm[j]);
    auto shuffled = FiniteSpace::from_matrix({"w", "x", "y", "z"}, m);
    CHECK(canonical_code(s) == canonical_code(shuffled));
}

TEST_CASE("canonical codes separate the exhaustive family") {
    auto fam = exhaustive_family(5);
    std::set<std::string> codes;
    for (const auto& s : fam) codes.insert(canonical_code(s));
    // the family has one representative per relabeling class, and codes
    // embed the level values, so all codes must be distinct
    CHECK(codes.size() == fam.size());
}

TEST_CASE("code equality matches brute-force isometry on relabelings") {
    std::mt19937 rng(7);
    for (const auto& s : exhaustive_family(4)) {
        std::vector<int> perm(s.n());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::vector<Rational>> m(s.n(), std::vector<Rational>(s.n(), Rational(0)));
        for (int i = 0; i < s.n(); ++i)
            for (int j = 0; j < s.n(); ++j)
                if (i != j) m[i][j] = s.d(perm[i], perm[j]);
        std::vector<std::string> labels;
        for (int i = 0; i < s.n(); ++i) labels.push_back("q" + std::to_string(i));
        auto t = FiniteSpace::from_matrix(labels, m);
        CHECK(canonical_code(s) == canonical_code(t));
        CHECK(brute_isometric(s, t));
    }
}

TEST_CASE("fd family validation") {
    auto s = from_rows({"a", "b", "c", "d"},
                       {{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 2}, {3, 3, 2, 0}});
    BallTree t = build_ball_tree(s);
    int ab = t.ball_around(0, 2);
    int cd = t.ball_around(2, 3);
    CHECK_NOTHROW(validate_fd_family(t, {ab, cd}));
    CHECK_NOTHROW(validate_fd_family(t, {}));
    // nested balls are not disjoint
    CHECK_THROWS_AS(validate_fd_family(t, {ab, t.point_leaf[0]}), PreconditionError);
}
