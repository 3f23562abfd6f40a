#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ultra/canonical.hpp"
#include "ultra/isometry.hpp"

using namespace ultra;
using namespace testutil;

TEST_CASE("group operations") {
    Isometry id = Isometry::identity(3);
    Isometry g;
    g.map = {1, 2, 0};
    CHECK(g.then(g.inverse()) == id);
    CHECK(g.inverse().then(g) == id);
    CHECK(g.then(id) == g);
    CHECK((g.then(g)).map == std::vector<int>{2, 0, 1});
}

TEST_CASE("partial isometry validation") {
    auto s = from_rows({"a", "b", "c"}, {{0, 1, 2}, {1, 0, 2}, {2, 2, 0}});
    CHECK_NOTHROW(validate_partial_isometry(s, PartialIso::of({{0, 1}, {1, 0}})));
    // a<->c does not preserve d(a,b)
    CHECK_THROWS_AS(validate_partial_isometry(s, PartialIso::of({{0, 2}, {1, 1}})),
                    PreconditionError);
    CHECK_THROWS_AS(validate_partial_isometry(s, PartialIso::of({{0, 1}, {2, 1}})),
                    PreconditionError);
}

TEST_CASE("enumeration agrees with the permutation filter") {
    for (const auto& s : exhaustive_family(5)) {
        BallTree t = build_ball_tree(s);
        auto codes = subtree_codes(t);
        auto fast = enumerate_isometries(t, codes);
        auto slow = perm_isometries(s);
        REQUIRE(fast.size() == slow.size());
        CHECK(BigInt(fast.size()) == count_isometries(t, codes));
        std::set<std::vector<int>> a, b;
        for (auto& g : fast) a.insert(g.map);
        for (auto& g : slow) b.insert(g.map);
        REQUIRE(a == b);
    }
}

TEST_CASE("point orbits agree with the group oracle") {
    for (const auto& s : exhaustive_family(5)) {
        BallTree t = build_ball_tree(s);
        auto codes = subtree_codes(t);
        auto got = point_orbits(t, codes);
        auto want = orbits_by_group(s, perm_isometries(s));
        REQUIRE(got.size() == want.size());
        std::set<std::vector<int>> ga(got.begin(), got.end()), gb(want.begin(), want.end());
        REQUIRE(ga == gb);
    }
}

TEST_CASE("enumeration budget is enforced") {
    // 8 interchangeable points: group size 8! = 40320
    std::vector<std::vector<int>> rows(8, std::vector<int>(8, 1));
    for (int i = 0; i < 8; ++i) rows[i][i] = 0;
    std::vector<std::string> labels;
    for (int i = 0; i < 8; ++i) labels.push_back("p" + std::to_string(i));
    auto s = from_rows(labels, rows);
    BallTree t = build_ball_tree(s);
    auto codes = subtree_codes(t);
    CHECK(count_isometries(t, codes) == BigInt(40320));
    IsoBudget tight;
    tight.max_points = 8;
    tight.max_count = 100;
    CHECK_THROWS_AS(enumerate_isometries(t, codes, tight), ResourceBudgetError);
}

TEST_CASE("image_ball moves balls as the isometry does") {
    auto s = from_rows({"a", "b", "c", "d"},
                       {{0, 1, 2, 2}, {1, 0, 2, 2}, {2, 2, 0, 1}, {2, 2, 1, 0}});
    BallTree t = build_ball_tree(s);
    auto codes = subtree_codes(t);
    for (const auto& g : enumerate_isometries(t, codes)) {
        for (size_t v = 0; v < t.nodes.size(); ++v) {
            int w = image_ball(t, static_cast<int>(v), g);
            // the image node holds exactly the g-images of the points
            std::vector<int> want;
            for (int p : t.nodes[v].pts) want.push_back(g(p));
            std::sort(want.begin(), want.end());
            REQUIRE(t.nodes[w].pts == want);
        }
    }
}

TEST_CASE("extendability on fixed spaces matches the brute-force oracle") {
    for (const auto& s : exhaustive_family(4)) {
        Ambient amb = Ambient::fixed(s);
        auto group = perm_isometries(s);
        int n = s.n();
        // all partial maps with domain of size <= 2
        for (int a = 0; a < n; ++a)
            for (int fa = 0; fa < n; ++fa) {
                PartialIso f1 = PartialIso::of({{a, fa}});
                bool want1 = brute_extendable(group, f1);
                CHECK(amb.extend(f1, false).class_ok == want1);
                for (int b = a + 1; b < n; ++b)
                    for (int fb = 0; fb < n; ++fb) {
                        if (fb == fa) continue;
                        if (s.dcode(a, b) != s.dcode(fa, fb)) continue;
                        PartialIso f = PartialIso::of({{a, fa}, {b, fb}});
                        bool want = brute_extendable(group, f);
                        auto r = amb.extend(f);
                        CHECK(r.class_ok == want);
                        if (r.class_ok) {
                            REQUIRE(r.witness.has_value());
                            CHECK(is_isometry(s, *r.witness));
                            CHECK((*r.witness)(a) == fa);
                            CHECK((*r.witness)(b) == fb);
                        }
                    }
            }
    }
}
