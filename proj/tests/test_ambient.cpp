#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace ultra;
using namespace testutil;

// Orbit cardinalities computed from a description window carry full-space
// semantics: a ball's orbit under the stabilizer of the pinned family, in
// the infinite space the window truncates.

TEST_CASE("spine space with multiplicity two") {
    Ambient a = Ambient::window(mk_desc(true, false, 2), 3, 3);
    int root = a.root();

    SECTION("no pins: every ball moves infinitely far along the spine") {
        for (int c : a.tree().nodes[root].children) CHECK(a.orbit_card(c, {}).omega);
    }

    SECTION("pinning a leaf freezes the divergence path") {
        int leaf = a.tree().point_leaf[0];
        FDFamily pins{leaf};
        CHECK(a.orbit_card(leaf, pins).is_one());
        // co-branches along the path to the root are forced in place
        int v = leaf;
        while (a.tree().nodes[v].parent != -1) {
            int w = a.tree().nodes[v].parent;
            for (int c : a.tree().nodes[w].children)
                if (c != v) {
                    Card oc = a.orbit_card(c, pins);
                    REQUIRE(oc.is_one());
                    // below a forced co-branch the two children swap freely
                    if (!a.tree().is_leaf(c)) {
                        Card cc = a.orbit_card(a.tree().nodes[c].children[0], pins);
                        REQUIRE(!cc.omega);
                        REQUIRE(cc.count == 2);
                    }
                }
            v = w;
        }
    }
}

TEST_CASE("descending discrete space with omega branching") {
    Ambient a = Ambient::window(mk_desc(false, false, std::nullopt), 3, 3);
    CHECK(!a.truncation().has_spine_above);
    // empty family: every orbit is a singleton or infinite
    for (size_t v = 0; v < a.tree().nodes.size(); ++v) {
        Card c = a.orbit_card(static_cast<int>(v), {});
        CHECK((c.omega || c.is_one()));
    }
    // pinning a ball leaves its omega many children free inside it
    int leaf = a.tree().point_leaf[0];
    int w = a.tree().nodes[leaf].parent;
    FDFamily pins{w};
    for (int c : a.tree().nodes[w].children) CHECK(a.orbit_card(c, pins).omega);
}

TEST_CASE("dense descending space with multiplicity two") {
    Ambient a = Ambient::window(mk_desc(false, true, 2), 3, 3);
    int root = a.root();
    // top split: exactly two balls of the full diameter swap
    for (int c : a.tree().nodes[root].children) {
        Card oc = a.orbit_card(c, {});
        REQUIRE(!oc.omega);
        REQUIRE(oc.count == 2);
    }
    // below, the dense gap gives every ball infinitely many images
    int c0 = a.tree().nodes[root].children[0];
    for (int cc : a.tree().nodes[c0].children) CHECK(a.orbit_card(cc, {}).omega);

    // pinning a depth-two ball
    int pin = a.tree().nodes[c0].children[0];
    FDFamily pins{pin};
    CHECK(a.orbit_card(pin, pins).is_one());
    for (int cc : a.tree().nodes[pin].children) CHECK(a.orbit_card(cc, pins).omega);
    for (int cc : a.tree().nodes[c0].children)
        if (cc != pin) CHECK(a.orbit_card(cc, pins).is_one());
    for (int c : a.tree().nodes[root].children)
        if (c != c0) CHECK(a.orbit_card(c, pins).is_one());
}

TEST_CASE("dense descending space with multiplicity three") {
    Ambient a = Ambient::window(mk_desc(false, true, 3), 2, 3);
    int root = a.root();
    int c0 = a.tree().nodes[root].children[0];
    FDFamily pins{c0};
    int others = 0;
    for (int c : a.tree().nodes[root].children)
        if (c != c0) {
            Card oc = a.orbit_card(c, pins);
            REQUIRE(!oc.omega);
            REQUIRE(oc.count == 2);
            ++others;
        }
    CHECK(others == 2);
}

TEST_CASE("extension and aligned swaps on the spine window") {
    Ambient a = Ambient::window(mk_desc(true, false, 2), 3, 3);
    const auto& cls = a.point_classes();
    int p = 0;
    int leaf = a.tree().point_leaf[p];
    int sib = -1;
    for (int c : a.tree().nodes[a.tree().nodes[leaf].parent].children)
        if (c != leaf && a.tree().is_leaf(c)) sib = a.tree().nodes[c].point;
    REQUIRE(sib != -1);
    CHECK(cls[p] == cls[sib]);
    PartialIso f;
    f.pairs = {{p, sib}};
    auto r = a.extend(f);
    CHECK(r.class_ok);
    REQUIRE(r.witness.has_value());
    CHECK(is_isometry(a.space(), *r.witness));
    CHECK((*r.witness)(p) == sib);

    int w = a.tree().nodes[leaf].parent;
    int w2 = -1;
    for (int c : a.tree().nodes[a.tree().nodes[w].parent].children)
        if (c != w && a.step_key(c) == a.step_key(w)) w2 = c;
    if (w2 != -1) {
        Isometry g = a.aligned_swap(w, w2);
        CHECK(is_isometry(a.space(), g));
    }
}

TEST_CASE("widening embeds the old window") {
    Ambient a = Ambient::window(mk_desc(true, false, 2), 2, 2);
    WidenMaps maps;
    Ambient b = a.widened(2, 2, &maps);
    REQUIRE(b.n() > a.n());
    REQUIRE(static_cast<int>(maps.point.size()) == a.n());
    for (int p = 0; p < a.n(); ++p) REQUIRE(maps.point[p] >= 0);
    // old distances survive the embedding
    for (int p = 0; p < a.n(); ++p)
        for (int q = 0; q < a.n(); ++q)
            REQUIRE(a.space().d(p, q) == b.space().d(maps.point[p], maps.point[q]));

    Ambient c = Ambient::window(mk_desc(false, true, 2), 2, 2);
    WidenMaps m2;
    Ambient d = c.widened(1, 1, &m2);
    REQUIRE(d.n() > c.n());
    for (int p = 0; p < c.n(); ++p)
        for (int q = 0; q < c.n(); ++q)
            REQUIRE(c.space().d(p, q) == d.space().d(m2.point[p], m2.point[q]));
}

TEST_CASE("fixed ambients cannot widen") {
    auto s = from_rows({"a", "b"}, {{0, 1}, {1, 0}});
    Ambient a = Ambient::fixed(s);
    CHECK(!a.can_widen());
    CHECK(!a.desc_backed());
    // orbit cardinality falls back to window counting
    CHECK(a.orbit_card(a.tree().point_leaf[0], {}).count == 2);
}
