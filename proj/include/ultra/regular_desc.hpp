#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ultra/ball_tree.hpp"
#include "ultra/canonical.hpp"
#include "ultra/rational.hpp"
#include "ultra/space.hpp"

namespace ultra {

// ---------------------------------------------------------------------------
// Regular space descriptions
// ---------------------------------------------------------------------------
//
// A description is a finite type graph presenting a (usually infinite)
// ultrametric space as the unfolding of ball types.  Each type carries a
// level: a constant rational, or a position on a geometric ladder.
// A descending ladder (0 < ratio < 1) steps base*ratio^k downward as the
// unfolding deepens; an ascending ladder (ratio > 1) is a spine whose top
// grows with the truncation depth and whose index decreases toward the
// base going down.  Edges carry multiplicities in {1,2,...} or omega.
//
// Supported fragment (validated; anything else is rejected up front):
//   * at most one descending and one ascending ladder;
//   * ascending-ladder types are only reachable from ascending-ladder
//     types, and the root must be ascending-typed if the ladder is used;
//   * a type with no outgoing edges is a point generator and must have
//     constant level 0; every other constant level is positive;
//   * a `dense` descending ladder declares that the level set is
//     order-dense and upward-unbounded (a stand-in for rational level
//     sets); truncations sample the geometric levels.

struct LadderSpec {
    std::string id;
    Rational base;  // > 0
    Rational ratio; // descending: in (0,1); ascending: > 1
    bool dense = false;

    bool ascending() const { return ratio > 1; }
};

struct DescType {
    std::string id;
    std::optional<Rational> const_level; // set iff not ladder-typed
    std::optional<std::string> ladder;   // set iff ladder-typed
};

struct DescEdge {
    int from = -1;
    int to = -1;
    uint64_t mult = 1; // ignored when omega
    bool omega = false;
};

struct RegularSpaceDesc {
    std::vector<DescType> types;
    std::vector<DescEdge> edges;
    std::vector<LadderSpec> ladders;
    int root = -1;

    int type_index(const std::string& id) const {
        for (size_t i = 0; i < types.size(); ++i)
            if (types[i].id == id) return static_cast<int>(i);
        return -1;
    }
    int ladder_index(const std::string& id) const {
        for (size_t i = 0; i < ladders.size(); ++i)
            if (ladders[i].id == id) return static_cast<int>(i);
        return -1;
    }
    std::vector<int> out_edges(int type) const {
        std::vector<int> out;
        for (size_t e = 0; e < edges.size(); ++e)
            if (edges[e].from == type) out.push_back(static_cast<int>(e));
        return out;
    }
    bool is_point_type(int type) const { return out_edges(type).empty(); }
    bool is_ascending_type(int type) const {
        if (!types[type].ladder) return false;
        return ladders[ladder_index(*types[type].ladder)].ascending();
    }
    bool is_descending_type(int type) const {
        if (!types[type].ladder) return false;
        return !ladders[ladder_index(*types[type].ladder)].ascending();
    }
    bool is_dense_type(int type) const {
        if (!types[type].ladder) return false;
        return ladders[ladder_index(*types[type].ladder)].dense;
    }
};

inline void validate_desc(const RegularSpaceDesc& d) {
    if (d.types.empty()) throw MalformedInputError("description has no types");
    if (d.root < 0 || d.root >= static_cast<int>(d.types.size()))
        throw MalformedInputError("description root out of range");
    std::set<std::string> ids;
    for (const auto& t : d.types)
        if (!ids.insert(t.id).second)
            throw MalformedInputError("duplicate type id '" + t.id + "'");
    std::set<std::string> lids;
    int n_desc = 0, n_asc = 0;
    for (const auto& l : d.ladders) {
        if (!lids.insert(l.id).second)
            throw MalformedInputError("duplicate ladder id '" + l.id + "'");
        if (l.base <= 0) throw MalformedInputError("ladder '" + l.id + "' base must be positive");
        if (l.ratio <= 0 || l.ratio == 1)
            throw MalformedInputError("ladder '" + l.id + "' ratio must be positive and not 1");
        (l.ascending() ? n_asc : n_desc)++;
        if (l.dense && l.ascending())
            throw MalformedInputError("dense flag is only supported on descending ladders");
    }
    if (n_desc > 1 || n_asc > 1)
        throw MalformedInputError("at most one descending and one ascending ladder are supported");

    for (const auto& t : d.types) {
        if (t.const_level.has_value() == t.ladder.has_value())
            throw MalformedInputError("type '" + t.id +
                                      "' must have exactly one of const level / ladder");
        if (t.ladder && d.ladder_index(*t.ladder) < 0)
            throw MalformedInputError("type '" + t.id + "' names unknown ladder '" + *t.ladder +
                                      "'");
    }
    for (const auto& e : d.edges) {
        if (e.from < 0 || e.from >= static_cast<int>(d.types.size()) || e.to < 0 ||
            e.to >= static_cast<int>(d.types.size()))
            throw MalformedInputError("edge endpoint out of range");
        if (!e.omega && e.mult < 1) throw MalformedInputError("edge multiplicity must be >= 1");
    }
    for (size_t ti = 0; ti < d.types.size(); ++ti) {
        int t = static_cast<int>(ti);
        if (d.is_point_type(t)) {
            if (!d.types[t].const_level || *d.types[t].const_level != 0)
                throw MalformedInputError("point type '" + d.types[t].id +
                                          "' (no outgoing edges) must have level 0");
        } else if (d.types[t].const_level && *d.types[t].const_level <= 0) {
            throw MalformedInputError("non-point type '" + d.types[t].id +
                                      "' must have positive level");
        }
    }
    // ascending region shape
    bool root_asc = d.is_ascending_type(d.root);
    for (const auto& e : d.edges) {
        if (d.is_ascending_type(e.to) && !d.is_ascending_type(e.from))
            throw MalformedInputError(
                "ascending-ladder types may only be entered from ascending-ladder types");
    }
    for (size_t ti = 0; ti < d.types.size(); ++ti)
        if (d.is_ascending_type(static_cast<int>(ti)) && !root_asc)
            throw MalformedInputError(
                "descriptions using an ascending ladder must have an ascending root");

    // Unary unfoldings would create balls indistinguishable from their
    // unique child as point sets; require branching at every phase.
    for (size_t ti = 0; ti < d.types.size(); ++ti) {
        int t = static_cast<int>(ti);
        if (d.is_point_type(t)) continue;
        uint64_t asc_m = 0, other_m = 0;
        bool asc_inf = false, other_inf = false;
        for (int e : d.out_edges(t)) {
            const auto& ed = d.edges[e];
            if (d.is_ascending_type(ed.to)) {
                asc_inf = asc_inf || ed.omega;
                asc_m += ed.omega ? 0 : ed.mult;
            } else {
                other_inf = other_inf || ed.omega;
                other_m += ed.omega ? 0 : ed.mult;
            }
        }
        auto ge2 = [](uint64_t m, bool inf) { return inf || m >= 2; };
        if (d.is_ascending_type(t)) {
            if (!ge2(asc_m, asc_inf))
                throw MalformedInputError("type '" + d.types[t].id +
                                          "' must branch at least 2-fold along the spine");
            if ((other_m > 0 || other_inf) && !ge2(other_m, other_inf))
                throw MalformedInputError("type '" + d.types[t].id +
                                          "' must branch at least 2-fold at spine index 0");
        } else if (!ge2(asc_m + other_m, asc_inf || other_inf)) {
            throw MalformedInputError("type '" + d.types[t].id +
                                      "' must have total outgoing multiplicity >= 2");
        }
    }

    // Static level monotonicity where it is phase-independent.  Constant
    // levels under a descending ladder would eventually collide with the
    // ladder, so they are rejected outright (point types aside).
    auto min_entry_level = [&](int t) -> Rational {
        if (d.types[t].const_level) return *d.types[t].const_level;
        const auto& l = d.ladders[d.ladder_index(*d.types[t].ladder)];
        return l.base; // descending enters at base; ascending bottoms at base
    };
    for (const auto& e : d.edges) {
        if (d.is_descending_type(e.from)) {
            if (!d.is_descending_type(e.to) && !d.is_point_type(e.to))
                throw MalformedInputError(
                    "descending-ladder types may only unfold to the same ladder or points");
        }
        if (d.types[e.from].const_level && !d.is_point_type(e.to)) {
            if (min_entry_level(e.to) >= *d.types[e.from].const_level)
                throw MalformedInputError("edge " + d.types[e.from].id + " -> " + d.types[e.to].id +
                                          " does not decrease levels");
        }
        if (d.is_ascending_type(e.from) && !d.is_ascending_type(e.to) && !d.is_point_type(e.to)) {
            const auto& l = d.ladders[d.ladder_index(*d.types[e.from].ladder)];
            if (min_entry_level(e.to) >= l.base)
                throw MalformedInputError("edge " + d.types[e.from].id + " -> " + d.types[e.to].id +
                                          " does not stay below the spine base");
        }
    }
}

// Structural equivalence of types: partition refinement until two types in
// one class have the same level expression and matching edge multiplicity
// multisets into every class.  Equivalent types unfold to isomorphic
// subtrees (at equal ladder phase).
inline std::vector<int> type_equivalence(const RegularSpaceDesc& d) {
    const int n = static_cast<int>(d.types.size());
    std::vector<int> cls(n);
    {
        std::map<std::string, int> seed;
        for (int t = 0; t < n; ++t) {
            std::string key;
            if (d.types[t].const_level)
                key = "c" + rat_str(*d.types[t].const_level);
            else
                key = "l" + *d.types[t].ladder;
            auto [it, fresh] = seed.emplace(key, static_cast<int>(seed.size()));
            (void)fresh;
            cls[t] = it->second;
        }
    }
    for (;;) {
        std::map<std::pair<int, std::vector<std::pair<int, std::string>>>, int> next;
        std::vector<int> out(n);
        for (int t = 0; t < n; ++t) {
            std::vector<std::pair<int, std::string>> sig;
            for (int e : d.out_edges(t)) {
                const auto& ed = d.edges[e];
                sig.emplace_back(cls[ed.to], ed.omega ? "w" : std::to_string(ed.mult));
            }
            std::sort(sig.begin(), sig.end());
            auto [it, fresh] =
                next.emplace(std::make_pair(cls[t], std::move(sig)), static_cast<int>(next.size()));
            (void)fresh;
            out[t] = it->second;
        }
        if (out == cls) return cls;
        cls = std::move(out);
    }
}

// ---------------------------------------------------------------------------
// Truncation
// ---------------------------------------------------------------------------

// Cardinal that is either an exact finite count or omega.
struct Card {
    bool omega = false;
    BigInt count = 0;

    static Card fin(BigInt c) { return {false, std::move(c)}; }
    static Card inf() { return {true, 0}; }
    bool at_least(int k) const { return omega || count >= k; }
    bool is_one() const { return !omega && count == 1; }
    Card& operator*=(const Card& o) {
        if (o.omega) omega = true;
        if (!omega) count *= o.count;
        return *this;
    }
    std::string str() const { return omega ? "omega" : count.str(); }
};

// Finite unfolding of a description.  Beyond the finite space and its
// tree, every node remembers which type and ladder phase produced it and
// how its children group into sibling classes, together with the class
// cardinalities in the full (untruncated) space.  All description-aware
// reasoning downstream reads these tables.
struct Truncation {
    RegularSpaceDesc desc;
    int depth = 0;
    int width = 0;

    FiniteSpace space;
    BallTree tree;
    std::vector<std::string> codes; // canonical codes per node

    std::vector<int> node_type;       // type per node
    std::vector<long> node_phase;     // ladder index, -1 when const-typed
    std::vector<int> node_edge;       // edge position that spawned the node (-1 for root)
    std::vector<long> node_inst;      // instance within that edge
    std::vector<char> node_cut;       // 1 when the node is a point only because depth ran out

    // Sibling class of every non-root node: nodes share a class id iff
    // they are children of the same parent and interchangeable in the full
    // space.  class_card is the true cardinality of the class there.
    std::vector<int> node_class;            // -1 for root
    std::vector<Card> class_card;           // by class id
    std::vector<std::vector<int>> class_members; // truncation members by class id
    std::vector<char> class_dense;          // class sits in a dense ladder region

    // When the root continues upward in the full space (ascending spine),
    // the whole truncation is one member of an unbounded tower; the class
    // a root-sibling would form has this cardinality per step.
    bool has_spine_above = false;
    Card spine_step_card;

    int n_points() const { return space.n(); }

    std::vector<std::pair<int, long>> path_of(int node) const {
        std::vector<std::pair<int, long>> path;
        for (int v = node; tree.nodes[v].parent != -1; v = tree.nodes[v].parent)
            path.emplace_back(node_edge[v], node_inst[v]);
        std::reverse(path.begin(), path.end());
        return path;
    }
};

namespace detail {

struct UnfoldNode {
    int type;
    long phase; // ladder index, -1 for const
    int depth;
    int edge = -1;
    long inst = -1;
    Rational level;
    bool is_point = false;
    bool cut = false;
    std::vector<int> children; // indices into the build arena
};

} // namespace detail

inline Truncation truncate_desc(const RegularSpaceDesc& d, int depth, int width) {
    validate_desc(d);
    if (depth < 0) throw PreconditionError("truncation depth must be >= 0");
    if (width < 1) throw PreconditionError("truncation width must be >= 1");
    for (const auto& e : d.edges)
        if (e.omega && width < 2)
            throw PreconditionError("descriptions with omega edges need truncation width >= 2");

    std::vector<detail::UnfoldNode> arena;

    auto root_level = [&]() -> std::pair<Rational, long> {
        if (d.types[d.root].const_level) return {*d.types[d.root].const_level, -1};
        const auto& l = d.ladders[d.ladder_index(*d.types[d.root].ladder)];
        if (!l.ascending()) return {l.base, 0};
        // The spine bottoms at index 0 exactly at the cut when nothing
        // hangs below it; otherwise the depth budget is split so the
        // lower regions get room to unfold.
        long tail = 0;
        bool has_down = false;
        for (size_t ti = 0; ti < d.types.size(); ++ti) {
            int t = static_cast<int>(ti);
            if (d.types[t].const_level && !d.is_point_type(t)) tail += 1;
            if (d.is_descending_type(t)) has_down = true;
        }
        if (has_down) tail += (depth - 1) / 2;
        long idx = depth - 1 - tail;
        if (idx < 0) idx = 0;
        return {l.base * rat_pow(l.ratio, static_cast<unsigned>(idx)), idx};
    };

    auto expand = [&](auto&& self, int a) -> void {
        // copy what we need: arena reallocates during the loop below
        const int nd_type = arena[a].type;
        const long nd_phase = arena[a].phase;
        const int nd_depth = arena[a].depth;
        const Rational nd_level = arena[a].level;
        const std::string nd_ladder =
            d.types[nd_type].ladder ? *d.types[nd_type].ladder : std::string{};

        if (nd_depth >= depth) {
            arena[a].is_point = true;
            arena[a].cut = !d.is_point_type(nd_type);
            return;
        }
        if (d.is_point_type(nd_type)) {
            arena[a].is_point = true;
            return;
        }
        const bool from_asc = d.is_ascending_type(nd_type);
        const bool asc_bottom = from_asc && nd_phase == 0;
        // Ascending types fire non-ascending edges only at index 0.
        // An ascending self-step at index 0 produces leaf points, but only
        // when the type has no other index-0 edges to hand the ball to.
        bool has_other_idx0 = false;
        if (asc_bottom)
            for (int e : d.out_edges(nd_type))
                if (!d.is_ascending_type(d.edges[e].to)) has_other_idx0 = true;

        const auto out = d.out_edges(nd_type);
        for (size_t pos = 0; pos < out.size(); ++pos) {
            const auto& ed = d.edges[out[pos]];
            const bool to_asc = d.is_ascending_type(ed.to);
            if (from_asc && !asc_bottom && !to_asc) continue; // fires at index 0 only
            if (asc_bottom && to_asc && has_other_idx0) continue;

            const uint64_t count = ed.omega ? static_cast<uint64_t>(width) : ed.mult;
            for (uint64_t i = 0; i < count; ++i) {
                detail::UnfoldNode ch;
                ch.type = ed.to;
                ch.depth = nd_depth + 1;
                ch.edge = static_cast<int>(pos);
                ch.inst = static_cast<long>(i);
                if (d.types[ed.to].const_level) {
                    ch.phase = -1;
                    ch.level = *d.types[ed.to].const_level;
                } else {
                    const auto& l = d.ladders[d.ladder_index(*d.types[ed.to].ladder)];
                    if (l.ascending()) {
                        if (asc_bottom) {
                            // spine exhausted: the step lands on points
                            ch.phase = -1;
                            ch.level = 0;
                            ch.is_point = true;
                        } else {
                            ch.phase = nd_phase - 1;
                            ch.level = l.base * rat_pow(l.ratio, static_cast<unsigned>(ch.phase));
                        }
                    } else {
                        ch.phase = (!nd_ladder.empty() && nd_ladder == *d.types[ed.to].ladder)
                                       ? nd_phase + 1
                                       : 0;
                        ch.level = l.base * rat_pow(l.ratio, static_cast<unsigned>(ch.phase));
                    }
                }
                if (!ch.is_point && ch.level >= nd_level)
                    throw MalformedInputError("unfolding violates level monotonicity at type '" +
                                              d.types[ed.to].id + "'");
                arena.push_back(std::move(ch));
                int cid = static_cast<int>(arena.size()) - 1;
                arena[a].children.push_back(cid);
                if (!arena[cid].is_point) self(self, cid);
            }
        }
        if (arena[a].children.empty()) {
            arena[a].is_point = true;
            arena[a].cut = true;
        }
    };

    {
        detail::UnfoldNode root;
        root.type = d.root;
        root.depth = 0;
        auto [lvl, phase] = root_level();
        root.level = lvl;
        root.phase = phase;
        arena.push_back(std::move(root));
        if (depth == 0) {
            arena[0].is_point = true;
            arena[0].cut = !d.is_point_type(d.root);
        } else {
            expand(expand, 0);
        }
    }

    // ---- assemble the ball tree ----
    Truncation tr;
    tr.desc = d;
    tr.depth = depth;
    tr.width = width;

    BallTree& t = tr.tree;
    std::map<Rational, uint16_t> intern;
    intern[Rational{0}] = 0;
    for (const auto& nd : arena)
        if (!nd.is_point) intern.emplace(nd.level, 0);
    {
        uint16_t next = 0;
        for (auto& [lvl, c] : intern) {
            c = next++;
            t.levels.push_back(lvl);
        }
    }

    std::vector<std::string> labels;
    std::vector<int> arena_to_node(arena.size(), -1);

    auto emit = [&](auto&& self, int a, std::vector<std::string>& comps) -> int {
        const auto& nd = arena[a];
        if (nd.is_point) {
            BallTree::Node leaf;
            leaf.point = static_cast<int>(labels.size());
            std::string lab;
            for (size_t i = 0; i < comps.size(); ++i) {
                if (i) lab += ".";
                lab += comps[i];
            }
            if (lab.empty()) lab = "o";
            labels.push_back(lab);
            leaf.pts = {leaf.point};
            t.nodes.push_back(std::move(leaf));
            int id = static_cast<int>(t.nodes.size()) - 1;
            arena_to_node[a] = id;
            return id;
        }
        std::vector<int> kids;
        for (int c : nd.children) {
            const auto& cn = arena[c];
            std::string comp;
            if (d.out_edges(nd.type).size() > 1)
                comp = "e" + std::to_string(cn.edge) + "_" + std::to_string(cn.inst);
            else
                comp = std::to_string(cn.inst);
            comps.push_back(comp);
            kids.push_back(self(self, c, comps));
            comps.pop_back();
        }
        BallTree::Node node;
        node.level_code = intern.at(nd.level);
        node.children = kids;
        for (int k : kids) {
            const auto& kn = t.nodes[k];
            node.pts.insert(node.pts.end(), kn.pts.begin(), kn.pts.end());
        }
        std::sort(node.pts.begin(), node.pts.end());
        t.nodes.push_back(std::move(node));
        int id = static_cast<int>(t.nodes.size()) - 1;
        for (int k : kids) t.nodes[k].parent = id;
        arena_to_node[a] = id;
        return id;
    };
    {
        std::vector<std::string> comps;
        t.root = emit(emit, 0, comps);
    }
    t.point_leaf.assign(labels.size(), -1);
    for (size_t v = 0; v < t.nodes.size(); ++v)
        if (t.nodes[v].children.empty()) t.point_leaf[t.nodes[v].point] = static_cast<int>(v);

    // per-node metadata
    tr.node_type.assign(t.nodes.size(), -1);
    tr.node_phase.assign(t.nodes.size(), -1);
    tr.node_edge.assign(t.nodes.size(), -1);
    tr.node_inst.assign(t.nodes.size(), -1);
    tr.node_cut.assign(t.nodes.size(), 0);
    for (size_t a = 0; a < arena.size(); ++a) {
        int v = arena_to_node[a];
        tr.node_type[v] = arena[a].type;
        tr.node_phase[v] = arena[a].phase;
        tr.node_edge[v] = arena[a].edge;
        tr.node_inst[v] = arena[a].inst;
        tr.node_cut[v] = arena[a].cut ? 1 : 0;
    }

    tr.space = tree_to_matrix(t, labels);
    // tree_to_matrix compacted the level table; rebuild tree level codes on
    // the compacted table so tree and space agree.
    {
        std::map<Rational, uint16_t> re;
        for (size_t c = 0; c < tr.space.levels().size(); ++c)
            re[tr.space.levels()[c]] = static_cast<uint16_t>(c);
        for (auto& node : t.nodes) {
            if (node.children.empty()) {
                node.level_code = 0;
                continue;
            }
            auto it = re.find(t.levels[node.level_code]);
            if (it == re.end())
                throw Error("internal: truncation level not realized by any point pair");
            node.level_code = it->second;
        }
        t.levels = tr.space.levels();
    }

    tr.codes = subtree_codes(t);
    canonicalize(t, tr.codes);

    // ---- sibling classes with true cardinalities ----
    auto equiv = type_equivalence(d);
    tr.node_class.assign(t.nodes.size(), -1);
    for (size_t v = 0; v < t.nodes.size(); ++v) {
        const auto& node = t.nodes[v];
        if (node.children.empty()) continue;
        // group children by (type equivalence, phase, code)
        std::map<std::tuple<int, long, std::string>, std::vector<int>> groups;
        for (int c : node.children)
            groups[{equiv[tr.node_type[c]], tr.node_phase[c], tr.codes[c]}].push_back(c);
        for (auto& [key, members] : groups) {
            Card card = Card::fin(0);
            std::set<int> edges_in;
            for (int m : members) edges_in.insert(tr.node_edge[m]);
            const auto out = d.out_edges(tr.node_type[v]);
            for (int pos : edges_in) {
                const auto& ed = d.edges[out[pos]];
                if (ed.omega)
                    card = Card::inf();
                else if (!card.omega)
                    card.count += ed.mult;
            }
            bool dense = false;
            for (int m : members)
                if (d.is_dense_type(tr.node_type[m])) dense = true;
            int cid = static_cast<int>(tr.class_card.size());
            tr.class_card.push_back(card);
            std::sort(members.begin(), members.end(),
                      [&](int a, int b) { return t.nodes[a].pts < t.nodes[b].pts; });
            tr.class_members.push_back(members);
            tr.class_dense.push_back(dense ? 1 : 0);
            for (int m : members) tr.node_class[m] = cid;
        }
    }

    // spine continuation above the root
    tr.has_spine_above = false;
    tr.spine_step_card = Card::fin(1);
    if (d.is_ascending_type(d.root)) {
        tr.has_spine_above = true;
        Card c = Card::fin(0);
        for (int e : d.out_edges(d.root)) {
            const auto& ed = d.edges[e];
            if (d.is_ascending_type(ed.to)) {
                if (ed.omega)
                    c = Card::inf();
                else if (!c.omega)
                    c.count += ed.mult;
            }
        }
        tr.spine_step_card = c;
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Urysohn-type descriptions
// ---------------------------------------------------------------------------

// Level set descriptor: a finite descending list, and/or one geometric
// tail on each side.  `up` grows with truncation depth; `down` refines
// toward 0; `dense_down` marks the down ladder as order-dense.
struct LevelSetDesc {
    std::vector<Rational> finite; // strictly descending
    std::optional<std::pair<Rational, Rational>> down; // (base, ratio<1)
    std::optional<std::pair<Rational, Rational>> up;   // (base, ratio>1)
    bool dense_down = false;
};

// Description of X_R (n omega) or X^n_R: every ball of each level splits
// into exactly n balls of the next level down.
inline RegularSpaceDesc urysohn_desc(const LevelSetDesc& ls, std::optional<uint64_t> n) {
    // validate the descriptor
    for (size_t i = 0; i + 1 < ls.finite.size(); ++i)
        if (!(ls.finite[i] > ls.finite[i + 1]))
            throw PreconditionError("finite level list must be strictly descending");
    for (const auto& r : ls.finite)
        if (r <= 0) throw PreconditionError("levels must be positive");
    if (ls.down) {
        if (ls.down->first <= 0 || ls.down->second <= 0 || ls.down->second >= 1)
            throw PreconditionError("down ladder needs base > 0 and ratio in (0,1)");
        if (!ls.finite.empty() && ls.down->first >= ls.finite.back())
            throw PreconditionError("down ladder must start below the finite levels");
    }
    if (ls.up) {
        if (ls.up->first <= 0 || ls.up->second <= 1)
            throw PreconditionError("up spine needs base > 0 and ratio > 1");
        if (!ls.finite.empty() && ls.up->first <= ls.finite.front())
            throw PreconditionError("up spine must start above the finite levels");
        if (ls.down && ls.finite.empty() && ls.up->first <= ls.down->first)
            throw PreconditionError("up spine must start above the down ladder");
    }
    if (ls.finite.empty() && !ls.down && !ls.up)
        throw PreconditionError("empty level set");
    if (n && *n < 1) throw PreconditionError("multiplicity must be >= 1 or omega");

    RegularSpaceDesc d;
    auto mult_edge = [&](int from, int to) {
        DescEdge e;
        e.from = from;
        e.to = to;
        if (n) {
            e.mult = *n;
        } else {
            e.omega = true;
        }
        d.edges.push_back(e);
    };

    int up_t = -1, down_t = -1, pt_t = -1;
    std::vector<int> fin_t;
    if (ls.up) {
        d.ladders.push_back({"up", ls.up->first, ls.up->second, false});
        d.types.push_back({"u", std::nullopt, "up"});
        up_t = static_cast<int>(d.types.size()) - 1;
    }
    for (size_t i = 0; i < ls.finite.size(); ++i) {
        d.types.push_back({"t" + std::to_string(i), ls.finite[i], std::nullopt});
        fin_t.push_back(static_cast<int>(d.types.size()) - 1);
    }
    if (ls.down) {
        d.ladders.push_back({"down", ls.down->first, ls.down->second, ls.dense_down});
        d.types.push_back({"d", std::nullopt, "down"});
        down_t = static_cast<int>(d.types.size()) - 1;
    }
    // point generator, needed when the level set bottoms out
    if (!ls.down) {
        d.types.push_back({"p", Rational{0}, std::nullopt});
        pt_t = static_cast<int>(d.types.size()) - 1;
    }

    // chain the regions together
    std::vector<int> chain;
    if (up_t != -1) chain.push_back(up_t);
    for (int t : fin_t) chain.push_back(t);
    if (down_t != -1) chain.push_back(down_t);
    if (pt_t != -1) chain.push_back(pt_t);

    d.root = chain.front();
    if (up_t != -1) mult_edge(up_t, up_t);
    if (down_t != -1) mult_edge(down_t, down_t);
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
        if (chain[i] == up_t && chain[i + 1] == up_t) continue;
        mult_edge(chain[i], chain[i + 1]);
    }
    validate_desc(d);
    return d;
}

} // namespace ultra
