#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ultra/errors.hpp"
#include "ultra/space.hpp"

namespace ultra {

// Canonical rooted level tree of a finite ultrametric space.
//
// Leaves are points; an internal node is the set of its leaf points, with
// `level` its exact diameter.  The open ball of radius r around any of a
// node's points equals the node's point set for every r in
// (level, parent level]; every point of a ball is a center.  Balls of the
// space and nodes of the tree are the same thing, so ball-valued arguments
// throughout the library are node ids.
struct BallTree {
    struct Node {
        int parent = -1;
        uint16_t level_code = 0;   // index into `levels`; 0 for leaves
        int point = -1;            // leaf only
        std::vector<int> children; // empty for leaves
        std::vector<int> pts;      // sorted leaf points below this node
    };

    std::vector<Node> nodes;
    std::vector<Rational> levels; // shared level table (levels[0] == 0)
    int root = -1;
    std::vector<int> point_leaf; // point id -> leaf node id

    int n_points() const { return static_cast<int>(point_leaf.size()); }
    bool is_leaf(int v) const { return nodes[v].children.empty(); }
    const Rational& level_of(int v) const { return levels[nodes[v].level_code]; }

    // Strict containment of balls: a is a proper superset of b.
    bool is_strict_ancestor(int a, int b) const {
        for (int v = nodes[b].parent; v != -1; v = nodes[v].parent)
            if (v == a) return true;
        return false;
    }

    bool disjoint(int a, int b) const {
        return a != b && !is_strict_ancestor(a, b) && !is_strict_ancestor(b, a);
    }

    // Node whose point set is exactly the ball of radius `r_code` (a level
    // table index, radius taken in the half-open sense) around point p:
    // the highest ancestor of p's leaf with level strictly below r.
    int ball_around(int p, uint16_t r_code) const {
        int v = point_leaf[p];
        while (nodes[v].parent != -1 && nodes[nodes[v].parent].level_code < r_code)
            v = nodes[v].parent;
        return v;
    }

    // Nominal radius interval (level, parent level]; root has no upper end.
    std::pair<Rational, std::optional<Rational>> radius_interval(int v) const {
        std::optional<Rational> high;
        if (nodes[v].parent != -1) high = level_of(nodes[v].parent);
        return {level_of(v), high};
    }

    // Distance between two disjoint balls = level of their join.
    uint16_t dist_code(int a, int b) const {
        if (a == b) return 0;
        // climb to equal depth, then in lockstep
        auto depth = [&](int v) {
            int d = 0;
            while (nodes[v].parent != -1) {
                v = nodes[v].parent;
                ++d;
            }
            return d;
        };
        int da = depth(a), db = depth(b);
        while (da > db) {
            a = nodes[a].parent;
            --da;
        }
        while (db > da) {
            b = nodes[b].parent;
            --db;
        }
        if (a == b) return 0; // one contained the other: distance zero
        while (nodes[a].parent != nodes[b].parent) {
            a = nodes[a].parent;
            b = nodes[b].parent;
        }
        return nodes[nodes[a].parent].level_code;
    }
};

// Builds the level tree by recursive partitioning: the relation
// d(x,y) < diam is an equivalence on an ultrametric space, its classes are
// the maximal proper balls.  Children are created in order of smallest
// member; canonical reordering is a separate pass.
inline BallTree build_ball_tree(const FiniteSpace& s) {
    if (auto v = check_ultrametric(s))
        throw PreconditionError("space is not ultrametric: " + v->describe(s));
    if (s.n() == 0) throw PreconditionError("empty space has no ball tree");

    BallTree t;
    t.levels = s.levels();
    t.point_leaf.assign(s.n(), -1);

    auto rec = [&](auto&& self, std::vector<int> pts) -> int {
        if (pts.size() == 1) {
            BallTree::Node leaf;
            leaf.point = pts[0];
            leaf.pts = pts;
            t.nodes.push_back(std::move(leaf));
            int id = static_cast<int>(t.nodes.size()) - 1;
            t.point_leaf[pts[0]] = id;
            return id;
        }
        uint16_t diam = 0;
        for (size_t a = 0; a < pts.size(); ++a)
            for (size_t b = a + 1; b < pts.size(); ++b)
                diam = std::max(diam, s.dcode(pts[a], pts[b]));
        std::vector<int> kids;
        std::vector<char> taken(pts.size(), 0);
        for (size_t a = 0; a < pts.size(); ++a) {
            if (taken[a]) continue;
            std::vector<int> part;
            for (size_t b = a; b < pts.size(); ++b)
                if (!taken[b] && s.dcode(pts[a], pts[b]) < diam) {
                    part.push_back(pts[b]);
                    taken[b] = 1;
                }
            kids.push_back(self(self, std::move(part)));
        }
        BallTree::Node node;
        node.level_code = diam;
        node.children = kids;
        node.pts = pts;
        std::sort(node.pts.begin(), node.pts.end());
        t.nodes.push_back(std::move(node));
        int id = static_cast<int>(t.nodes.size()) - 1;
        for (int c : kids) t.nodes[c].parent = id;
        return id;
    };

    std::vector<int> all(s.n());
    for (int i = 0; i < s.n(); ++i) all[i] = i;
    t.root = rec(rec, std::move(all));
    return t;
}

// Inverse of build_ball_tree: leaf-pair distance is the level of the
// deepest common ancestor.  Unused level values are compacted away.
inline FiniteSpace tree_to_matrix(const BallTree& t, std::vector<std::string> labels) {
    const int n = t.n_points();
    if (static_cast<int>(labels.size()) != n)
        throw PreconditionError("label count does not match tree points");

    std::vector<uint16_t> raw(static_cast<size_t>(n) * n, 0);
    // fill by walking nodes: pairs split at a node get its level
    for (size_t v = 0; v < t.nodes.size(); ++v) {
        const auto& node = t.nodes[v];
        if (node.children.empty()) continue;
        for (size_t a = 0; a < node.children.size(); ++a)
            for (size_t b = a + 1; b < node.children.size(); ++b)
                for (int p : t.nodes[node.children[a]].pts)
                    for (int q : t.nodes[node.children[b]].pts) {
                        raw[static_cast<size_t>(p) * n + q] = node.level_code;
                        raw[static_cast<size_t>(q) * n + p] = node.level_code;
                    }
    }

    std::map<uint16_t, uint16_t> used;
    used[0] = 0;
    for (uint16_t c : raw) used.emplace(c, 0);
    std::vector<Rational> levels;
    levels.reserve(used.size());
    uint16_t next = 0;
    for (auto& [old_code, new_code] : used) {
        new_code = next++;
        levels.push_back(t.levels[old_code]);
    }
    for (uint16_t& c : raw) c = used.at(c);
    return FiniteSpace::from_codes(std::move(labels), std::move(levels), std::move(raw));
}

// A finite family of pairwise disjoint balls (node ids, kept sorted).
using FDFamily = std::vector<int>;

inline void validate_fd_family(const BallTree& t, const FDFamily& fam) {
    for (int v : fam)
        if (v < 0 || v >= static_cast<int>(t.nodes.size()))
            throw PreconditionError("ball id out of range: " + std::to_string(v));
    for (size_t a = 0; a < fam.size(); ++a)
        for (size_t b = a + 1; b < fam.size(); ++b) {
            if (fam[a] == fam[b])
                throw PreconditionError("family repeats ball " + std::to_string(fam[a]));
            if (!t.disjoint(fam[a], fam[b]))
                throw PreconditionError("balls " + std::to_string(fam[a]) + " and " +
                                        std::to_string(fam[b]) + " are not disjoint");
        }
}

// Graphviz rendering; internal nodes show their level, leaves their label.
inline std::string tree_to_dot(const BallTree& t, const std::vector<std::string>& labels) {
    std::ostringstream os;
    os << "digraph balltree {\n  node [shape=circle];\n";
    for (size_t v = 0; v < t.nodes.size(); ++v) {
        const auto& node = t.nodes[v];
        if (node.children.empty()) {
            os << "  n" << v << " [shape=box label=\"" << labels[node.point] << "\"];\n";
        } else {
            os << "  n" << v << " [label=\"" << rat_str(t.levels[node.level_code]) << "\"];\n";
        }
        for (int c : node.children) os << "  n" << v << " -> n" << c << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace ultra
