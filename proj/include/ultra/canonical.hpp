#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ultra/ball_tree.hpp"

namespace ultra {

// Canonical codes in the AHU style, extended with exact levels: two nodes
// get equal codes iff their subtrees are isometric as ultrametric spaces.
// Level values are embedded as "p/q" text so codes compare across spaces.
//
// Marks attach identities to nodes (used to relativize everything to a
// pinned ball family): a marked node can only ever match a node carrying
// the same mark set, so automorphisms of the marked tree are exactly the
// isometries fixing each marked ball setwise.
struct Marks {
    std::vector<std::vector<int>> per_node; // mark ids, kept sorted

    static Marks none(const BallTree& t) {
        Marks m;
        m.per_node.resize(t.nodes.size());
        return m;
    }
    static Marks pin_family(const BallTree& t, const FDFamily& fam) {
        Marks m = none(t);
        for (size_t i = 0; i < fam.size(); ++i)
            m.per_node[fam[i]].push_back(static_cast<int>(i));
        return m;
    }
    bool empty_at(int v) const { return per_node[v].empty(); }
};

inline std::vector<std::string> subtree_codes(const BallTree& t, const Marks& marks) {
    std::vector<std::string> code(t.nodes.size());
    auto rec = [&](auto&& self, int v) -> void {
        std::string mk;
        if (!marks.per_node[v].empty()) {
            mk = "[";
            for (size_t i = 0; i < marks.per_node[v].size(); ++i) {
                if (i) mk += ",";
                mk += std::to_string(marks.per_node[v][i]);
            }
            mk += "]";
        }
        const auto& node = t.nodes[v];
        if (node.children.empty()) {
            code[v] = "x" + mk;
            return;
        }
        std::vector<std::string> kid;
        kid.reserve(node.children.size());
        for (int c : node.children) {
            self(self, c);
            kid.push_back(code[c]);
        }
        std::sort(kid.begin(), kid.end());
        std::string s = "(" + rat_str(t.levels[node.level_code]) + mk + ";";
        for (auto& k : kid) s += k;
        s += ")";
        code[v] = std::move(s);
    };
    rec(rec, t.root);
    return code;
}

inline std::vector<std::string> subtree_codes(const BallTree& t) {
    return subtree_codes(t, Marks::none(t));
}

// Reorders every child list by (code, smallest point).  Node ids are
// untouched, so ball references stay valid; only traversal order changes.
inline void canonicalize(BallTree& t, const std::vector<std::string>& codes) {
    for (auto& node : t.nodes) {
        std::sort(node.children.begin(), node.children.end(), [&](int a, int b) {
            if (codes[a] != codes[b]) return codes[a] < codes[b];
            return t.nodes[a].pts[0] < t.nodes[b].pts[0];
        });
    }
}

// Code of the whole space; equality across spaces is isometry.
inline std::string canonical_code(const FiniteSpace& s) {
    BallTree t = build_ball_tree(s);
    return subtree_codes(t)[t.root];
}

// Path-refined classes: two nodes share a class id iff some automorphism
// of the (marked) tree maps one to the other.  The invariant used: nodes
// are exchangeable iff the code sequences along their root paths agree.
inline std::vector<int> orbit_classes(const BallTree& t, const std::vector<std::string>& codes) {
    std::vector<int> cls(t.nodes.size(), -1);
    std::map<std::pair<int, std::string>, int> intern;
    auto rec = [&](auto&& self, int v, int parent_cls) -> void {
        auto [it, fresh] =
            intern.emplace(std::make_pair(parent_cls, codes[v]), static_cast<int>(intern.size()));
        (void)fresh;
        cls[v] = it->second;
        for (int c : t.nodes[v].children) self(self, c, cls[v]);
    };
    rec(rec, t.root, -1);
    return cls;
}

} // namespace ultra
