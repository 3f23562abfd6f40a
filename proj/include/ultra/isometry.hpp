#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ultra/ball_tree.hpp"
#include "ultra/canonical.hpp"
#include "ultra/space.hpp"

namespace ultra {

// A total isometry as a point permutation.
struct Isometry {
    std::vector<int> map;

    int operator()(int p) const { return map[p]; }
    int n() const { return static_cast<int>(map.size()); }

    static Isometry identity(int n) {
        Isometry g;
        g.map.resize(n);
        for (int i = 0; i < n; ++i) g.map[i] = i;
        return g;
    }
    Isometry inverse() const {
        Isometry g;
        g.map.assign(map.size(), -1);
        for (size_t i = 0; i < map.size(); ++i) g.map[map[i]] = static_cast<int>(i);
        return g;
    }
    // (a.then(b))(x) = b(a(x))
    Isometry then(const Isometry& b) const {
        Isometry g;
        g.map.resize(map.size());
        for (size_t i = 0; i < map.size(); ++i) g.map[i] = b.map[map[i]];
        return g;
    }
    bool operator==(const Isometry& o) const { return map == o.map; }
    bool operator<(const Isometry& o) const { return map < o.map; }
};

inline bool is_isometry(const FiniteSpace& s, const Isometry& g) {
    if (g.n() != s.n()) return false;
    std::vector<char> seen(s.n(), 0);
    for (int p : g.map) {
        if (p < 0 || p >= s.n() || seen[p]) return false;
        seen[p] = 1;
    }
    for (int i = 0; i < s.n(); ++i)
        for (int j = i + 1; j < s.n(); ++j)
            if (s.dcode(g.map[i], g.map[j]) != s.dcode(i, j)) return false;
    return true;
}

// A partial isometry as a sorted pair list (domain strictly increasing).
struct PartialIso {
    std::vector<std::pair<int, int>> pairs;

    static PartialIso of(std::vector<std::pair<int, int>> ps) {
        std::sort(ps.begin(), ps.end());
        PartialIso f;
        f.pairs = std::move(ps);
        return f;
    }
    size_t size() const { return pairs.size(); }
    std::optional<int> at(int x) const {
        for (auto& [a, b] : pairs)
            if (a == x) return b;
        return std::nullopt;
    }
    std::vector<int> domain() const {
        std::vector<int> d;
        d.reserve(pairs.size());
        for (auto& [a, b] : pairs) d.push_back(a);
        return d;
    }
    std::vector<int> range() const {
        std::vector<int> r;
        r.reserve(pairs.size());
        for (auto& [a, b] : pairs) r.push_back(b);
        std::sort(r.begin(), r.end());
        return r;
    }
};

// Throws unless f is injective with distinct domain points and preserves
// every pairwise distance.
inline void validate_partial_isometry(const FiniteSpace& s, const PartialIso& f) {
    for (auto& [a, b] : f.pairs)
        if (a < 0 || a >= s.n() || b < 0 || b >= s.n())
            throw PreconditionError("partial map point out of range");
    for (size_t i = 0; i < f.pairs.size(); ++i)
        for (size_t j = i + 1; j < f.pairs.size(); ++j) {
            auto [a, fa] = f.pairs[i];
            auto [b, fb] = f.pairs[j];
            if (a == b) throw PreconditionError("partial map defined twice at " + s.label(a));
            if (fa == fb)
                throw PreconditionError("partial map not injective: " + s.label(a) + " and " +
                                        s.label(b) + " both go to " + s.label(fa));
            if (s.dcode(a, b) != s.dcode(fa, fb))
                throw PreconditionError("map does not preserve d(" + s.label(a) + "," +
                                        s.label(b) + ")");
        }
}

// ---------------------------------------------------------------------------
// enumeration
// ---------------------------------------------------------------------------

struct IsoBudget {
    int max_points = 12;
    uint64_t max_count = 2'000'000;
};

// |Aut| of the level tree: product over nodes of factorials of equal-code
// child run lengths.
inline BigInt count_isometries(const BallTree& t, const std::vector<std::string>& codes) {
    BigInt total = 1;
    for (const auto& node : t.nodes) {
        if (node.children.empty()) continue;
        std::map<std::string, int> runs;
        for (int c : node.children) runs[codes[c]]++;
        for (auto& [code, len] : runs)
            for (int k = 2; k <= len; ++k) total *= k;
    }
    return total;
}

// Visits every isometry of the space exactly once, in a deterministic
// order, by backtracking over level-tree automorphisms: equal-code child
// runs are matched through all run permutations, recursively.
template <class Visit>
void for_each_isometry(const BallTree& t, const std::vector<std::string>& codes,
                       const IsoBudget& budget, Visit&& visit) {
    if (t.n_points() > budget.max_points)
        throw ResourceBudgetError("isometry enumeration over " + std::to_string(t.n_points()) +
                                  " points exceeds the " + std::to_string(budget.max_points) +
                                  "-point guard");
    BigInt cnt = count_isometries(t, codes);
    if (cnt > budget.max_count)
        throw ResourceBudgetError("space has " + cnt.str() + " isometries, budget " +
                                  std::to_string(budget.max_count));

    std::vector<int> perm(t.n_points(), -1);

    // match(u, v, k): subtree u maps onto subtree v, then continuation k.
    std::function<void(int, int, const std::function<void()>&)> match =
        [&](int u, int v, const std::function<void()>& k) {
            const auto& nu = t.nodes[u];
            const auto& nv = t.nodes[v];
            if (nu.children.empty()) {
                perm[nu.point] = nv.point;
                k();
                perm[nu.point] = -1;
                return;
            }
            // children in canonical run order on both sides
            auto sorted_children = [&](const BallTree::Node& n) {
                std::vector<int> cs = n.children;
                std::sort(cs.begin(), cs.end(), [&](int a, int b) {
                    if (codes[a] != codes[b]) return codes[a] < codes[b];
                    return t.nodes[a].pts[0] < t.nodes[b].pts[0];
                });
                return cs;
            };
            std::vector<int> uc = sorted_children(nu), vc = sorted_children(nv);
            // runs are aligned because codes[u] == codes[v]
            struct Run {
                size_t begin, end;
            };
            std::vector<Run> runs;
            for (size_t i = 0; i < uc.size();) {
                size_t j = i;
                while (j < uc.size() && codes[uc[j]] == codes[uc[i]]) ++j;
                runs.push_back({i, j});
                i = j;
            }
            // sigma[i] = index into vc that uc[i] maps onto
            std::vector<size_t> sigma(uc.size());

            std::function<void(size_t)> choose = [&](size_t r) {
                if (r == runs.size()) {
                    // all run bijections fixed; match child pairs in order
                    std::function<void(size_t)> pair_up = [&](size_t i) {
                        if (i == uc.size()) {
                            k();
                            return;
                        }
                        match(uc[i], vc[sigma[i]], [&] { pair_up(i + 1); });
                    };
                    pair_up(0);
                    return;
                }
                const auto [b, e] = runs[r];
                std::vector<size_t> idx(e - b);
                for (size_t i = 0; i < idx.size(); ++i) idx[i] = b + i;
                do {
                    for (size_t i = b; i < e; ++i) sigma[i] = idx[i - b];
                    choose(r + 1);
                } while (std::next_permutation(idx.begin(), idx.end()));
            };
            choose(0);
        };

    Isometry g;
    g.map.resize(t.n_points());
    match(t.root, t.root, [&] {
        g.map = perm;
        visit(const_cast<const Isometry&>(g));
    });
}

inline std::vector<Isometry> enumerate_isometries(const BallTree& t,
                                                  const std::vector<std::string>& codes,
                                                  const IsoBudget& budget = {}) {
    std::vector<Isometry> out;
    for_each_isometry(t, codes, budget, [&](const Isometry& g) { out.push_back(g); });
    return out;
}

// ---------------------------------------------------------------------------
// orbits
// ---------------------------------------------------------------------------

// Point orbit partition: classes of leaves under the (marked) automorphism
// group, listed by smallest member.
inline std::vector<std::vector<int>> point_orbits(const BallTree& t,
                                                  const std::vector<std::string>& codes) {
    std::vector<int> cls = orbit_classes(t, codes);
    std::map<int, std::vector<int>> by;
    for (int p = 0; p < t.n_points(); ++p) by[cls[t.point_leaf[p]]].push_back(p);
    std::vector<std::vector<int>> out;
    out.reserve(by.size());
    for (auto& [c, pts] : by) {
        std::sort(pts.begin(), pts.end());
        out.push_back(std::move(pts));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Orbit of ball C under isometries fixing each ball of `pins` setwise.
// With empty pins this is the plain orbit of C.
inline std::vector<int> ball_orbit(const BallTree& t, int C, const FDFamily& pins = {}) {
    validate_fd_family(t, pins);
    auto codes = subtree_codes(t, Marks::pin_family(t, pins));
    auto cls = orbit_classes(t, codes);
    std::vector<int> out;
    for (size_t v = 0; v < t.nodes.size(); ++v)
        if (cls[v] == cls[C]) out.push_back(static_cast<int>(v));
    std::sort(out.begin(), out.end(), [&](int a, int b) { return t.nodes[a].pts < t.nodes[b].pts; });
    return out;
}

// [B]: similar siblings at mutual distance equal to the parent level,
// including B itself; the root's class is {root}.
inline std::vector<int> sibling_class(const BallTree& t, const std::vector<std::string>& codes,
                                      int v) {
    if (t.nodes[v].parent == -1) return {v};
    std::vector<int> cls;
    for (int c : t.nodes[t.nodes[v].parent].children)
        if (codes[c] == codes[v]) cls.push_back(c);
    std::sort(cls.begin(), cls.end(), [&](int a, int b) { return t.nodes[a].pts < t.nodes[b].pts; });
    return cls;
}

// Node holding g[B] for ball (node) B.
inline int image_ball(const BallTree& t, int B, const Isometry& g) {
    const auto& nb = t.nodes[B];
    int u = t.point_leaf[g(nb.pts[0])];
    while (u != -1) {
        const auto& nu = t.nodes[u];
        if (nu.level_code == nb.level_code && nu.pts.size() == nb.pts.size()) break;
        u = nu.parent;
    }
    if (u == -1) throw Error("internal: image of a ball is not a ball");
    // full verification: every mapped point must land inside u
    const auto& upts = t.nodes[u].pts;
    for (int p : nb.pts)
        if (!std::binary_search(upts.begin(), upts.end(), g(p)))
            throw Error("internal: image of a ball is not a ball");
    return u;
}

// ---------------------------------------------------------------------------
// basic open sets
// ---------------------------------------------------------------------------

// tau(anchor, balls) = { g : g[B] = anchor[B] for every B in balls }.
struct TauSet {
    Isometry anchor;
    FDFamily balls;
};

inline bool tau_contains(const BallTree& t, const TauSet& tau, const Isometry& g) {
    for (int B : tau.balls)
        if (image_ball(t, B, g) != image_ball(t, B, tau.anchor)) return false;
    return true;
}

// tau(Id, stronger) contained in tau(Id, weaker): every isometry fixing the
// stronger family also fixes the weaker one, checked via constrained orbits
// (each weaker ball must be alone in its marked orbit class).
inline bool strengthens(const BallTree& t, const FDFamily& stronger, const FDFamily& weaker) {
    validate_fd_family(t, stronger);
    validate_fd_family(t, weaker);
    auto codes = subtree_codes(t, Marks::pin_family(t, stronger));
    auto cls = orbit_classes(t, codes);
    for (int B : weaker) {
        int same = 0;
        for (size_t v = 0; v < t.nodes.size(); ++v)
            if (cls[v] == cls[B]) ++same;
        if (same != 1) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// one-point extension
// ---------------------------------------------------------------------------

struct ExtendResult {
    bool extendable = false;
    std::optional<Isometry> witness;       // total isometry extending f
    std::optional<std::pair<int, int>> orbit_mismatch; // (x, f(x)) in different orbits
};

// A partial isometry of a finite ultrametric space extends to a total one
// iff every x and f(x) lie in the same point orbit.  The witness is grown
// greedily: each step maps the smallest unmapped point to the smallest
// same-orbit candidate matching all distances to the current domain; the
// orbit criterion guarantees a candidate exists at every step.
inline ExtendResult extendable(const FiniteSpace& s, const BallTree& t,
                               const std::vector<std::string>& codes, const PartialIso& f,
                               bool want_witness = true) {
    validate_partial_isometry(s, f);
    auto cls = orbit_classes(t, codes);
    auto point_cls = [&](int p) { return cls[t.point_leaf[p]]; };

    ExtendResult res;
    for (auto& [x, fx] : f.pairs)
        if (point_cls(x) != point_cls(fx)) {
            res.orbit_mismatch = {x, fx};
            return res;
        }
    res.extendable = true;
    if (!want_witness) return res;

    const int n = s.n();
    std::vector<int> F(n, -1);
    std::vector<char> used(n, 0);
    for (auto& [x, fx] : f.pairs) {
        F[x] = fx;
        used[fx] = 1;
    }
    for (int x = 0; x < n; ++x) {
        if (F[x] != -1) continue;
        int pick = -1;
        for (int cand = 0; cand < n && pick == -1; ++cand) {
            if (used[cand] || point_cls(cand) != point_cls(x)) continue;
            bool ok = true;
            for (int y = 0; y < n && ok; ++y)
                if (F[y] != -1 && s.dcode(cand, F[y]) != s.dcode(x, y)) ok = false;
            if (ok) pick = cand;
        }
        if (pick == -1) throw Error("internal: extension step found no candidate");
        F[x] = pick;
        used[pick] = 1;
    }
    Isometry g;
    g.map = std::move(F);
    if (!is_isometry(s, g)) throw Error("internal: greedy extension is not an isometry");
    res.witness = std::move(g);
    return res;
}

// ---------------------------------------------------------------------------
// permutation signature
// ---------------------------------------------------------------------------

// Sign of the permutation g induces on a ball class (+1/-1).  Throws if g
// does not permute the class.
inline int permutation_signature(const BallTree& t, const std::vector<int>& cls_nodes,
                                 const Isometry& g) {
    std::vector<int> img(cls_nodes.size());
    for (size_t i = 0; i < cls_nodes.size(); ++i) {
        int to = image_ball(t, cls_nodes[i], g);
        auto it = std::find(cls_nodes.begin(), cls_nodes.end(), to);
        if (it == cls_nodes.end())
            throw PreconditionError("isometry does not permute the ball class");
        img[i] = static_cast<int>(it - cls_nodes.begin());
    }
    std::vector<char> seen(img.size(), 0);
    int sign = 1;
    for (size_t i = 0; i < img.size(); ++i) {
        if (seen[i]) continue;
        int len = 0;
        for (size_t j = i; !seen[j]; j = img[j]) {
            seen[j] = 1;
            ++len;
        }
        if (len % 2 == 0) sign = -sign;
    }
    return sign;
}

} // namespace ultra
