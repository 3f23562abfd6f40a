// Shared test utilities: small-space construction, an exhaustive enumerator
// for spaces with few points and few distance values, and brute-force
// oracles that decide isometry questions straight from the definitions
// (permutation search, no trees or codes involved).
#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ultra/ambient.hpp"
#include "ultra/isometry.hpp"
#include "ultra/space.hpp"

namespace testutil {

using namespace ultra;

inline FiniteSpace from_rows(std::vector<std::string> labels,
                             std::vector<std::vector<int>> rows) {
    std::vector<std::vector<Rational>> m(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (int v : rows[i]) m[i].push_back(Rational(v));
    return FiniteSpace::from_matrix(std::move(labels), m);
}

inline RegularSpaceDesc mk_desc(bool up, bool dense, std::optional<uint64_t> n) {
    LevelSetDesc ls;
    if (up)
        ls.up = {{Rational(1), Rational(2)}};
    else {
        ls.down = {{Rational(1), Rational(1, 2)}};
        ls.dense_down = dense;
    }
    return urysohn_desc(ls, n);
}

// ---------------------------------------------------------------------------
// exhaustive family: every ultrametric space with <= maxn points and levels
// from {1, ..., palette}, one representative per relabeling class
// ---------------------------------------------------------------------------
//
// A space is a level tree; we enumerate trees directly.  Children are kept
// in a fixed normal form (partition order by leaf count, then by index in
// the recursively generated pool), so each shape is produced exactly once
// and two distinct outputs are never related by reordering subtrees.

struct Shape {
    int level = 0; // 0 for leaves
    std::vector<Shape> kids;
    int leaves() const {
        if (kids.empty()) return 1;
        int s = 0;
        for (auto& k : kids) s += k.leaves();
        return s;
    }
};

namespace detail {

inline void fill(const Shape& sh, int base, std::vector<std::vector<int>>& m) {
    if (sh.kids.empty()) return;
    std::vector<std::pair<int, int>> spans; // [first, last) leaf range per child
    int next = base;
    for (auto& k : sh.kids) {
        int cnt = k.leaves();
        spans.emplace_back(next, next + cnt);
        fill(k, next, m);
        next += cnt;
    }
    for (size_t a = 0; a < spans.size(); ++a)
        for (size_t b = a + 1; b < spans.size(); ++b)
            for (int p = spans[a].first; p < spans[a].second; ++p)
                for (int q = spans[b].first; q < spans[b].second; ++q)
                    m[p][q] = m[q][p] = sh.level;
}

// all shapes with exactly n leaves and every level strictly below cap
inline const std::vector<Shape>& shapes(int n, int cap) {
    static std::map<std::pair<int, int>, std::vector<Shape>> memo;
    auto it = memo.find({n, cap});
    if (it != memo.end()) return it->second;
    std::vector<Shape> out;
    if (n == 1) {
        out.push_back(Shape{});
    } else {
        for (int lev = 1; lev < cap; ++lev) {
            // partitions of n into parts >= 1, at least two parts, descending
            std::vector<std::vector<int>> parts;
            std::vector<int> cur;
            std::function<void(int, int)> go = [&](int rem, int maxpart) {
                if (rem == 0) {
                    if (cur.size() >= 2) parts.push_back(cur);
                    return;
                }
                for (int p = std::min(rem, maxpart); p >= 1; --p) {
                    cur.push_back(p);
                    go(rem - p, p);
                    cur.pop_back();
                }
            };
            go(n, n - 1);
            for (auto& part : parts) {
                // choose child shapes; for equal part sizes force pool
                // indices non-decreasing so reordered copies never appear
                std::vector<Shape> chosen;
                std::function<void(size_t, int)> pick = [&](size_t i, int minidx) {
                    if (i == part.size()) {
                        Shape sh;
                        sh.level = lev;
                        sh.kids = chosen;
                        out.push_back(std::move(sh));
                        return;
                    }
                    const auto& pool = shapes(part[i], lev);
                    int start = (i > 0 && part[i] == part[i - 1]) ? minidx : 0;
                    for (int j = start; j < static_cast<int>(pool.size()); ++j) {
                        chosen.push_back(pool[j]);
                        pick(i + 1, j);
                        chosen.pop_back();
                    }
                };
                pick(0, 0);
            }
        }
    }
    return memo[{n, cap}] = std::move(out);
}

} // namespace detail

inline FiniteSpace realize(const Shape& sh) {
    int n = sh.leaves();
    std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
    detail::fill(sh, 0, m);
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i));
    return from_rows(labels, m);
}

// every space with <= maxn points and <= `palette` distinct positive values
inline std::vector<FiniteSpace> exhaustive_family(int maxn, int palette = 3) {
    std::vector<FiniteSpace> out;
    for (int n = 1; n <= maxn; ++n)
        for (auto& sh : detail::shapes(n, palette + 1)) out.push_back(realize(sh));
    return out;
}

// ---------------------------------------------------------------------------
// brute-force oracles (definition-level, independent of the ball tree)
// ---------------------------------------------------------------------------

// all distance-preserving bijections of s, by filtering every permutation
inline std::vector<Isometry> perm_isometries(const FiniteSpace& s) {
    std::vector<Isometry> out;
    std::vector<int> p(s.n());
    std::iota(p.begin(), p.end(), 0);
    do {
        Isometry g;
        g.map = p;
        if (is_isometry(s, g)) out.push_back(g);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

// does any distance-preserving bijection a -> b exist
inline bool brute_isometric(const FiniteSpace& a, const FiniteSpace& b) {
    if (a.n() != b.n()) return false;
    std::vector<Rational> da, db;
    for (int i = 0; i < a.n(); ++i)
        for (int j = i + 1; j < a.n(); ++j) {
            da.push_back(a.d(i, j));
            db.push_back(b.d(i, j));
        }
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    if (da != db) return false;
    std::vector<int> p(a.n());
    std::iota(p.begin(), p.end(), 0);
    do {
        bool ok = true;
        for (int i = 0; i < a.n() && ok; ++i)
            for (int j = i + 1; j < a.n() && ok; ++j)
                if (a.d(i, j) != b.d(p[i], p[j])) ok = false;
        if (ok) return true;
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
}

// does some full isometry of s extend the partial map f
inline bool brute_extendable(const std::vector<Isometry>& group, const PartialIso& f) {
    for (const auto& g : group) {
        bool ok = true;
        for (auto [a, b] : f.pairs)
            if (g(a) != b) {
                ok = false;
                break;
            }
        if (ok) return true;
    }
    return false;
}

// point orbits straight from the permutation group
inline std::vector<std::vector<int>> orbits_by_group(const FiniteSpace& s,
                                                     const std::vector<Isometry>& group) {
    int n = s.n();
    std::vector<int> cls(n);
    std::iota(cls.begin(), cls.end(), 0);
    std::function<int(int)> find = [&](int x) { return cls[x] == x ? x : cls[x] = find(cls[x]); };
    for (auto& g : group)
        for (int p = 0; p < n; ++p) {
            int a = find(p), b = find(g(p));
            if (a != b) cls[std::max(a, b)] = std::min(a, b);
        }
    std::map<int, std::vector<int>> by;
    for (int p = 0; p < n; ++p) by[find(p)].push_back(p);
    std::vector<std::vector<int>> out;
    for (auto& [r, v] : by) out.push_back(v);
    return out;
}

} // namespace testutil
