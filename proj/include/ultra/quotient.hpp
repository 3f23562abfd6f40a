#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ultra/ball_tree.hpp"
#include "ultra/canonical.hpp"
#include "ultra/errors.hpp"
#include "ultra/isometry.hpp"
#include "ultra/space.hpp"

namespace ultra {

// One orbit-quotient step.  Result points are the point orbits of the
// input under its full isometry group; the distance between two classes is
// the least pairwise distance between their members; classes at distance
// zero are identified.  `projection[p]` is the result point holding p.
struct OrbitQuotient {
    FiniteSpace space;
    std::vector<int> projection;
};

inline OrbitQuotient orbit_quotient(const FiniteSpace& s) {
    const int n = s.n();
    if (n == 0) return {s, {}};

    BallTree t = build_ball_tree(s);
    auto codes = subtree_codes(t);
    auto orbits = point_orbits(t, codes);
    const int m = static_cast<int>(orbits.size());

    // Least pairwise distance between two classes, as a level code.
    std::vector<uint16_t> least(static_cast<size_t>(m) * m, 0);
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            uint16_t best = s.dcode(orbits[a][0], orbits[b][0]);
            for (int p : orbits[a])
                for (int q : orbits[b]) best = std::min(best, s.dcode(p, q));
            least[static_cast<size_t>(a) * m + b] = best;
            least[static_cast<size_t>(b) * m + a] = best;
        }

    // Metric identification: classes connected by zero distances collapse
    // into one result point.  For a genuine metric input distinct orbits
    // stay apart, so this pass only relabels; it matters when the step is
    // fed a pseudo-metric.
    std::vector<int> comp(m, -1);
    int nc = 0;
    for (int a = 0; a < m; ++a) {
        if (comp[a] != -1) continue;
        std::vector<int> stack{a};
        comp[a] = nc;
        while (!stack.empty()) {
            int c = stack.back();
            stack.pop_back();
            for (int b = 0; b < m; ++b)
                if (comp[b] == -1 && least[static_cast<size_t>(c) * m + b] == 0)
                    comp[b] = nc, stack.push_back(b);
        }
        ++nc;
    }

    // Class label: bracket the least member, so iterated quotients read
    // [[x]] at rank two and so on.
    std::vector<int> least_member(nc, n);
    for (int a = 0; a < m; ++a)
        least_member[comp[a]] = std::min(least_member[comp[a]], orbits[a][0]);
    std::vector<std::string> labels(nc);
    for (int c = 0; c < nc; ++c) labels[c] = "[" + s.label(least_member[c]) + "]";

    std::vector<std::vector<Rational>> mat(nc, std::vector<Rational>(nc, Rational(0)));
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            const int ca = comp[a], cb = comp[b];
            if (ca == cb) continue;
            const Rational& v = s.level(least[static_cast<size_t>(a) * m + b]);
            if (mat[ca][cb] == 0 || v < mat[ca][cb]) mat[ca][cb] = mat[cb][ca] = v;
        }

    OrbitQuotient out;
    out.space = FiniteSpace::from_matrix(std::move(labels), mat);
    out.projection.resize(n);
    for (int a = 0; a < m; ++a)
        for (int p : orbits[a]) out.projection[p] = comp[a];
    return out;
}

// Stage of the iterated quotient: the space realizing the stage metric and
// the projection from the previous stage's points (empty at stage zero).
struct QuotientStage {
    FiniteSpace space;
    std::vector<int> projection;
};

// The chain of stage metrics down to the first repetition.  `rank` is the
// least stage index whose quotient changes nothing; the stage at that
// index is the final entry and is rigid.
struct QuotientSequence {
    std::vector<QuotientStage> stages;
    int rank = 0;

    const FiniteSpace& core() const { return stages.back().space; }
};

// Iterates orbit_quotient until the projection is a bijection.  At that
// point every orbit is a singleton, so the isometry group is trivial and
// the stage metric repeats; each earlier step strictly drops the point
// count, which bounds the rank by the size of the input.
inline QuotientSequence rigid_core(const FiniteSpace& s) {
    QuotientSequence seq;
    seq.stages.push_back({s, {}});
    for (;;) {
        const FiniteSpace& cur = seq.stages.back().space;
        OrbitQuotient step = orbit_quotient(cur);
        if (step.space.n() == cur.n()) break;
        seq.stages.push_back({std::move(step.space), std::move(step.projection)});
    }
    seq.rank = static_cast<int>(seq.stages.size()) - 1;
    return seq;
}

// Composite projection from stage-zero points onto stage `alpha`, the
// stagewise maps applied in order.
inline std::vector<int> composite_projection(const QuotientSequence& seq, int alpha) {
    if (alpha < 0 || alpha >= static_cast<int>(seq.stages.size()))
        throw PreconditionError("no stage " + std::to_string(alpha) + " in a sequence of " +
                                std::to_string(seq.stages.size()));
    std::vector<int> pi(seq.stages.front().space.n());
    for (size_t p = 0; p < pi.size(); ++p) pi[p] = static_cast<int>(p);
    for (int a = 1; a <= alpha; ++a)
        for (int& v : pi) v = seq.stages[a].projection[v];
    return pi;
}

} // namespace ultra
