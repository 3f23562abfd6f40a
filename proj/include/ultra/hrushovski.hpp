#pragma once

// Extension closure for finite subsets of an ultrametric space: for a
// finite Y the closure Z contains Y, and every partial isometry of Y that
// extends to an isometry of the ambient space extends to a bijection of Z
// that still extends to an isometry of the ambient space.  The plan built
// alongside Z records how, so individual extensions replay without search.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ambient.hpp"

namespace ultra {

// Recursive record of one closure computation.  `Chain` covers the case of
// a single linked class of top-level balls: fresh points are pulled along a
// chain of ball-to-ball isometries so all the per-ball sets become aligned
// copies of one seed set, which is then closed recursively.  `Split` covers
// several unlinked classes, closed independently.  A singleton closes to
// itself.
struct HrushovskiTrace {
    enum class Kind { Singleton, Split, Chain };

    std::vector<int> Y;
    std::vector<int> Z;
    Kind kind = Kind::Singleton;

    uint16_t diam_code = 0;
    int join_node = -1;              // smallest ball containing Y
    std::vector<int> balls;          // top-level balls meeting Y, fixed order
    std::vector<std::vector<int>> ball_pts; // Y restricted to each ball

    // Split
    std::vector<std::vector<int>> classes; // linked groups, indices into balls
    std::vector<std::unique_ptr<HrushovskiTrace>> class_sub;

    // Chain
    std::vector<std::vector<int>> W;       // aligned supersets, W[i] in balls[i]
    std::vector<Isometry> chain_iso;       // chain_iso[i] maps W[0] onto W[i]
    std::unique_ptr<HrushovskiTrace> chain_sub; // closure of W[0]
    std::vector<std::vector<int>> Z_per_ball;   // chain_iso[i] image of chain_sub->Z
};

namespace detail {

inline std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::vector<int> image_of(const std::vector<int>& pts, const Isometry& g) {
    std::vector<int> out;
    out.reserve(pts.size());
    for (int p : pts) out.push_back(g(p));
    return sorted_unique(std::move(out));
}

// Deterministic order for a family of sibling balls: by canonical code,
// then by the least point label inside.
inline void order_balls(const Ambient& amb, std::vector<int>& balls) {
    auto min_label = [&](int b) {
        std::string best;
        for (int p : amb.tree().nodes[b].pts)
            if (best.empty() || amb.label(p) < best) best = amb.label(p);
        return best;
    };
    std::stable_sort(balls.begin(), balls.end(), [&](int a, int b) {
        auto ka = std::pair(amb.codes()[a], min_label(a));
        auto kb = std::pair(amb.codes()[b], min_label(b));
        return ka < kb;
    });
}

} // namespace detail

// Closure of a finite point set.  Deterministic: ball families are ordered
// by canonical code then least label, linked pairs and seed points are the
// first in that order.
inline std::unique_ptr<HrushovskiTrace> hrushovski_close(const Ambient& amb,
                                                         std::vector<int> Y) {
    using detail::image_of;
    using detail::sorted_unique;

    auto trace = std::make_unique<HrushovskiTrace>();
    trace->Y = sorted_unique(std::move(Y));
    if (trace->Y.empty()) throw PreconditionError("closure of an empty set");

    if (trace->Y.size() == 1) {
        trace->kind = HrushovskiTrace::Kind::Singleton;
        trace->Z = trace->Y;
        return trace;
    }

    const auto& t = amb.tree();
    int A = amb.lca_node(trace->Y);
    trace->join_node = A;
    trace->diam_code = t.nodes[A].level_code;

    // balls of radius diam(Y) meeting Y: the children of the join that do
    std::vector<char> hit(t.nodes.size(), 0);
    for (int p : trace->Y)
        for (int v = t.point_leaf[p]; v != A; v = t.nodes[v].parent) hit[v] = 1;
    std::vector<int> balls;
    for (int c : t.nodes[A].children)
        if (hit[c]) balls.push_back(c);
    if (balls.size() < 2) throw Error("internal: diameter ball with one occupied child");
    detail::order_balls(amb, balls);
    trace->balls = balls;

    auto ball_of = [&](int p) {
        for (size_t i = 0; i < balls.size(); ++i)
            for (int v = t.point_leaf[p]; v != -1; v = t.nodes[v].parent)
                if (v == balls[i]) return static_cast<int>(i);
        throw Error("internal: closure point outside every top ball");
    };
    trace->ball_pts.assign(balls.size(), {});
    for (int p : trace->Y) trace->ball_pts[ball_of(p)].push_back(p);

    // link balls whose point sets share a class of the underlying space
    const auto& cls = amb.point_classes();
    int nb = static_cast<int>(balls.size());
    std::vector<int> uf(nb);
    for (int i = 0; i < nb; ++i) uf[i] = i;
    auto find = [&](int x) {
        while (uf[x] != x) x = uf[x] = uf[uf[x]];
        return x;
    };
    auto linked0 = [&](int i, int j) {
        for (int x : trace->ball_pts[i])
            for (int y : trace->ball_pts[j])
                if (cls[x] == cls[y]) return true;
        return false;
    };
    for (int i = 0; i < nb; ++i)
        for (int j = i + 1; j < nb; ++j)
            if (linked0(i, j)) uf[find(i)] = find(j);

    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < nb; ++i) by_class[find(i)].push_back(i);

    if (by_class.size() > 1) {
        // unlinked classes close independently; their closures keep the
        // mutual distance of the top balls, so the union stays coherent
        trace->kind = HrushovskiTrace::Kind::Split;
        for (auto& [rep, members] : by_class) {
            trace->classes.push_back(members);
            std::vector<int> Yc;
            for (int i : members)
                Yc.insert(Yc.end(), trace->ball_pts[i].begin(), trace->ball_pts[i].end());
            trace->class_sub.push_back(hrushovski_close(amb, std::move(Yc)));
        }
        for (auto& sub : trace->class_sub)
            trace->Z.insert(trace->Z.end(), sub->Z.begin(), sub->Z.end());
        trace->Z = sorted_unique(std::move(trace->Z));
        return trace;
    }

    // one linked class: reorder so the first two balls are directly linked
    trace->kind = HrushovskiTrace::Kind::Chain;
    {
        int bi = -1, bj = -1;
        for (int i = 0; i < nb && bi == -1; ++i)
            for (int j = i + 1; j < nb; ++j)
                if (linked0(i, j)) {
                    bi = i;
                    bj = j;
                    break;
                }
        if (bi == -1) throw Error("internal: linked class without a linked pair");
        std::vector<int> order{bi, bj};
        for (int k = 0; k < nb; ++k)
            if (k != bi && k != bj) order.push_back(k);
        auto balls2 = trace->balls;
        auto pts2 = trace->ball_pts;
        for (int k = 0; k < nb; ++k) {
            trace->balls[k] = balls2[order[k]];
            trace->ball_pts[k] = pts2[order[k]];
        }
    }

    // seed pair: least directly linked points of the first two balls
    int x0 = -1, x1 = -1;
    for (int x : trace->ball_pts[0]) {
        for (int y : trace->ball_pts[1])
            if (cls[x] == cls[y]) {
                x0 = x;
                x1 = y;
                break;
            }
        if (x0 != -1) break;
    }
    auto ext = amb.extend(PartialIso{{{x0, x1}}});
    if (!ext.class_ok) throw Error("internal: linked points with no common class");
    if (!ext.witness)
        throw NeedWiderWindow{0, 2, "witness for the closure seed pair"};
    Isometry g0 = *ext.witness;

    trace->W.assign(nb, {});
    trace->chain_iso.assign(nb, Isometry::identity(amb.n()));
    Isometry g0inv = g0.inverse();
    trace->W[0] = sorted_unique([&] {
        auto w = image_of(trace->ball_pts[1], g0inv);
        w.insert(w.end(), trace->ball_pts[0].begin(), trace->ball_pts[0].end());
        return w;
    }());
    trace->W[1] = sorted_unique([&] {
        auto w = image_of(trace->ball_pts[0], g0);
        w.insert(w.end(), trace->ball_pts[1].begin(), trace->ball_pts[1].end());
        return w;
    }());
    trace->chain_iso[1] = g0;

    for (int l = 1; l + 1 < nb; ++l) {
        // carry W[l] into the next ball, then pad every earlier W with the
        // pullbacks of the points of Y the copy did not cover
        Isometry f = amb.aligned_swap(trace->balls[l], trace->balls[l + 1]);
        auto carried = image_of(trace->W[l], f);
        trace->W[l + 1] = sorted_unique([&] {
            auto w = carried;
            w.insert(w.end(), trace->ball_pts[l + 1].begin(), trace->ball_pts[l + 1].end());
            return w;
        }());
        trace->chain_iso[l + 1] = trace->chain_iso[l].then(f);
        std::vector<int> fresh;
        for (int y : trace->ball_pts[l + 1])
            if (!std::binary_search(carried.begin(), carried.end(), y)) fresh.push_back(y);
        if (!fresh.empty()) {
            Isometry back = trace->chain_iso[l].then(f).inverse();
            auto pull = image_of(fresh, back); // pullback into the first ball
            for (int i = 0; i <= l; ++i) {
                auto add = image_of(pull, trace->chain_iso[i]);
                trace->W[i].insert(trace->W[i].end(), add.begin(), add.end());
                trace->W[i] = sorted_unique(std::move(trace->W[i]));
            }
            // W[l+1] already contains exactly the carried points plus Y there
        }
    }

    for (int i = 0; i < nb; ++i)
        if (trace->W[i].size() >= trace->Y.size())
            throw Error("internal: aligned set did not shrink below the input");

    trace->chain_sub = hrushovski_close(amb, trace->W[0]);
    trace->Z_per_ball.assign(nb, {});
    for (int i = 0; i < nb; ++i) {
        trace->Z_per_ball[i] = image_of(trace->chain_sub->Z, trace->chain_iso[i]);
        trace->Z.insert(trace->Z.end(), trace->Z_per_ball[i].begin(),
                        trace->Z_per_ball[i].end());
    }
    trace->Z = sorted_unique(std::move(trace->Z));
    return trace;
}

// ---------------------------------------------------------------------------
// extension within a closure
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<int> lookup(const PartialIso& f, int x) {
    for (auto& [a, b] : f.pairs)
        if (a == x) return b;
    return std::nullopt;
}

inline PartialIso conjugate(const PartialIso& f, const Isometry& g) {
    // g^-1 . f . g as a pair list
    Isometry gi = g.inverse();
    PartialIso out;
    for (auto& [a, b] : f.pairs) out.pairs.push_back({gi(a), gi(b)});
    std::sort(out.pairs.begin(), out.pairs.end());
    return out;
}

} // namespace detail

// Extends a partial isometry of Y to a bijection of Z that is still an
// isometry of the underlying space.  The input must pair points of Y with
// points of Y and be extendable over the underlying space; both are the
// caller's obligations and are cheaply re-checked here.
inline PartialIso extend_within(const Ambient& amb, const HrushovskiTrace& trace,
                                const PartialIso& f) {
    validate_partial_isometry(amb.space(), f);
    for (auto& [a, b] : f.pairs) {
        if (!std::binary_search(trace.Y.begin(), trace.Y.end(), a) ||
            !std::binary_search(trace.Y.begin(), trace.Y.end(), b))
            throw PreconditionError("extension input must stay inside the closed set");
        if (!amb.points_equiv(a, b))
            throw PreconditionError("extension input is not extendable over the space");
    }

    if (trace.kind == HrushovskiTrace::Kind::Singleton) {
        PartialIso g;
        g.pairs = {{trace.Y[0], trace.Y[0]}};
        return g;
    }

    if (trace.kind == HrushovskiTrace::Kind::Split) {
        PartialIso g;
        for (size_t c = 0; c < trace.classes.size(); ++c) {
            std::vector<char> inside(amb.n(), 0);
            for (int bi : trace.classes[c])
                for (int p : trace.ball_pts[bi]) inside[p] = 1;
            PartialIso fc;
            for (auto& [a, b] : f.pairs)
                if (inside[a]) {
                    if (!inside[b])
                        throw PreconditionError(
                            "extension input maps across unlinked ball classes");
                    fc.pairs.push_back({a, b});
                }
            PartialIso gc = extend_within(amb, *trace.class_sub[c], fc);
            g.pairs.insert(g.pairs.end(), gc.pairs.begin(), gc.pairs.end());
        }
        std::sort(g.pairs.begin(), g.pairs.end());
        return g;
    }

    // Chain: route each ball to a target ball, extending the given pairs
    // where they dictate a target and filling the remaining balls by their
    // stored alignment
    int nb = static_cast<int>(trace.balls.size());
    auto ball_index = [&](int p) {
        const auto& t = amb.tree();
        for (int i = 0; i < nb; ++i)
            for (int v = t.point_leaf[p]; v != -1; v = t.nodes[v].parent)
                if (v == trace.balls[i]) return i;
        throw Error("internal: extension point outside every chain ball");
    };

    std::vector<int> out_edge(nb, -1), in_deg(nb, 0);
    for (auto& [a, b] : f.pairs) {
        int i = ball_index(a), j = ball_index(b);
        if (out_edge[i] != -1 && out_edge[i] != j)
            throw PreconditionError("extension input splits one ball across two targets");
        if (out_edge[i] == -1) {
            out_edge[i] = j;
            ++in_deg[j];
        }
    }

    PartialIso g;
    for (int i = 0; i < nb; ++i) {
        int target = out_edge[i];
        if (target == -1) {
            for (int j = 0; j < nb; ++j)
                if (in_deg[j] == 0) {
                    target = j;
                    break;
                }
            if (target == -1) throw Error("internal: chain routing found no free ball");
            out_edge[i] = target;
            ++in_deg[target];
            // no pairs constrain this ball: the stored alignment serves
            Isometry route = trace.chain_iso[i].inverse().then(trace.chain_iso[target]);
            for (int z : trace.Z_per_ball[i]) g.pairs.push_back({z, route(z)});
            continue;
        }
        // pairs from ball i land in ball `target`: pull them back to the
        // seed copy, extend there, push forward
        Isometry to_target = trace.chain_iso[i].inverse().then(trace.chain_iso[target]);
        PartialIso local; // within W[i]'s coordinates
        Isometry back = to_target.inverse();
        for (auto& [a, b] : f.pairs)
            if (ball_index(a) == i) local.pairs.push_back({a, back(b)});
        PartialIso seed_f = detail::conjugate(local, trace.chain_iso[i]);
        PartialIso seed_g = extend_within(amb, *trace.chain_sub, seed_f);
        for (auto& [a, b] : seed_g.pairs)
            g.pairs.push_back({trace.chain_iso[i](a), to_target(trace.chain_iso[i](b))});
    }
    std::sort(g.pairs.begin(), g.pairs.end());

    // the result must be a bijection of Z extending f
    if (g.pairs.size() != trace.Z.size())
        throw Error("internal: chain extension missed part of the closed set");
    for (auto& [a, b] : f.pairs)
        if (detail::lookup(g, a) != std::optional<int>(b))
            throw Error("internal: chain extension does not extend the input");
    return g;
}

} // namespace ultra
