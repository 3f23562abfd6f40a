#pragma once

// Displacement isometries: given a finite set Z (and optionally a pinned
// family B), build an isometry h that pushes Z far enough away from itself
// that distances d(x, h(x')) depend only on the configuration, uniformly
// over all isometries permuting Z (and B).  These are the moving parts of
// the back-and-forth generic construction.
//
// The construction over a window: let A be the smallest ball containing Z
// and E the children of A meeting Z.  Balls E with infinite orbit swap
// with a fresh sibling copy; balls with singleton orbit are setwise fixed
// by every qualifying isometry, so displacement recurses inside them.  If
// some ball containing Z has a nontrivial orbit the whole of Z swaps away
// at once and every checked distance collapses to one constant.

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ambient.hpp"
#include "extremality.hpp"

namespace ultra {

struct DisplacementTrace {
    std::vector<int> Z;
    FDFamily family;
    enum class Case { Identity, WholeSwap, PerBall } kind = Case::Identity;
    int swap_ball = -1, swap_target = -1;     // WholeSwap
    std::vector<int> balls;                   // PerBall: the E family
    std::vector<char> infinite_orbit;         // per ball: swapped vs recursed
    std::vector<int> fresh_copy;              // F_E per ball (-1 when recursed)
    std::vector<DisplacementTrace> sub;       // recursion traces per ball
    std::vector<std::string> cache_keys;      // equivariance table keys used
};

namespace detail {

inline Marks set_marks(const BallTree& t, const std::vector<int>& pts) {
    Marks m = Marks::none(t);
    for (int p : pts) m.per_node[t.point_leaf[p]].push_back(0);
    return m;
}

// Structure key of a ball with a marked point set, prefixed by the sibling
// key so that only balls interchangeable in the underlying space compare
// equal.
inline std::string config_key(const Ambient& amb, int ball, const std::vector<int>& pts) {
    auto mcodes = subtree_codes(amb.tree(), set_marks(amb.tree(), pts));
    return amb.step_key(ball) + "#" + mcodes[ball];
}

} // namespace detail

// Engine wrapping one window.  The per-configuration cache makes the
// choice of the inner displacement equivariant: every ball similar to an
// already-seen configuration receives the conjugated copy of the stored
// map, never a freshly recomputed one.
class DisplacementEngine {
public:
    explicit DisplacementEngine(const Ambient& amb) : amb_(amb) {}

    struct Result {
        Isometry h;
        DisplacementTrace trace;
    };

    // Displacement for Z with no pinned family.
    Result basic(const std::vector<int>& Z, int from = -1) {
        require_extremality({}, from);
        return build(Z, {}, from);
    }

    // The two-isometry form uses the same map; the distance identities for
    // pairs g, g' follow from the one-isometry identities by composition.
    Result consolidated(const std::vector<int>& Z, int from = -1) { return basic(Z, from); }

    // Displacement respecting a pinned family: the result fixes every pin
    // setwise.
    Result relative(const std::vector<int>& Z, const FDFamily& B) {
        validate_fd_family(amb_.tree(), B);
        if (B.empty()) return basic(Z);
        require_extremality(B, -1);
        return build(Z, B, -1);
    }

    // Stored equivariance table: configuration key -> (ball, marked set)
    // representative.  Exposed so tests can replay the conjugation law.
    struct CacheEntry {
        int ball = -1;
        std::vector<int> pts;
        Isometry h;
    };
    const std::map<std::string, CacheEntry>& table() const { return cache_; }

    const Ambient& ambient() const { return amb_; }

private:
    void require_extremality(const FDFamily& B, int from) {
        auto bad = r_maximal_non_extremal(amb_, B, from);
        if (!bad.empty()) {
            int b = bad.front();
            throw PreconditionError(
                "displacement needs the extremality property; the ball around '" +
                amb_.label(amb_.tree().nodes[b].pts.front()) + "' at level " +
                rat_str(amb_.tree().level_of(b)) + " has a finite nontrivial orbit");
        }
    }

    Result build(std::vector<int> Z, const FDFamily& B, int from) {
        std::sort(Z.begin(), Z.end());
        Z.erase(std::unique(Z.begin(), Z.end()), Z.end());
        Result res;
        res.trace.Z = Z;
        res.trace.family = B;
        res.h = Isometry::identity(amb_.n());
        if (Z.size() <= 1) return res; // identity is as required

        const auto& t = amb_.tree();
        int eff_root = from == -1 ? amb_.root() : from;

        if (B.empty()) {
            // whole-swap case: some ball containing Z moves
            int A = amb_.lca_node(Z);
            bool saw_moving = false, width_helps = false;
            for (int v = A; v != eff_root; v = t.nodes[v].parent) {
                Card oc = amb_.orbit_card(v, {}, from);
                if (oc.is_one()) continue;
                saw_moving = true;
                int target = pick_fresh_sibling(v, {v}, {});
                if (target == -1) {
                    // copies sit next to an ancestor, or at unsampled levels
                    width_helps = width_helps || class_widens(v);
                    continue;
                }
                res.h = amb_.aligned_swap(v, target);
                res.trace.kind = DisplacementTrace::Case::WholeSwap;
                res.trace.swap_ball = v;
                res.trace.swap_target = target;
                return res;
            }
            if (eff_root == amb_.root() && amb_.desc_backed() &&
                amb_.truncation().has_spine_above)
                // the whole window ball itself has an infinite orbit; its
                // copies only exist beyond the current depth
                throw NeedWiderWindow{1, 0, "sibling of the window root for a whole-set swap"};
            if (width_helps) throw NeedWiderWindow{0, 2, "fresh sibling for a whole-set swap"};
            if (saw_moving) throw unsampled_levels(A);
        }

        // per-ball case
        res.trace.kind = DisplacementTrace::Case::PerBall;
        std::vector<int> balls = target_balls(Z, B);
        res.trace.balls = balls;

        std::vector<char> used(t.nodes.size(), 0);
        for (int b : balls) used[b] = 1;
        auto forced = mark_forced(t, B);

        for (int E : balls) {
            std::vector<int> ZE;
            for (int z : Z)
                for (int v = t.point_leaf[z]; v != -1; v = t.nodes[v].parent)
                    if (v == E) ZE.push_back(z);
            Card oc = amb_.orbit_card(E, B, from);
            if (oc.omega) {
                int F = pick_fresh_sibling(E, used, forced);
                if (F == -1) {
                    if (class_widens(E))
                        throw NeedWiderWindow{0, 2, "fresh sibling copy of a moving ball"};
                    throw unsampled_levels(E);
                }
                used[F] = 1;
                Isometry sw = amb_.aligned_swap(E, F);
                res.h = res.h.then(sw);
                res.trace.infinite_orbit.push_back(1);
                res.trace.fresh_copy.push_back(F);
                res.trace.sub.emplace_back();
                res.trace.cache_keys.emplace_back();
            } else {
                if (!oc.is_one())
                    throw Error("internal: extremality held yet an orbit is finite >1");
                Isometry hE = cached_inner(E, ZE, res.trace);
                res.h = res.h.then(hE);
                res.trace.infinite_orbit.push_back(0);
                res.trace.fresh_copy.push_back(-1);
            }
        }
        if (!is_isometry(amb_.space(), res.h))
            throw Error("internal: assembled displacement is not an isometry");
        return res;
    }

    // The moving balls: for a pinned family, the pin around x or the ball
    // around x of radius dist(x, pins); with no pins, the children of the
    // smallest ball containing Z that meet Z.
    std::vector<int> target_balls(const std::vector<int>& Z, const FDFamily& B) {
        const auto& t = amb_.tree();
        std::vector<int> balls;
        if (B.empty()) {
            int A = amb_.lca_node(Z);
            std::vector<char> hit(t.nodes.size(), 0);
            for (int z : Z)
                for (int v = t.point_leaf[z]; v != A; v = t.nodes[v].parent) hit[v] = 1;
            for (int c : t.nodes[A].children)
                if (hit[c]) balls.push_back(c);
        } else {
            std::vector<char> seen(t.nodes.size(), 0);
            for (int z : Z) {
                int E = -1;
                for (int b : B) {
                    for (int v = t.point_leaf[z]; v != -1; v = t.nodes[v].parent)
                        if (v == b) E = b;
                }
                if (E == -1) {
                    uint16_t r = std::numeric_limits<uint16_t>::max();
                    for (int b : B)
                        for (int p : t.nodes[b].pts) r = std::min(r, amb_.space().dcode(z, p));
                    E = t.ball_around(z, r);
                }
                if (!seen[E]) {
                    seen[E] = 1;
                    balls.push_back(E);
                }
            }
        }
        std::sort(balls.begin(), balls.end());
        return balls;
    }

    // Fresh sibling: same sibling key, same parent, not forced, not used.
    // Deterministic: minimal canonical code, then least first point.
    int pick_fresh_sibling(int E, const std::vector<char>& used,
                           const std::vector<char>& forced) {
        const auto& t = amb_.tree();
        int best = -1;
        for (int c : amb_.sibling_class_of(E)) {
            if (c == E || (c < (int)used.size() && used[c])) continue;
            if (!forced.empty() && forced[c]) continue;
            if (best == -1 || std::pair(amb_.codes()[c], t.nodes[c].pts.front()) <
                                  std::pair(amb_.codes()[best], t.nodes[best].pts.front()))
                best = c;
        }
        return best;
    }
    int pick_fresh_sibling(int E, std::initializer_list<int> used_balls,
                           const std::vector<char>& forced) {
        std::vector<char> used(amb_.tree().nodes.size(), 0);
        for (int b : used_balls) used[b] = 1;
        return pick_fresh_sibling(E, used, forced);
    }

    // Widening by width only adds siblings whose class holds more members
    // at this exact level.  A finite class inside a dense region owes its
    // infinite orbit to balls at levels the window does not sample.
    bool class_widens(int v) const {
        if (!amb_.desc_backed()) return false;
        const auto& tr = amb_.truncation();
        return tr.class_card[tr.node_class[v]].omega;
    }

    ResourceBudgetError unsampled_levels(int v) const {
        return ResourceBudgetError(
            "every window copy of the ball around '" +
            amb_.label(amb_.tree().nodes[v].pts.front()) + "' at level " +
            rat_str(amb_.tree().level_of(v)) +
            " is occupied; its remaining copies diverge at levels between the sampled "
            "ones, which no widening of this window materializes");
    }

    // Inner displacement for a setwise-fixed ball, served equivariantly:
    // the first configuration of each similarity class is computed and
    // stored; similar configurations receive the stored map conjugated by
    // a marked alignment.
    Isometry cached_inner(int E, const std::vector<int>& ZE, DisplacementTrace& trace) {
        std::string key = detail::config_key(amb_, E, ZE);
        trace.cache_keys.push_back(key);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            require_extremality({}, E);
            Result inner = build(ZE, {}, E);
            trace.sub.push_back(inner.trace);
            cache_.insert({key, CacheEntry{E, ZE, inner.h}});
            return inner.h;
        }
        trace.sub.emplace_back();
        const CacheEntry& rep = it->second;
        if (rep.ball == E && rep.pts == ZE) return rep.h;
        // conjugate the stored map onto this ball; equal keys mean the two
        // configurations have identical marked structure, so a marked
        // alignment f of the representative onto E exists
        auto ma = subtree_codes(amb_.tree(), detail::set_marks(amb_.tree(), rep.pts));
        auto mb = subtree_codes(amb_.tree(), detail::set_marks(amb_.tree(), ZE));
        std::map<int, int> f, fi;
        align_pair(rep.ball, E, ma, mb, f);
        for (auto [p, q] : f) fi[q] = p;
        // h_E = f . h_rep . f^-1
        Isometry hE = Isometry::identity(amb_.n());
        for (int p : amb_.tree().nodes[E].pts) hE.map[p] = f.at(rep.h(fi.at(p)));
        if (!is_isometry(amb_.space(), hE))
            throw Error("internal: conjugated inner displacement is not an isometry");
        return hE;
    }

    // Alignment a -> b where a carries marks ma and b carries marks mb.
    void align_pair(int a, int b, const std::vector<std::string>& ma,
                    const std::vector<std::string>& mb, std::map<int, int>& g) {
        const auto& t = amb_.tree();
        if (t.is_leaf(a)) {
            if (!t.is_leaf(b)) throw Error("internal: config alignment shape mismatch");
            g[t.nodes[a].point] = t.nodes[b].point;
            return;
        }
        auto groups = [&](int v, const std::vector<std::string>& mc) {
            std::map<std::string, std::vector<int>> gs;
            for (int c : t.nodes[v].children)
                gs[amb_.step_key(c) + "|" + mc[c]].push_back(c);
            for (auto& [k, vec] : gs)
                std::sort(vec.begin(), vec.end(), [&](int x, int y) {
                    return t.nodes[x].pts.front() < t.nodes[y].pts.front();
                });
            return gs;
        };
        auto ga = groups(a, ma), gb = groups(b, mb);
        if (ga.size() != gb.size()) throw Error("internal: config alignment shape mismatch");
        auto ita = ga.begin();
        auto itb = gb.begin();
        for (; ita != ga.end(); ++ita, ++itb) {
            if (ita->first != itb->first || ita->second.size() != itb->second.size())
                throw Error("internal: config alignment shape mismatch");
            for (size_t i = 0; i < ita->second.size(); ++i)
                align_pair(ita->second[i], itb->second[i], ma, mb, g);
        }
    }

    const Ambient& amb_;
    std::map<std::string, CacheEntry> cache_;
};

// ---------------------------------------------------------------------------
// Widening loop.  A window can be too small to hold the fresh copies the
// construction moves material into; in that case the engine reports how
// much is missing and the loop retries on an enlarged window.  The result
// records where the original points went.

struct DisplacementRun {
    Ambient amb;               // window the map lives on
    std::vector<int> to_final; // original point -> point of `amb`
    std::vector<int> Z;        // displaced set, final coordinates
    FDFamily family;           // pinned family, final coordinates
    Isometry h;
    DisplacementTrace trace;
    std::map<std::string, DisplacementEngine::CacheEntry> table; // equivariance table
};

namespace detail {

template <class Call>
DisplacementRun widen_until_built(const Ambient& start, const std::vector<int>& Z,
                                  const FDFamily& B, int max_rounds, Call&& call) {
    DisplacementRun run;
    run.amb = start;
    run.to_final.resize(start.n());
    for (int p = 0; p < start.n(); ++p) run.to_final[p] = p;
    run.Z = Z;
    run.family = B;
    for (int round = 0;; ++round) {
        DisplacementEngine eng(run.amb);
        try {
            auto res = call(eng, run.Z, run.family);
            run.h = std::move(res.h);
            run.trace = std::move(res.trace);
            run.table = eng.table();
            return run;
        } catch (const NeedWiderWindow& w) {
            if (round >= max_rounds)
                throw ResourceBudgetError("window widening did not settle while placing " +
                                          std::string(w.what));
            if (!run.amb.can_widen())
                throw PreconditionError("the space has no room for " + std::string(w.what));
            WidenMaps maps;
            run.amb = run.amb.widened(w.extra_depth, w.extra_width, &maps);
            for (auto& p : run.to_final) p = maps.point[p];
            for (auto& z : run.Z) z = maps.point[z];
            for (auto& b : run.family) b = maps.node[b];
        }
    }
}

} // namespace detail

inline DisplacementRun displacement_basic(const Ambient& start, const std::vector<int>& Z,
                                          int max_rounds = 8) {
    return detail::widen_until_built(
        start, Z, {}, max_rounds,
        [](DisplacementEngine& eng, const std::vector<int>& z, const FDFamily&) {
            return eng.basic(z);
        });
}

inline DisplacementRun displacement_consolidated(const Ambient& start, const std::vector<int>& Z,
                                                 int max_rounds = 8) {
    return detail::widen_until_built(
        start, Z, {}, max_rounds,
        [](DisplacementEngine& eng, const std::vector<int>& z, const FDFamily&) {
            return eng.consolidated(z);
        });
}

inline DisplacementRun displacement_relative(const Ambient& start, const std::vector<int>& Z,
                                             const FDFamily& B, int max_rounds = 8) {
    return detail::widen_until_built(
        start, Z, B, max_rounds,
        [](DisplacementEngine& eng, const std::vector<int>& z, const FDFamily& fam) {
            return eng.relative(z, fam);
        });
}

// ---------------------------------------------------------------------------
// Identity verification.  The displacement maps promise distance identities
// quantified over all isometries that permute Z (and the pinned family).
// These helpers enumerate that pool over the window the request started
// from, push each isometry through the widening map, and check every
// instance; they are deliberately brute force, as the referee for the
// construction.

struct IdentityCheck {
    bool ok = true;
    long pool = 0;   // qualifying isometries
    long checks = 0; // individual identity instances
    std::string detail;
};

namespace detail {

// Window isometries standing for isometries of the underlying space: on a
// window every candidate must also preserve the point classes, otherwise it
// is an artifact of the truncation depth.
template <class Visit>
void for_each_qualifying(const Ambient& amb, const std::vector<int>& Z, Visit&& visit) {
    std::vector<char> inZ(amb.n(), 0);
    for (int z : Z) inZ[z] = 1;
    IsoBudget budget;
    budget.max_points = std::max(budget.max_points, amb.n());
    for_each_isometry(amb.tree(), amb.codes(), budget, [&](const Isometry& g) {
        for (int z : Z)
            if (!inZ[g(z)]) return true;
        for (int p = 0; p < amb.n(); ++p)
            if (!amb.points_equiv(p, g(p))) return true;
        return visit(g);
    });
}

inline bool fixes_family(const BallTree& t, const FDFamily& B, const Isometry& g) {
    for (int b : B)
        if (image_ball(t, b, g) != b) return false;
    return true;
}

} // namespace detail

// Checks for the plain displacement: for all x, x' in Z and all qualifying
// g: (1) d(x,h(x')) = d(g(x), h(g(x'))), (2) d(x,h(x')) = d(g(x), h(x')),
// (3) h(x) in Z forces h(x) = x.  Z is given in the coordinates of the
// window the request started from; phi carries it into the final window.
inline IdentityCheck verify_displacement_basic(const Ambient& orig, const std::vector<int>& Z,
                                               const DisplacementRun& run) {
    IdentityCheck rep;
    const auto& s = run.amb.space();
    const auto& phi = run.to_final;
    const auto& h = run.h;
    auto fail = [&](const std::string& what) {
        rep.ok = false;
        if (rep.detail.empty()) rep.detail = what;
    };
    for (int x : Z) {
        int hx = h(phi[x]);
        for (int z : Z)
            if (phi[z] == hx && hx != phi[x]) fail("a displaced point landed back in Z");
    }
    detail::for_each_qualifying(orig, Z, [&](const Isometry& g) {
        ++rep.pool;
        for (int x : Z)
            for (int x2 : Z) {
                uint16_t base = s.dcode(phi[x], h(phi[x2]));
                if (base != s.dcode(phi[g(x)], h(phi[g(x2)]))) fail("identity (1) failed");
                if (base != s.dcode(phi[g(x)], h(phi[x2]))) fail("identity (2) failed");
                rep.checks += 2;
            }
        return rep.ok;
    });
    return rep;
}

// Two-isometry form: d(x,h(x')) = d(g(x), h(g'(x'))) over independent
// qualifying pairs.
inline IdentityCheck verify_displacement_consolidated(const Ambient& orig,
                                                      const std::vector<int>& Z,
                                                      const DisplacementRun& run) {
    IdentityCheck rep;
    const auto& s = run.amb.space();
    const auto& phi = run.to_final;
    const auto& h = run.h;
    std::vector<Isometry> pool;
    detail::for_each_qualifying(orig, Z, [&](const Isometry& g) {
        pool.push_back(g);
        return true;
    });
    rep.pool = (long)pool.size();
    for (const auto& g : pool)
        for (const auto& g2 : pool)
            for (int x : Z)
                for (int x2 : Z) {
                    ++rep.checks;
                    if (s.dcode(phi[x], h(phi[x2])) != s.dcode(phi[g(x)], h(phi[g2(x2)]))) {
                        rep.ok = false;
                        if (rep.detail.empty()) rep.detail = "two-isometry identity failed";
                        return rep;
                    }
                }
    return rep;
}

// Pinned form: h must fix every pin setwise, and the identities range over
// pairs g, g' that permute Z and the family while moving every pin the
// same way.
inline IdentityCheck verify_displacement_relative(const Ambient& orig, const std::vector<int>& Z,
                                                  const FDFamily& B, const DisplacementRun& run) {
    IdentityCheck rep;
    const auto& s = run.amb.space();
    const auto& phi = run.to_final;
    const auto& h = run.h;
    if (!detail::fixes_family(run.amb.tree(), run.family, h)) {
        rep.ok = false;
        rep.detail = "h does not fix the family setwise";
        return rep;
    }
    for (int x : Z) {
        int hx = h(phi[x]);
        for (int z : Z)
            if (phi[z] == hx && hx != phi[x]) {
                rep.ok = false;
                rep.detail = "a displaced point landed back in Z";
                return rep;
            }
    }
    const auto& t = orig.tree();
    std::vector<char> member(t.nodes.size(), 0);
    for (int b : B) member[b] = 1;
    std::vector<std::pair<Isometry, std::vector<int>>> pool; // g with its pin images
    detail::for_each_qualifying(orig, Z, [&](const Isometry& g) {
        std::vector<int> img;
        for (int b : B) {
            int ib = image_ball(t, b, g);
            if (ib < 0 || !member[ib]) return true; // must permute the family
            img.push_back(ib);
        }
        pool.push_back({g, std::move(img)});
        return true;
    });
    rep.pool = (long)pool.size();
    for (const auto& [g, img] : pool)
        for (const auto& [g2, img2] : pool) {
            if (img != img2) continue; // same action on pins required
            for (int x : Z)
                for (int x2 : Z) {
                    ++rep.checks;
                    if (s.dcode(phi[x], h(phi[x2])) != s.dcode(phi[g(x)], h(phi[g2(x2)]))) {
                        rep.ok = false;
                        if (rep.detail.empty())
                            rep.detail = "pinned displacement identity failed";
                        return rep;
                    }
                }
        }
    return rep;
}

} // namespace ultra
