#pragma once

// Scheduled back-and-forth construction of a coherent tuple of partial
// isometries (gamma_0, ..., gamma_n).  Each stage grows a finite set X_k
// closed enough that every extendable partial isometry of the previous
// stage extends inside it; when a scheduled request becomes eligible the
// stage additionally conjugates by a displacement isometry so that the
// request's maps appear inside the built tuple.  The finished state
// carries an audit log showing, stage by stage, that
//   (a) x_k lies in X_k and X_k grows monotonically,
//   (b) each gamma_{i,k} extends the previous stage's map,
//   (c) at every stage whose request fired,
//       h_{k+1}^{-1} gamma_{i,k+1} h_{k+1} agrees with the requested f_i.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ambient.hpp"
#include "displacement.hpp"
#include "extremality.hpp"
#include "hrushovski.hpp"

namespace ultra {

// One scheduled request: realize the maps f_0, ..., f_n (all defined on Z)
// inside the built tuple, relative to a pinned family the space is
// extremal over.
struct GenericRequest {
    std::vector<int> Z;
    std::vector<PartialIso> maps; // one per coordinate of the tuple
    FDFamily family;
};

struct GenericSchedule {
    std::vector<GenericRequest> requests;
    std::vector<int> enumeration; // order points are fed in; defaults to 0,1,2,...
};

struct GenericStage {
    int point = -1;   // the x_k consumed this stage (final coordinates)
    int request = -1; // schedule index considered, -1 for pure growth
    bool fired = false;
    std::string note;
    std::vector<int> X;            // X_k, final coordinates
    std::vector<PartialIso> gamma; // gamma_{i,k}
    PartialIso h;                  // conjugator h_k; empty pairs = identity
    bool cond_a = false, cond_b = false, cond_c = false;
};

struct GenericBuildState {
    Ambient amb;               // window the build finished on
    std::vector<int> to_final; // start-window point -> final point
    int arity = 0;             // n; the tuple has n+1 coordinates
    FDFamily anchor;           // the family A every gamma_i must fix setwise
    std::vector<GenericStage> stages;
    std::vector<PartialIso> gamma; // final tuple, maps on the last stage's X
    std::vector<std::string> log;

    bool all_conditions_hold() const {
        for (const auto& st : stages)
            if (!st.cond_a || !st.cond_b || (st.fired && !st.cond_c)) return false;
        return true;
    }
};

namespace detail {

inline std::optional<int> pmap(const PartialIso& f, int x) {
    for (auto [a, b] : f.pairs)
        if (a == x) return b;
    return std::nullopt;
}

inline bool pextends(const PartialIso& sub, const PartialIso& super) {
    for (auto [a, b] : sub.pairs) {
        auto v = pmap(super, a);
        if (!v || *v != b) return false;
    }
    return true;
}

inline void remap_pairs(PartialIso& f, const std::vector<int>& m) {
    for (auto& [a, b] : f.pairs) {
        a = m[a];
        b = m[b];
    }
}

// Member of the family containing point p, or -1.
inline int member_of(const BallTree& t, const FDFamily& B, int p) {
    for (int b : B)
        for (int v = t.point_leaf[p]; v != -1; v = t.nodes[v].parent)
            if (v == b) return b;
    return -1;
}

} // namespace detail

class GenericBuilder {
public:
    GenericBuilder(const Ambient& start, int arity, FDFamily anchor, GenericSchedule sched,
                   int budget)
        : sched_(std::move(sched)), budget_(budget) {
        st_.amb = start;
        st_.arity = arity;
        st_.anchor = std::move(anchor);
        st_.to_final.resize(start.n());
        for (int p = 0; p < start.n(); ++p) st_.to_final[p] = p;
        validate_fd_family(start.tree(), st_.anchor);
        if (sched_.enumeration.empty())
            for (int p = 0; p < start.n(); ++p) sched_.enumeration.push_back(p);
        for (int p : sched_.enumeration)
            if (p < 0 || p >= start.n())
                throw MalformedInputError("enumeration point out of range");
    }

    GenericBuildState run() {
        prevalidate_requests();
        stage_zero();
        int k = 0;
        while (k < budget_) {
            ++k;
            int req = pending_.empty() ? -1 : pending_.front();
            bool fired = run_stage(k, req);
            if (!pending_.empty()) {
                if (fired) {
                    pending_.pop_front();
                } else {
                    // rotate so one stubborn request cannot starve the rest
                    pending_.push_back(pending_.front());
                    pending_.pop_front();
                }
            }
        }
        for (int r : pending_)
            st_.log.push_back("request " + std::to_string(r) +
                              " never became eligible within the budget");
        st_.gamma = gamma_;
        return std::move(st_);
    }

private:
    // Requests violating the le:main list conditions are dropped up front,
    // with the reason logged; the stage loop only ever sees valid ones.
    void prevalidate_requests() {
        for (int r = 0; r < (int)sched_.requests.size(); ++r) {
            const auto& rq = sched_.requests[r];
            std::string why;
            if (!request_valid(rq, &why)) {
                st_.log.push_back("request " + std::to_string(r) + " skipped: " + why);
                continue;
            }
            pending_.push_back(r);
        }
    }

    bool request_valid(const GenericRequest& rq, std::string* why) {
        if (rq.Z.empty()) {
            *why = "empty point set";
            return false;
        }
        for (int z : rq.Z)
            if (z < 0 || z >= st_.amb.n()) {
                *why = "point out of range";
                return false;
            }
        if ((int)rq.maps.size() != st_.arity + 1) {
            *why = "expected " + std::to_string(st_.arity + 1) + " maps, got " +
                   std::to_string(rq.maps.size());
            return false;
        }
        for (const auto& f : rq.maps) {
            for (int z : rq.Z)
                if (!detail::pmap(f, z)) {
                    *why = "a map is not defined on all of Z";
                    return false;
                }
            try {
                validate_partial_isometry(st_.amb.space(), f);
            } catch (const Error& e) {
                *why = std::string("a map is not a partial isometry: ") + e.what();
                return false;
            }
            auto ext = st_.amb.extend(f, false);
            if (!ext.class_ok) {
                *why = "a map is not extendable within the space";
                if (ext.mismatch)
                    *why += " (breaks at '" + st_.amb.label(ext.mismatch->first) + "')";
                return false;
            }
        }
        try {
            validate_fd_family(st_.amb.tree(), rq.family);
        } catch (const Error& e) {
            *why = std::string("bad family: ") + e.what();
            return false;
        }
        auto bad = r_maximal_non_extremal(st_.amb, rq.family, -1);
        if (!bad.empty()) {
            *why = "the space lacks the extremality property over the family (ball around '" +
                   st_.amb.label(st_.amb.tree().nodes[bad.front()].pts.front()) + "')";
            return false;
        }
        return true;
    }

    void stage_zero() {
        GenericStage s;
        s.point = next_point(0);
        s.X = {s.point};
        for (int b : st_.anchor) {
            int p = st_.amb.tree().nodes[b].pts.front();
            if (std::find(s.X.begin(), s.X.end(), p) == s.X.end()) s.X.push_back(p);
        }
        std::sort(s.X.begin(), s.X.end());
        s.gamma.assign(st_.arity + 1, PartialIso{});
        for (int i = 0; i <= st_.arity; ++i)
            for (int p : s.X) s.gamma[i].pairs.push_back({p, p});
        s.cond_a = s.cond_b = true;
        s.note = "seed stage; identity on a set meeting the anchor family";
        gamma_ = s.gamma;
        X_ = s.X;
        st_.stages.push_back(std::move(s));
    }

    // One stage; returns whether the considered request fired.
    bool run_stage(int k, int req_index) {
        for (int attempt = 0;; ++attempt) {
            try {
                return run_stage_once(k, req_index);
            } catch (const NeedWiderWindow& w) {
                if (attempt >= 8)
                    throw ResourceBudgetError("stage " + std::to_string(k) +
                                              " kept widening while placing " +
                                              std::string(w.what));
                widen(w.extra_depth, w.extra_width);
            }
        }
    }

    bool run_stage_once(int k, int req_index) {
        GenericStage s;
        s.point = next_point(k);
        s.request = req_index;

        const GenericRequest* rq =
            req_index >= 0 ? &sched_.requests[req_index] : nullptr;
        std::string hold;
        bool eligible = rq && hypotheses_hold(*rq, &hold);
        if (rq && !eligible) s.note = "request held back: " + hold;

        std::vector<int> Y = X_;
        if (std::find(Y.begin(), Y.end(), s.point) == Y.end()) Y.push_back(s.point);
        std::sort(Y.begin(), Y.end());

        if (!eligible) {
            // growth stage: close over the new point and extend the tuple
            auto trace = hrushovski_close(st_.amb, Y);
            s.X = trace->Z;
            std::sort(s.X.begin(), s.X.end());
            for (const auto& g : gamma_) s.gamma.push_back(extend_within(st_.amb, *trace, g));
            s.fired = false;
            if (s.note.empty()) s.note = "growth stage";
        } else {
            // firing stage: close, displace, merge the request in
            auto trace = hrushovski_close(st_.amb, Y);
            std::vector<int> Xp = trace->Z; // X'_{k+1}
            std::vector<PartialIso> gp, fp;
            for (const auto& g : gamma_) gp.push_back(extend_within(st_.amb, *trace, g));
            for (const auto& f : rq->maps) fp.push_back(extend_within(st_.amb, *trace, f));

            DisplacementEngine eng(st_.amb);
            auto disp = eng.relative(Xp, rq->family);
            const Isometry& h = disp.h;

            // delta_i = gamma'_i on X', conjugated f'_i on h[X']
            std::vector<PartialIso> delta(gp.size());
            for (size_t i = 0; i < gp.size(); ++i) {
                std::map<int, int> m;
                for (auto [a, b] : gp[i].pairs) m[a] = b;
                for (auto [a, b] : fp[i].pairs) {
                    auto it = m.find(h(a));
                    if (it != m.end() && it->second != h(b))
                        throw Error("internal: stage union disagrees at a fixed point");
                    m[h(a)] = h(b);
                }
                for (auto [a, b] : m) delta[i].pairs.push_back({a, b});
                validate_partial_isometry(st_.amb.space(), delta[i]);
                auto ext = st_.amb.extend(delta[i], false);
                if (!ext.class_ok) throw Error("internal: stage union is not extendable");
            }

            std::vector<int> Y2 = Xp;
            for (int p : Xp) Y2.push_back(h(p));
            std::sort(Y2.begin(), Y2.end());
            Y2.erase(std::unique(Y2.begin(), Y2.end()), Y2.end());
            auto trace2 = hrushovski_close(st_.amb, Y2);
            s.X = trace2->Z;
            std::sort(s.X.begin(), s.X.end());
            for (const auto& d : delta) s.gamma.push_back(extend_within(st_.amb, *trace2, d));
            for (int p : Xp) s.h.pairs.push_back({p, h(p)});
            s.fired = true;

            // audit condition (c) verbatim on the request's Z
            s.cond_c = true;
            for (size_t i = 0; i < s.gamma.size() && s.cond_c; ++i)
                for (int z : rq->Z) {
                    auto hz = detail::pmap(s.h, z);
                    auto ghz = hz ? detail::pmap(s.gamma[i], *hz) : std::nullopt;
                    std::optional<int> back;
                    if (ghz)
                        for (auto [a, b] : s.h.pairs)
                            if (b == *ghz) back = a;
                    auto want = detail::pmap(rq->maps[i], z);
                    if (!back || !want || *back != *want) {
                        s.cond_c = false;
                        st_.log.push_back("condition (c) audit failed at stage " +
                                          std::to_string(k));
                        break;
                    }
                }
        }

        // audit conditions (a) and (b)
        s.cond_a = std::find(s.X.begin(), s.X.end(), s.point) != s.X.end() &&
                   std::includes(s.X.begin(), s.X.end(), X_.begin(), X_.end());
        s.cond_b = true;
        for (size_t i = 0; i < gamma_.size(); ++i)
            s.cond_b = s.cond_b && detail::pextends(gamma_[i], s.gamma[i]);

        gamma_ = s.gamma;
        X_ = s.X;
        bool fired = s.fired;
        st_.stages.push_back(std::move(s));
        return fired;
    }

    // Hypotheses of condition (c): Z and its images already absorbed, and
    // the request's maps move the family exactly as the built tuple does.
    bool hypotheses_hold(const GenericRequest& rq, std::string* why) {
        for (int z : rq.Z)
            if (!std::binary_search(X_.begin(), X_.end(), z)) {
                *why = "Z not yet inside the stage set";
                return false;
            }
        for (const auto& f : rq.maps)
            for (int z : rq.Z)
                if (!std::binary_search(X_.begin(), X_.end(), *detail::pmap(f, z))) {
                    *why = "an image of Z not yet inside the stage set";
                    return false;
                }
        const auto& t = st_.amb.tree();
        for (int b : rq.family) {
            bool met = false;
            for (size_t i = 0; i < rq.maps.size(); ++i) {
                for (int z : rq.Z) {
                    if (detail::member_of(t, {b}, z) != b) continue;
                    met = true;
                    int qf = detail::member_of(t, rq.family, *detail::pmap(rq.maps[i], z));
                    int qg = detail::member_of(t, rq.family, *detail::pmap(gamma_[i], z));
                    if (qf == -1 || qg == -1 || qf != qg) {
                        *why = "maps disagree on where the family member at '" +
                               st_.amb.label(t.nodes[b].pts.front()) + "' goes";
                        return false;
                    }
                }
            }
            if (!met) {
                *why = "Z misses a family member";
                return false;
            }
        }
        return true;
    }

    int next_point(int k) {
        return sched_.enumeration[k % sched_.enumeration.size()];
    }

    void widen(int dd, int dw) {
        WidenMaps maps;
        st_.amb = st_.amb.widened(dd, dw, &maps);
        for (auto& p : st_.to_final) p = maps.point[p];
        for (auto& p : X_) p = maps.point[p];
        std::sort(X_.begin(), X_.end());
        for (auto& g : gamma_) detail::remap_pairs(g, maps.point);
        for (auto& s : st_.stages) {
            for (auto& p : s.X) p = maps.point[p];
            std::sort(s.X.begin(), s.X.end());
            for (auto& g : s.gamma) detail::remap_pairs(g, maps.point);
            detail::remap_pairs(s.h, maps.point);
            if (s.point >= 0) s.point = maps.point[s.point];
        }
        for (auto& b : st_.anchor) b = maps.node[b];
        for (auto& rq : sched_.requests) {
            for (auto& z : rq.Z) z = maps.point[z];
            for (auto& f : rq.maps) detail::remap_pairs(f, maps.point);
            for (auto& b : rq.family) b = maps.node[b];
        }
        for (auto& p : sched_.enumeration) p = maps.point[p];
        st_.log.push_back("window widened to " + std::to_string(st_.amb.n()) + " points");
    }

    GenericSchedule sched_;
    int budget_;
    GenericBuildState st_;
    std::vector<PartialIso> gamma_;
    std::vector<int> X_;
    std::deque<int> pending_;
};

inline GenericBuildState build_generic_tuple(const Ambient& start, int arity,
                                             const FDFamily& anchor,
                                             const GenericSchedule& schedule, int budget) {
    if (arity < 0) throw MalformedInputError("arity must be non-negative");
    if (budget < 0) throw MalformedInputError("budget must be non-negative");
    GenericBuilder b(start, arity, anchor, schedule, budget);
    return b.run();
}

// ---------------------------------------------------------------------------
// Density witnesses: given targets g_i in the stabilizer neighborhood of
// the built tuple, search the window for a conjugator h fixing the family
// setwise with h^{-1} gamma_i h = g_i on the requested set.

struct DensityTarget {
    std::vector<PartialIso> g; // one per tuple coordinate, defined on Z
    FDFamily family;           // the neighborhood family B'
    std::vector<int> Z;        // finite set the match is requested on
};

struct DensityReport {
    bool rejected = false;
    std::string reason; // why the target was rejected
    bool found = false;
    Isometry h;
    long searched = 0;
    std::string note;
};

inline DensityReport verify_density_witness(const GenericBuildState& st,
                                            const DensityTarget& target) {
    DensityReport rep;
    const Ambient& amb = st.amb;
    const auto& t = amb.tree();
    auto reject = [&](const std::string& why) {
        rep.rejected = true;
        rep.reason = why;
        return rep;
    };
    if ((int)target.g.size() != st.arity + 1)
        return reject("expected " + std::to_string(st.arity + 1) + " maps");
    try {
        validate_fd_family(t, target.family);
    } catch (const Error& e) {
        return reject(std::string("bad family: ") + e.what());
    }
    for (int b : target.family) {
        bool met = false;
        for (int z : target.Z) met = met || detail::member_of(t, {b}, z) == b;
        if (!met)
            return reject("the requested set misses the family member at '" +
                          amb.label(t.nodes[b].pts.front()) + "'");
    }
    for (int i = 0; i <= st.arity; ++i)
        for (int z : target.Z) {
            auto gz = detail::pmap(target.g[i], z);
            auto cz = detail::pmap(st.gamma[i], z);
            if (!gz) return reject("a target map is not defined on the requested set");
            if (!cz) return reject("the built tuple does not cover the requested set");
            int bz = detail::member_of(t, target.family, z);
            if (bz == -1) continue;
            int qt = detail::member_of(t, target.family, *gz);
            int qg = detail::member_of(t, target.family, *cz);
            if (qt != qg)
                return reject("map " + std::to_string(i) +
                              " moves the family member at '" +
                              amb.label(t.nodes[bz].pts.front()) +
                              "' differently from the built tuple");
        }
    // brute-force conjugator search over window isometries preserving the
    // point classes and fixing the family setwise
    IsoBudget budget;
    budget.max_points = std::max(budget.max_points, amb.n());
    bool done = false;
    for_each_isometry(t, amb.codes(), budget, [&](const Isometry& h) {
        if (done) return;
        ++rep.searched;
        for (int p = 0; p < amb.n(); ++p)
            if (!amb.points_equiv(p, h(p))) return;
        for (int b : target.family)
            if (image_ball(t, b, h) != b) return;
        Isometry hi = h.inverse();
        for (int i = 0; i <= st.arity; ++i)
            for (int z : target.Z) {
                auto gz = detail::pmap(st.gamma[i], h(z));
                if (!gz || hi(*gz) != *detail::pmap(target.g[i], z)) return;
            }
        rep.found = true;
        rep.h = h;
        done = true;
    });
    if (!done)
        rep.note = "no conjugator in this window; schedule the target as a request and "
                   "rebuild with a larger budget";
    return rep;
}

inline std::vector<DensityReport> verify_density_witness(
    const GenericBuildState& st, const std::vector<DensityTarget>& targets) {
    std::vector<DensityReport> reps;
    for (const auto& tg : targets) reps.push_back(verify_density_witness(st, tg));
    return reps;
}

} // namespace ultra
