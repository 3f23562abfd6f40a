#pragma once

// Working window over an ultrametric space.  Two backings share one
// interface: a fixed finite space taken at face value, and a truncation of
// a regular description read as a finite window onto the infinite space it
// unfolds.  Orbit cardinalities, point classes and extension witnesses are
// always answered for the underlying space, not for the window as a bare
// finite metric space.  Description-backed ambients can widen (deepen or
// broaden the truncation) when a construction needs points the current
// window lacks; fixed ambients cannot, and raise instead.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canonical.hpp"
#include "isometry.hpp"
#include "regular_desc.hpp"

namespace ultra {

// ---------------------------------------------------------------------------
// pins and forcing
// ---------------------------------------------------------------------------

// Balls setwise fixed by every isometry that fixes each pin setwise:
// exactly the balls containing a pin.  The image of such a ball is a ball
// of the same radius containing the same pin, hence the ball itself.
// Descendants of a pin are not forced, only the pin and its ancestors.
inline std::vector<char> mark_forced(const BallTree& t, const FDFamily& pins) {
    std::vector<char> forced(t.nodes.size(), 0);
    for (int b : pins)
        for (int v = b; v != -1; v = t.nodes[v].parent) forced[v] = 1;
    return forced;
}

// ---------------------------------------------------------------------------
// widening bookkeeping
// ---------------------------------------------------------------------------

struct WidenMaps {
    std::vector<int> point; // old point id -> point id in the wider window
    std::vector<int> node;  // old node id  -> node id in the wider window
};

// Thrown internally when a construction needs points outside the current
// window.  Top-level operations catch it, widen, remap and retry; it never
// escapes to callers.
struct NeedWiderWindow {
    int extra_depth = 0;
    int extra_width = 0;
    std::string what;
};

struct AmbientExtend {
    bool class_ok = false;                            // per-point classes match
    std::optional<std::pair<int, int>> mismatch;      // (x, f(x)) violating pair
    std::optional<Isometry> witness;                  // total window isometry
};

// ---------------------------------------------------------------------------
// Ambient
// ---------------------------------------------------------------------------

class Ambient {
public:
    static Ambient fixed(FiniteSpace s) {
        Ambient a;
        a.desc_backed_ = false;
        a.space_ = std::move(s);
        a.tree_ = build_ball_tree(a.space_);
        a.codes_ = subtree_codes(a.tree_);
        canonicalize(a.tree_, a.codes_);
        return a;
    }

    static Ambient window(const RegularSpaceDesc& d, int depth, int width) {
        Ambient a;
        a.desc_backed_ = true;
        a.tr_ = truncate_desc(d, depth, width);
        a.space_ = a.tr_.space;
        a.tree_ = a.tr_.tree;
        a.codes_ = a.tr_.codes;
        a.type_equiv_ = type_equivalence(a.tr_.desc);
        return a;
    }

    bool desc_backed() const { return desc_backed_; }
    const FiniteSpace& space() const { return space_; }
    const BallTree& tree() const { return tree_; }
    const std::vector<std::string>& codes() const { return codes_; }
    const Truncation& truncation() const { return tr_; }
    int n() const { return space_.n(); }
    int root() const { return tree_.root; }
    const std::string& label(int p) const { return space_.label(p); }

    // -----------------------------------------------------------------------
    // point classes
    // -----------------------------------------------------------------------

    // Class id per point: two points are in one class iff some isometry of
    // the underlying space (restricted to the ball `from` when given) maps
    // one to the other.  For fixed spaces that is the path of subtree codes
    // below `from`; for windows the path of (type class, ladder phase,
    // code) steps, so that cut leaves of different types stay apart.
    const std::vector<int>& point_classes(int from = -1) const {
        int root = from == -1 ? tree_.root : from;
        auto it = pclass_cache_.find(root);
        if (it != pclass_cache_.end()) return it->second;

        std::vector<int> cls(space_.n(), -1);
        std::map<std::string, int> intern;
        for (int p : tree_.nodes[root].pts) {
            std::string key;
            std::vector<int> path;
            for (int v = tree_.point_leaf[p]; v != root; v = tree_.nodes[v].parent)
                path.push_back(v);
            for (auto vi = path.rbegin(); vi != path.rend(); ++vi) key += step_key(*vi) + "/";
            auto [pos, fresh] = intern.try_emplace(key, static_cast<int>(intern.size()));
            (void)fresh;
            cls[p] = pos->second;
        }
        return pclass_cache_.emplace(root, std::move(cls)).first->second;
    }

    bool points_equiv(int a, int b, int from = -1) const {
        const auto& cls = point_classes(from);
        return cls[a] == cls[b];
    }

    // Key identifying a node's sibling class across parents: nodes with
    // equal keys under interchangeable parents are interchangeable.
    std::string step_key(int v) const {
        if (!desc_backed_) return codes_[v];
        return "t" + std::to_string(type_equiv_[tr_.node_type[v]]) + ":p" +
               std::to_string(tr_.node_phase[v]) + ":" + codes_[v];
    }

    // -----------------------------------------------------------------------
    // orbits of balls
    // -----------------------------------------------------------------------

    // Cardinality of the orbit of ball C under the isometries of the
    // underlying space (of the sub-ball `from` when given) that fix every
    // pin setwise.
    //
    // Fixed backing: exact count of window balls with the same pin-marked
    // path key.  Window backing: the orbit is a product of per-step factors
    // along the path from the effective root down to C, with omega
    // absorbing.  A forced step contributes 1.  A step whose parent is
    // anchored (forced or the effective root) and has a forced child is an
    // exact divergence: images must diverge from that pin at exactly the
    // parent's level, giving class size minus forced members, dense or
    // not.  Every other step is only confined to the parent ball: in a
    // dense region the levels strictly between the step and its parent
    // carry unboundedly many positions (omega); in a discrete region the
    // window children are all there is (class size).
    Card orbit_card(int C, const FDFamily& pins, int from = -1) const {
        int eff_root = from == -1 ? tree_.root : from;
        if (!desc_backed_) return Card::fin(BigInt(window_orbit(C, pins, from).size()));

        if (eff_root == tree_.root && tr_.has_spine_above && pins.empty())
            return Card::inf(); // every ball shifts along the spine
        if (C == eff_root) return Card::fin(1);

        auto forced = mark_forced(tree_, pins);
        std::vector<int> path; // eff_root (excluded) down to C
        for (int v = C; v != eff_root; v = tree_.nodes[v].parent) {
            path.push_back(v);
            if (tree_.nodes[v].parent == -1)
                throw PreconditionError("ball lies outside the requested sub-ball");
        }
        std::reverse(path.begin(), path.end());

        Card acc = Card::fin(1);
        for (int v : path) {
            if (forced[v]) continue;
            int w = tree_.nodes[v].parent;
            Card s = tr_.class_card[tr_.node_class[v]];
            bool anchored = forced[w] || w == eff_root;
            bool child_pin = false;
            for (int c : tree_.nodes[w].children)
                if (forced[c]) child_pin = true;
            if (anchored && child_pin) {
                if (!s.omega) {
                    BigInt mf = 0;
                    for (int m : tr_.class_members[tr_.node_class[v]])
                        if (forced[m]) ++mf;
                    s = Card::fin(s.count - mf);
                } // omega minus finitely many forced members stays omega
                acc *= s;
            } else {
                acc *= gap_dense(w) ? Card::inf() : s;
            }
            if (acc.omega) break;
        }
        return acc;
    }

    bool extremal(int C, const FDFamily& pins, int from = -1) const {
        Card c = orbit_card(C, pins, from);
        return c.omega || c.is_one();
    }

    // Window balls in the orbit of C.  Exact for fixed backings and for
    // finite orbits over windows; for infinite orbits over windows it
    // returns the members the window happens to materialize.
    std::vector<int> window_orbit(int C, const FDFamily& pins, int from = -1) const {
        int eff_root = from == -1 ? tree_.root : from;
        if (!desc_backed_) {
            auto mcodes = subtree_codes(tree_, Marks::pin_family(tree_, pins));
            auto key = [&](int v) {
                std::string k;
                std::vector<int> path;
                for (int u = v; u != eff_root; u = tree_.nodes[u].parent) {
                    path.push_back(u);
                    if (tree_.nodes[u].parent == -1 && u != eff_root)
                        throw PreconditionError("ball lies outside the requested sub-ball");
                }
                for (auto ui = path.rbegin(); ui != path.rend(); ++ui) k += mcodes[*ui] + "/";
                return k;
            };
            std::string want = key(C);
            std::vector<int> out;
            collect_subtree(eff_root, [&](int v) {
                if (key(v) == want) out.push_back(v);
            });
            return out;
        }

        auto forced = mark_forced(tree_, pins);
        if (C == eff_root) return {C};
        std::vector<int> path;
        for (int v = C; v != eff_root; v = tree_.nodes[v].parent) path.push_back(v);
        std::reverse(path.begin(), path.end());

        std::vector<int> layer{eff_root};
        for (int v : path) {
            std::vector<int> next;
            if (forced[v]) {
                next.push_back(v);
            } else {
                std::string want = step_key(v);
                for (int p : layer)
                    for (int c : tree_.nodes[p].children)
                        if (!forced[c] && step_key(c) == want) next.push_back(c);
            }
            layer = std::move(next);
        }
        std::sort(layer.begin(), layer.end());
        return layer;
    }

    // Children of parent(v) interchangeable with v (v included).
    std::vector<int> sibling_class_of(int v) const {
        if (tree_.nodes[v].parent == -1) return {v};
        std::vector<int> out;
        std::string want = step_key(v);
        for (int c : tree_.nodes[tree_.nodes[v].parent].children)
            if (step_key(c) == want) out.push_back(c);
        return out;
    }

    // -----------------------------------------------------------------------
    // extension
    // -----------------------------------------------------------------------

    // A finite partial isometry extends to an isometry of the underlying
    // space iff every x and f(x) lie in one point class.  The witness is a
    // total window isometry grown greedily: smallest unmapped point first,
    // smallest same-class candidate matching all distances.  Over a window
    // the candidate may not be materialized yet; that is reported as a
    // missing witness with class_ok still true, and the caller widens.
    AmbientExtend extend(const PartialIso& f, bool want_witness = true, int from = -1) const {
        validate_partial_isometry(space_, f);
        int eff_root = from == -1 ? tree_.root : from;
        const auto& cls = point_classes(from);
        AmbientExtend res;
        for (auto& [x, fx] : f.pairs) {
            if (cls[x] < 0 || cls[fx] < 0)
                throw PreconditionError("partial isometry leaves the requested sub-ball");
            if (cls[x] != cls[fx]) {
                res.mismatch = {x, fx};
                return res;
            }
        }
        res.class_ok = true;
        if (!want_witness) return res;

        const auto& dom_pts = tree_.nodes[eff_root].pts;
        std::vector<int> F(space_.n(), -1);
        std::vector<char> used(space_.n(), 0);
        for (auto& [x, fx] : f.pairs) {
            F[x] = fx;
            used[fx] = 1;
        }
        for (int x : dom_pts) {
            if (F[x] != -1) continue;
            int pick = -1;
            for (int cand : dom_pts) {
                if (used[cand] || cls[cand] != cls[x]) continue;
                bool ok = true;
                for (int y : dom_pts)
                    if (F[y] != -1 && space_.dcode(cand, F[y]) != space_.dcode(x, y)) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    pick = cand;
                    break;
                }
            }
            if (pick == -1) {
                if (!desc_backed_)
                    throw Error("internal: extension step found no candidate in a fixed space");
                return res; // classes match but the window is too narrow
            }
            F[x] = pick;
            used[pick] = 1;
        }
        if (from == -1) {
            Isometry g;
            g.map = std::move(F);
            if (!is_isometry(space_, g)) throw Error("internal: greedy extension is not an isometry");
            res.witness = std::move(g);
        } else {
            // identity off the sub-ball
            Isometry g = Isometry::identity(space_.n());
            for (int x : dom_pts) g.map[x] = F[x];
            if (!is_isometry(space_, g)) throw Error("internal: greedy extension is not an isometry");
            res.witness = std::move(g);
        }
        return res;
    }

    // -----------------------------------------------------------------------
    // ball swaps
    // -----------------------------------------------------------------------

    // Window isometry exchanging two disjoint balls of one sibling class by
    // the canonical alignment of their subtrees, identity elsewhere.  The
    // swap respects point classes, so it witnesses an isometry of the
    // underlying space.
    Isometry aligned_swap(int a, int b) const {
        if (a == b) return Isometry::identity(space_.n());
        if (tree_.nodes[a].parent != tree_.nodes[b].parent || step_key(a) != step_key(b))
            throw PreconditionError("aligned swap needs interchangeable sibling balls");
        Isometry g = Isometry::identity(space_.n());
        align_into(a, b, g);
        align_into(b, a, g);
        if (!is_isometry(space_, g)) throw Error("internal: aligned swap is not an isometry");
        return g;
    }

    // One-directional canonical alignment a -> b recorded into g.
    void align_into(int a, int b, Isometry& g) const {
        if (tree_.is_leaf(a)) {
            if (!tree_.is_leaf(b)) throw Error("internal: aligned balls differ in shape");
            g.map[tree_.nodes[a].point] = tree_.nodes[b].point;
            return;
        }
        auto groups = [&](int v) {
            std::map<std::string, std::vector<int>> gs;
            for (int c : tree_.nodes[v].children) gs[step_key(c)].push_back(c);
            for (auto& [k, vec] : gs)
                std::sort(vec.begin(), vec.end(), [&](int x, int y) {
                    return tree_.nodes[x].pts.front() < tree_.nodes[y].pts.front();
                });
            return gs;
        };
        auto ga = groups(a), gb = groups(b);
        if (ga.size() != gb.size()) throw Error("internal: aligned balls differ in shape");
        auto ita = ga.begin();
        auto itb = gb.begin();
        for (; ita != ga.end(); ++ita, ++itb) {
            if (ita->first != itb->first || ita->second.size() != itb->second.size())
                throw Error("internal: aligned balls differ in shape");
            for (size_t i = 0; i < ita->second.size(); ++i)
                align_into(ita->second[i], itb->second[i], g);
        }
    }

    // -----------------------------------------------------------------------
    // widening
    // -----------------------------------------------------------------------

    bool can_widen() const { return desc_backed_; }

    // A deeper and broader window onto the same space.  Old points embed
    // isometrically: each node is re-found by its (edge, instance) path,
    // prefixed by the spine descent when the root moved up, and old cut
    // leaves map to the representative (least-path) point of their ball.
    Ambient widened(int extra_depth, int extra_width, WidenMaps* maps = nullptr) const {
        if (!desc_backed_) throw PreconditionError("a fixed finite space cannot be widened");
        int base_depth = tr_.depth + extra_depth;
        Ambient wider;
        int old_root_type = tr_.node_type[tree_.root];
        long old_root_phase = tr_.node_phase[tree_.root];
        for (int attempt = 0;; ++attempt) {
            if (attempt > 8)
                throw ResourceBudgetError("widening could not realign the ascending spine");
            wider = Ambient::window(tr_.desc, base_depth + attempt, tr_.width + extra_width);
            const auto& wtr = wider.truncation();
            if (wtr.node_type[wider.tree_.root] != old_root_type) continue;
            if (wtr.node_phase[wider.tree_.root] < old_root_phase) continue;
            break;
        }

        if (maps) {
            const auto& wtr = wider.truncation();
            // spine prefix: walk down the first ascending children until the
            // node matching the old root's type and phase is reached
            int anchor = wider.tree_.root;
            while (wtr.node_type[anchor] != old_root_type ||
                   wtr.node_phase[anchor] != old_root_phase) {
                int next = -1;
                for (int c : wider.tree_.nodes[anchor].children) {
                    if (!tr_.desc.is_ascending_type(wtr.node_type[c])) continue;
                    if (next == -1 || std::pair(wtr.node_edge[c], wtr.node_inst[c]) <
                                          std::pair(wtr.node_edge[next], wtr.node_inst[next]))
                        next = c;
                }
                if (next == -1) throw Error("internal: widening lost the spine anchor");
                anchor = next;
            }

            maps->node.assign(tree_.nodes.size(), -1);
            maps->point.assign(space_.n(), -1);
            for (size_t v = 0; v < tree_.nodes.size(); ++v) {
                int cur = anchor;
                for (auto [edge, inst] : tr_.path_of(static_cast<int>(v))) {
                    int next = -1;
                    for (int c : wider.tree_.nodes[cur].children)
                        if (wtr.node_edge[c] == edge && wtr.node_inst[c] == inst) {
                            next = c;
                            break;
                        }
                    if (next == -1) throw Error("internal: widening dropped a populated path");
                    cur = next;
                }
                maps->node[v] = cur;
            }
            for (int p = 0; p < space_.n(); ++p) {
                int cur = maps->node[tree_.point_leaf[p]];
                while (!wider.tree_.is_leaf(cur)) {
                    int next = -1;
                    for (int c : wider.tree_.nodes[cur].children)
                        if (next == -1 || std::pair(wtr.node_edge[c], wtr.node_inst[c]) <
                                              std::pair(wtr.node_edge[next], wtr.node_inst[next]))
                            next = c;
                    cur = next;
                }
                maps->point[p] = wider.tree_.nodes[cur].point;
            }
            for (int p = 0; p < space_.n(); ++p)
                for (int q = 0; q < space_.n(); ++q)
                    if (space_.d(p, q) != wider.space_.d(maps->point[p], maps->point[q]))
                        throw Error("internal: widening embedding is not isometric");
        }
        return wider;
    }

    // -----------------------------------------------------------------------
    // misc helpers
    // -----------------------------------------------------------------------

    template <class Fn> void collect_subtree(int v, Fn&& fn) const {
        fn(v);
        for (int c : tree_.nodes[v].children) collect_subtree(c, fn);
    }

    // Smallest ball containing all the given points.
    int lca_node(const std::vector<int>& pts) const {
        if (pts.empty()) throw PreconditionError("ball join of an empty point set");
        int v = tree_.point_leaf[pts[0]];
        auto contains = [&](int node, int p) {
            for (int u = tree_.point_leaf[p]; u != -1; u = tree_.nodes[u].parent)
                if (u == node) return true;
            return false;
        };
        for (int p : pts)
            while (!contains(v, p)) v = tree_.nodes[v].parent;
        return v;
    }

private:
    // Levels strictly between a window node's level and its parent's exist
    // exactly when both ends lie inside one dense ladder region.
    bool gap_dense(int w) const {
        if (!desc_backed_) return false;
        int p = tree_.nodes[w].parent;
        if (p == -1) return false;
        return tr_.desc.is_dense_type(tr_.node_type[w]) &&
               tr_.desc.is_dense_type(tr_.node_type[p]);
    }

    bool desc_backed_ = false;
    FiniteSpace space_;
    BallTree tree_;
    std::vector<std::string> codes_;
    Truncation tr_;
    std::vector<int> type_equiv_;
    mutable std::map<int, std::vector<int>> pclass_cache_;
};

} // namespace ultra
