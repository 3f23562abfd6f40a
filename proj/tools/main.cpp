// Command-line front end: file formats, subcommands, deterministic reports.
//
// Exit codes: 0 verdict computed (even a negative one), 2 malformed input,
// 3 budget exhausted or inconclusive, 64 usage error.  Reports go to
// standard output, as plain text or JSON (--json); error messages go to
// standard error.  Identical inputs and flags produce byte-identical
// output; wall-clock timing is only added under --timing, which is
// excluded from that guarantee.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ultra/displacement.hpp"
#include "ultra/extremality.hpp"
#include "ultra/generic.hpp"
#include "ultra/hrushovski.hpp"
#include "ultra/io.hpp"
#include "ultra/quotient.hpp"

using namespace ultra;

namespace {

constexpr const char* kTool = "ultra 1.0.0";

uint64_t g_budget = 0; // ULTRA_BUDGET override, 0 = unset
bool g_json = false;
bool g_timing = false;

// ---------------------------------------------------------------------------
// report plumbing
// ---------------------------------------------------------------------------

struct Out {
    Json rep;
    std::vector<std::string> lines;

    explicit Out(const std::string& command) {
        rep["schema"] = 1;
        rep["tool"] = kTool;
        rep["command"] = command;
    }
    void line(std::string s) { lines.push_back(std::move(s)); }
    void input(const std::vector<std::pair<std::string, std::string>>& files) {
        Json in = Json::array();
        std::string all;
        for (const auto& [path, bytes] : files) {
            in.push_back(Json{{"file", path}, {"digest", digest_hex(bytes)}});
            all += bytes;
        }
        rep["input"] = std::move(in);
        rep["input_digest"] = digest_hex(all);
    }
    int flush(int code = 0) {
        if (g_json)
            std::cout << rep.dump(2) << "\n";
        else
            for (const auto& l : lines) std::cout << l << "\n";
        return code;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedInputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MalformedInputError("cannot write '" + path + "'");
    out << bytes;
}

Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw MalformedInputError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// input loading
// ---------------------------------------------------------------------------

bool looks_like_json(const std::string& text) {
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
        return c == '{';
    }
    return false;
}

// CSV matrix or JSON dendrogram, by content.
FiniteSpace load_space(const std::string& path, std::string* raw) {
    std::string text = read_file(path);
    if (raw) *raw = text;
    if (looks_like_json(text)) {
        Json j = parse_json(text, path);
        if (j.contains("types"))
            throw MalformedInputError(path + " is a space description; this command needs a "
                                             "finite space (CSV matrix or dendrogram)");
        return read_dendrogram_json(j);
    }
    std::istringstream in(text);
    return read_csv_matrix(in);
}

RegularSpaceDesc load_desc(const std::string& path, std::string* raw) {
    std::string text = read_file(path);
    if (raw) *raw = text;
    return read_desc_json(parse_json(text, path));
}

// Ball tree of a finite space; rejects non-ultrametric input.
BallTree tree_of(const FiniteSpace& s, const std::string& path) {
    if (auto bad = check_ultrametric(s))
        throw MalformedInputError(path + " is not ultrametric: " + bad->describe(s));
    return build_ball_tree(s);
}

int point_in(const Ambient& amb, const std::string& label) {
    for (int p = 0; p < amb.n(); ++p)
        if (amb.label(p) == label) return p;
    throw MalformedInputError("no point labeled '" + label + "' in this window");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<int> parse_points(const std::string& txt, const Ambient& amb) {
    std::vector<int> pts;
    for (const auto& lab : split(txt, ','))
        if (!lab.empty()) pts.push_back(point_in(amb, lab));
    return pts;
}

PartialIso parse_map(const std::string& txt, const Ambient& amb) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& entry : split(txt, ',')) {
        if (entry.empty()) continue;
        auto lr = split(entry, ':');
        if (lr.size() != 2)
            throw MalformedInputError("map entry '" + entry + "' is not of the form a:b");
        pairs.emplace_back(point_in(amb, lr[0]), point_in(amb, lr[1]));
    }
    return PartialIso::of(std::move(pairs));
}

// "p@r" names the ball of radius r around the point labeled p.
int parse_ball(const std::string& txt, const Ambient& amb) {
    auto at = txt.find('@');
    if (at == std::string::npos)
        throw MalformedInputError("ball reference '" + txt + "' is not of the form point@radius");
    int p = point_in(amb, txt.substr(0, at));
    return ball_at_radius(amb.tree(), p, parse_rational(txt.substr(at + 1)));
}

FDFamily parse_family(const std::string& txt, const Ambient& amb) {
    FDFamily fam;
    for (const auto& entry : split(txt, ','))
        if (!entry.empty()) fam.push_back(parse_ball(entry, amb));
    std::sort(fam.begin(), fam.end());
    fam.erase(std::unique(fam.begin(), fam.end()), fam.end());
    validate_fd_family(amb.tree(), fam);
    return fam;
}

FDFamily family_from_json(const Json& arr, const Ambient& amb) {
    FDFamily fam;
    for (const auto& bj : arr) {
        int p = point_in(amb, bj.at("point").get<std::string>());
        fam.push_back(ball_at_radius(amb.tree(), p, parse_rational(bj.at("radius").get<std::string>())));
    }
    std::sort(fam.begin(), fam.end());
    fam.erase(std::unique(fam.begin(), fam.end()), fam.end());
    validate_fd_family(amb.tree(), fam);
    return fam;
}

// ---------------------------------------------------------------------------
// pretty-printing
// ---------------------------------------------------------------------------

std::string least_label(const Ambient& amb, int node) {
    std::string best;
    for (int p : amb.tree().nodes[node].pts)
        if (best.empty() || amb.label(p) < best) best = amb.label(p);
    return best;
}

std::string ball_str(const Ambient& amb, int node) {
    const auto& nd = amb.tree().nodes[node];
    return "ball(" + least_label(amb, node) + " @ " + rat_str(amb.tree().level_of(node)) + ", " +
           std::to_string(nd.pts.size()) + " pts)";
}

Json ball_json(const Ambient& amb, int node) {
    return Json{{"around", least_label(amb, node)},
                {"level", rat_str(amb.tree().level_of(node))},
                {"size", amb.tree().nodes[node].pts.size()}};
}

std::string perm_str(const Ambient& amb, const Isometry& g) {
    std::string out;
    std::vector<char> seen(g.n(), 0);
    for (int i = 0; i < g.n(); ++i) {
        if (seen[i] || g(i) == i) continue;
        out += "(";
        bool first = true;
        for (int j = i; !seen[j]; j = g(j)) {
            seen[j] = 1;
            if (!first) out += " ";
            out += amb.label(j);
            first = false;
        }
        out += ")";
    }
    return out.empty() ? "id" : out;
}

Json pairs_json(const Ambient& amb, const PartialIso& f) {
    Json arr = Json::array();
    for (auto [a, b] : f.pairs) arr.push_back(Json::array({amb.label(a), amb.label(b)}));
    return arr;
}

std::string pairs_str(const Ambient& amb, const PartialIso& f) {
    std::string out;
    for (auto [a, b] : f.pairs) {
        if (!out.empty()) out += ",";
        out += amb.label(a) + ":" + amb.label(b);
    }
    return out.empty() ? "(empty)" : out;
}

std::vector<std::string> label_list(const Ambient& amb, const std::vector<int>& pts) {
    std::vector<std::string> out;
    out.reserve(pts.size());
    for (int p : pts) out.push_back(amb.label(p));
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared option bundles
// ---------------------------------------------------------------------------

struct SpaceOrDesc {
    std::string space_path;
    std::string desc_path;
    int depth = 3;
    int width = 2;

    void add_to(CLI::App* cmd, bool positional_space = false) {
        if (positional_space)
            cmd->add_option("space", space_path, "finite space (CSV matrix or dendrogram JSON)");
        else
            cmd->add_option("--space", space_path, "finite space (CSV matrix or dendrogram JSON)");
        cmd->add_option("--desc", desc_path, "regular space description (JSON)");
        cmd->add_option("--depth", depth, "window depth for descriptions")->capture_default_str();
        cmd->add_option("--width", width, "window width for omega edges")->capture_default_str();
    }

    Ambient make(Out& out) const {
        if (space_path.empty() == desc_path.empty())
            throw MalformedInputError("give exactly one of --space or --desc");
        std::string raw;
        if (!space_path.empty()) {
            FiniteSpace s = load_space(space_path, &raw);
            out.input({{space_path, raw}});
            tree_of(s, space_path);
            return Ambient::fixed(std::move(s));
        }
        RegularSpaceDesc d = load_desc(desc_path, &raw);
        out.input({{desc_path, raw}});
        out.rep["window"] = Json{{"depth", depth}, {"width", width}};
        return Ambient::window(d, depth, width);
    }
};

IsoBudget enum_budget() {
    IsoBudget b;
    if (g_budget) b.max_count = g_budget;
    return b;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path) {
    Out out("validate");
    std::string raw;
    FiniteSpace s = load_space(path, &raw);
    out.input({{path, raw}});
    out.rep["points"] = s.n();
    out.rep["distinct_distances"] = s.distance_set().size();
    auto bad = check_ultrametric(s);
    out.rep["verdict"] = Json{{"ultrametric", !bad.has_value()}};
    if (bad) {
        out.rep["verdict"]["violation"] = Json{{"x", s.label(bad->x)},
                                               {"y", s.label(bad->y)},
                                               {"z", s.label(bad->z)},
                                               {"detail", bad->describe(s)}};
        out.line("not ultrametric: " + bad->describe(s));
        return out.flush(2);
    }
    out.line("ultrametric: " + std::to_string(s.n()) + " points, " +
             std::to_string(s.distance_set().size()) + " distinct distances");
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// canon
// ---------------------------------------------------------------------------

int cmd_canon(const std::string& path, const std::string& dot_path) {
    Out out("canon");
    std::string raw;
    FiniteSpace s = load_space(path, &raw);
    out.input({{path, raw}});
    BallTree t = tree_of(s, path);
    auto codes = subtree_codes(t);
    canonicalize(t, codes);
    out.rep["canonical_code"] = codes[t.root];
    out.rep["code_digest"] = digest_hex(codes[t.root]);
    out.line("canonical code: " + codes[t.root]);
    out.line("digest: " + digest_hex(codes[t.root]));
    if (!dot_path.empty()) {
        write_file(dot_path, ball_tree_dot(t, s.labels()));
        out.line("ball tree written to " + dot_path);
        out.rep["dot_file"] = dot_path;
    }
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// iso
// ---------------------------------------------------------------------------

int cmd_iso(const std::string& path_a, const std::string& path_b, bool enumerate, int limit) {
    Out out("iso");
    std::string raw_a;
    FiniteSpace a = load_space(path_a, &raw_a);
    BallTree ta = tree_of(a, path_a);
    auto codes_a = subtree_codes(ta);

    if (path_b.empty()) {
        out.input({{path_a, raw_a}});
        Ambient amb = Ambient::fixed(a);
        BigInt n = count_isometries(ta, codes_a);
        out.rep["isometry_count"] = n.str();
        out.line("isometry group size: " + n.str());
        if (enumerate) {
            IsoBudget bud = enum_budget();
            bud.max_points = std::max(bud.max_points, a.n());
            if (n > BigInt(bud.max_count))
                throw ResourceBudgetError("group has " + n.str() +
                                          " elements; raise ULTRA_BUDGET to list them");
            auto gs = enumerate_isometries(ta, codes_a, bud);
            Json arr = Json::array();
            int shown = 0;
            for (const auto& g : gs) {
                if (shown++ >= limit) break;
                arr.push_back(perm_str(amb, g));
                out.line("  " + perm_str(amb, g));
            }
            out.rep["isometries"] = std::move(arr);
            if (static_cast<int>(gs.size()) > limit) {
                out.rep["truncated_listing"] = true;
                out.line("  ... " + std::to_string(gs.size() - limit) + " more");
            }
        }
        return out.flush(0);
    }

    std::string raw_b;
    FiniteSpace b = load_space(path_b, &raw_b);
    out.input({{path_a, raw_a}, {path_b, raw_b}});
    BallTree tb = tree_of(b, path_b);
    auto codes_b = subtree_codes(tb);
    bool same = codes_a[ta.root] == codes_b[tb.root];
    out.rep["isometric"] = same;
    if (!same) {
        out.line("not isometric");
        return out.flush(0);
    }
    // canonical order pairs the two point sequences leaf by leaf
    canonicalize(ta, codes_a);
    canonicalize(tb, codes_b);
    std::vector<int> la, lb;
    auto dfs = [](const BallTree& t, std::vector<int>& outp) {
        auto rec = [&](auto&& self, int v) -> void {
            if (t.nodes[v].children.empty()) {
                outp.push_back(t.nodes[v].point);
                return;
            }
            for (int c : t.nodes[v].children) self(self, c);
        };
        rec(rec, t.root);
    };
    dfs(ta, la);
    dfs(tb, lb);
    Json wit = Json::array();
    std::vector<std::string> human;
    for (size_t i = 0; i < la.size(); ++i) {
        wit.push_back(Json::array({a.label(la[i]), b.label(lb[i])}));
        human.push_back(a.label(la[i]) + ":" + b.label(lb[i]));
    }
    for (size_t i = 0; i < la.size(); ++i)
        for (size_t j = i + 1; j < la.size(); ++j)
            if (a.d(la[i], la[j]) != b.d(lb[i], lb[j]))
                throw Error("internal: canonical pairing is not distance-preserving");
    out.rep["witness"] = std::move(wit);
    out.line("isometric; witness " + join(human, ","));
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// orbits
// ---------------------------------------------------------------------------

int cmd_orbits(const std::string& path, bool balls) {
    Out out("orbits");
    std::string raw;
    FiniteSpace s = load_space(path, &raw);
    out.input({{path, raw}});
    BallTree t = tree_of(s, path);
    auto codes = subtree_codes(t);
    Ambient amb = Ambient::fixed(s);
    auto orbs = point_orbits(t, codes);
    Json arr = Json::array();
    for (const auto& o : orbs) {
        arr.push_back(label_list(amb, o));
        out.line("orbit: " + join(label_list(amb, o), ","));
    }
    out.rep["point_orbits"] = std::move(arr);
    if (balls) {
        auto cls = orbit_classes(t, codes);
        std::map<int, std::vector<int>> by;
        for (size_t v = 0; v < t.nodes.size(); ++v)
            if (!t.nodes[v].children.empty()) by[cls[v]].push_back(static_cast<int>(v));
        Json barr = Json::array();
        for (auto& [c, nodes] : by) {
            std::sort(nodes.begin(), nodes.end(),
                      [&](int x, int y) { return t.nodes[x].pts < t.nodes[y].pts; });
            Json grp = Json::array();
            std::vector<std::string> human;
            for (int v : nodes) {
                grp.push_back(ball_json(amb, v));
                human.push_back(ball_str(amb, v));
            }
            barr.push_back(std::move(grp));
            out.line("ball class: " + join(human, " "));
        }
        out.rep["ball_orbits"] = std::move(barr);
    }
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// extend
// ---------------------------------------------------------------------------

int cmd_extend(const SpaceOrDesc& src, const std::string& map_txt, bool want_witness) {
    Out out("extend");
    Ambient amb = src.make(out);
    PartialIso f = parse_map(map_txt, amb);
    try {
        validate_partial_isometry(amb.space(), f);
    } catch (const PreconditionError& e) {
        out.rep["verdict"] = Json{{"partial_isometry", false}, {"reason", e.what()}};
        out.line(std::string("not a partial isometry: ") + e.what());
        return out.flush(0);
    }
    auto ext = amb.extend(f, want_witness);
    out.rep["verdict"] = Json{{"partial_isometry", true}, {"extendable", ext.class_ok}};
    if (!ext.class_ok) {
        std::string why = "no extension";
        if (ext.mismatch)
            why += ": the points " + amb.label(ext.mismatch->first) + " and " +
                   amb.label(ext.mismatch->second) + " sit in non-interchangeable balls";
        out.rep["verdict"]["reason"] = why;
        out.line("not extendable (" + why + ")");
        return out.flush(0);
    }
    out.line("extendable");
    if (want_witness && ext.witness) {
        out.rep["witness"] = perm_str(amb, *ext.witness);
        out.line("witness: " + perm_str(amb, *ext.witness));
    }
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// hrushovski
// ---------------------------------------------------------------------------

Json trace_json(const Ambient& amb, const HrushovskiTrace& tr) {
    Json j;
    switch (tr.kind) {
        case HrushovskiTrace::Kind::Singleton: j["kind"] = "singleton"; break;
        case HrushovskiTrace::Kind::Split: j["kind"] = "split"; break;
        case HrushovskiTrace::Kind::Chain: j["kind"] = "chain"; break;
    }
    j["Y"] = label_list(amb, tr.Y);
    j["Z"] = label_list(amb, tr.Z);
    j["diameter"] = rat_str(amb.tree().levels[tr.diam_code]);
    Json balls = Json::array();
    for (int b : tr.balls) balls.push_back(ball_json(amb, b));
    j["balls"] = std::move(balls);
    if (tr.kind == HrushovskiTrace::Kind::Split) {
        j["linked_groups"] = tr.classes;
        Json subs = Json::array();
        for (const auto& sub : tr.class_sub) subs.push_back(trace_json(amb, *sub));
        j["group_closures"] = std::move(subs);
    }
    if (tr.kind == HrushovskiTrace::Kind::Chain) {
        Json ws = Json::array();
        for (const auto& w : tr.W) ws.push_back(label_list(amb, w));
        j["aligned_sets"] = std::move(ws);
        Json maps = Json::array();
        for (size_t i = 0; i < tr.chain_iso.size(); ++i) {
            PartialIso restr;
            for (int p : tr.W[0]) restr.pairs.emplace_back(p, tr.chain_iso[i](p));
            std::sort(restr.pairs.begin(), restr.pairs.end());
            maps.push_back(pairs_json(amb, restr));
        }
        j["chain_maps"] = std::move(maps);
        j["base_closure"] = trace_json(amb, *tr.chain_sub);
        Json zs = Json::array();
        for (const auto& z : tr.Z_per_ball) zs.push_back(label_list(amb, z));
        j["ball_images"] = std::move(zs);
    }
    return j;
}

int cmd_hrushovski(const SpaceOrDesc& src, const std::string& set_txt,
                   const std::string& trace_path) {
    Out out("hrushovski");
    Ambient amb = src.make(out);
    std::vector<int> Y = parse_points(set_txt, amb);
    if (Y.empty()) throw MalformedInputError("--set names no points");

    std::unique_ptr<HrushovskiTrace> tr;
    for (int attempt = 0;; ++attempt) {
        try {
            tr = hrushovski_close(amb, Y);
            break;
        } catch (const NeedWiderWindow& w) {
            if (!amb.can_widen())
                throw ClosureImpossibleError("this space has no room for " + w.what);
            if (attempt >= 6)
                throw ResourceBudgetError("window kept growing while placing " + w.what);
            WidenMaps maps;
            amb = amb.widened(w.extra_depth, w.extra_width, &maps);
            for (int& y : Y) y = maps.point[y];
        }
    }
    out.rep["Y"] = label_list(amb, tr->Y);
    out.rep["Z"] = label_list(amb, tr->Z);
    out.rep["growth"] = Json{{"from", tr->Y.size()}, {"to", tr->Z.size()}};
    out.line("closure of {" + join(label_list(amb, tr->Y), ",") + "}:");
    out.line("  Z = {" + join(label_list(amb, tr->Z), ",") + "}  (" +
             std::to_string(tr->Y.size()) + " -> " + std::to_string(tr->Z.size()) + " points)");
    if (!trace_path.empty()) {
        write_file(trace_path, trace_json(amb, *tr).dump(2) + "\n");
        out.rep["trace_file"] = trace_path;
        out.line("trace written to " + trace_path);
    }
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// extremal
// ---------------------------------------------------------------------------

int cmd_extremal(const SpaceOrDesc& src, const std::string& family_txt,
                 const std::string& ball_txt, bool strengthen) {
    Out out("extremal");
    Ambient amb = src.make(out);
    FDFamily fam = family_txt.empty() ? FDFamily{} : parse_family(family_txt, amb);
    Json famj = Json::array();
    for (int b : fam) famj.push_back(ball_json(amb, b));
    out.rep["family"] = std::move(famj);

    if (!ball_txt.empty()) {
        int C = parse_ball(ball_txt, amb);
        auto v = classify_ball(amb, C, fam);
        out.rep["ball"] = ball_json(amb, C);
        out.rep["verdict"] = Json{{"orbit_cardinality", v.orbit_cardinality.str()},
                                  {"extremal", v.extremal},
                                  {"r_maximal_non_extremal", v.r_maximal}};
        out.line(ball_str(amb, C) + ": orbit " + v.orbit_cardinality.str() + ", " +
                 (v.extremal ? "extremal" : (v.r_maximal ? "non-extremal (r-maximal)"
                                                         : "non-extremal")));
        return out.flush(0);
    }

    auto bad = r_maximal_non_extremal(amb, fam);
    out.rep["verdict"] = Json{{"extremality_property", bad.empty()}};
    Json badj = Json::array();
    for (int b : bad) badj.push_back(ball_json(amb, b));
    out.rep["r_maximal_non_extremal"] = std::move(badj);
    if (bad.empty()) {
        out.line("every ball is extremal over the family");
    } else {
        out.line(std::to_string(bad.size()) + " r-maximal non-extremal ball(s):");
        for (int b : bad) out.line("  " + ball_str(amb, b));
    }
    if (strengthen && !bad.empty()) {
        int rounds = g_budget ? static_cast<int>(std::min<uint64_t>(g_budget, 4096)) : 64;
        FDFamily stronger = strengthen_to_extremality(amb, fam, rounds);
        Json sj = Json::array();
        std::vector<std::string> human;
        for (int b : stronger) {
            sj.push_back(ball_json(amb, b));
            human.push_back(ball_str(amb, b));
        }
        out.rep["strengthened_family"] = std::move(sj);
        out.line("strengthened family: " + join(human, " "));
    }
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// criterion
// ---------------------------------------------------------------------------

const char* answer_str(CriterionReport::Answer a) {
    switch (a) {
        case CriterionReport::Answer::BasisExists: return "BASIS_EXISTS";
        case CriterionReport::Answer::NoComeagerClass: return "NO_COMEAGER_CLASS";
        default: return "INCONCLUSIVE";
    }
}

int cmd_criterion(const std::string& desc_path, int budget, const std::string& certify_path,
                  const std::string& verify_path) {
    Out out("criterion");
    if (!verify_path.empty()) {
        std::string raw = read_file(verify_path);
        Json certj = parse_json(raw, verify_path);
        CriterionReport rep = read_criterion_report(certj);
        RegularSpaceDesc d;
        if (!desc_path.empty()) {
            std::string draw;
            d = load_desc(desc_path, &draw);
            out.input({{verify_path, raw}, {desc_path, draw}});
        } else if (certj.contains("desc")) {
            out.input({{verify_path, raw}});
            d = read_desc_json(certj["desc"]);
        } else {
            throw MalformedInputError("certificate has no embedded description; pass --desc");
        }
        std::vector<int> depths = rep.verified_depths;
        if (depths.empty()) depths = {2, 3, 4, 5};
        bool all_ok = true;
        Json checks = Json::array();
        for (int dep : depths) {
            std::string why;
            bool ok = verify_criterion_certificate(d, rep, dep, &why);
            checks.push_back(Json{{"depth", dep}, {"ok", ok}, {"why", why}});
            out.line("depth " + std::to_string(dep) + ": " + (ok ? "ok" : "FAILED (" + why + ")"));
            all_ok = all_ok && ok;
        }
        out.rep["answer"] = answer_str(rep.answer);
        out.rep["replay"] = std::move(checks);
        out.rep["verdict"] = Json{{"certificate_valid", all_ok}};
        out.line(all_ok ? "certificate VERIFIED" : "certificate INVALID");
        return out.flush(0);
    }

    if (desc_path.empty()) throw MalformedInputError("criterion needs --desc (or --verify)");
    std::string raw;
    RegularSpaceDesc d = load_desc(desc_path, &raw);
    out.input({{desc_path, raw}});
    int probe = budget > 0 ? budget : 5;
    if (g_budget) probe = static_cast<int>(std::min<uint64_t>(g_budget, 16));
    out.rep["budgets"] = Json{{"probe_depth", probe}};
    CriterionReport rep = decide_ample_generics_criterion(d, probe);
    out.rep["answer"] = answer_str(rep.answer);
    if (rep.mode) out.rep["mode"] = rep.mode;
    out.rep["witness"] = rep.witness;
    out.rep["verified_depths"] = rep.verified_depths;
    out.rep["notes"] = rep.notes;
    std::string human = answer_str(rep.answer);
    if (rep.mode) human += " (failure mode " + std::to_string(rep.mode) + ")";
    if (!rep.witness.empty()) human += ", witness: " + rep.witness;
    out.line(human);
    for (const auto& n : rep.notes) out.line("  note: " + n);
    if (!certify_path.empty() && rep.answer != CriterionReport::Answer::Inconclusive) {
        Json cert = criterion_report_json(rep);
        cert["desc"] = desc_json(d);
        write_file(certify_path, cert.dump(2) + "\n");
        out.rep["certificate_file"] = certify_path;
        out.line("certificate written to " + certify_path);
    }
    return out.flush(rep.answer == CriterionReport::Answer::Inconclusive ? 3 : 0);
}

// ---------------------------------------------------------------------------
// generic
// ---------------------------------------------------------------------------

GenericSchedule parse_schedule(const Json& j, const Ambient& amb, int arity) {
    GenericSchedule sch;
    if (j.contains("schema") && j["schema"].get<int>() != 1)
        throw MalformedInputError("unsupported schedule schema");
    if (j.contains("enumeration"))
        for (const auto& lab : j["enumeration"])
            sch.enumeration.push_back(point_in(amb, lab.get<std::string>()));
    if (j.contains("requests"))
        for (const auto& rj : j["requests"]) {
            GenericRequest r;
            for (const auto& lab : rj.at("Z")) r.Z.push_back(point_in(amb, lab.get<std::string>()));
            for (const auto& mj : rj.at("maps")) {
                std::vector<std::pair<int, int>> prs;
                for (const auto& pr : mj)
                    prs.emplace_back(point_in(amb, pr.at(0).get<std::string>()),
                                     point_in(amb, pr.at(1).get<std::string>()));
                r.maps.push_back(PartialIso::of(std::move(prs)));
            }
            if (static_cast<int>(r.maps.size()) != arity + 1)
                throw MalformedInputError("request has " + std::to_string(r.maps.size()) +
                                          " maps; the tuple has " + std::to_string(arity + 1) +
                                          " coordinates");
            if (rj.contains("family")) r.family = family_from_json(rj["family"], amb);
            sch.requests.push_back(std::move(r));
        }
    return sch;
}

std::vector<DensityTarget> parse_targets(const Json& j, const Ambient& amb, int arity) {
    std::vector<DensityTarget> out;
    if (j.contains("schema") && j["schema"].get<int>() != 1)
        throw MalformedInputError("unsupported targets schema");
    for (const auto& tj : j.at("targets")) {
        DensityTarget t;
        for (const auto& lab : tj.at("Z")) t.Z.push_back(point_in(amb, lab.get<std::string>()));
        for (const auto& mj : tj.at("maps")) {
            std::vector<std::pair<int, int>> prs;
            for (const auto& pr : mj)
                prs.emplace_back(point_in(amb, pr.at(0).get<std::string>()),
                                 point_in(amb, pr.at(1).get<std::string>()));
            t.g.push_back(PartialIso::of(std::move(prs)));
        }
        if (static_cast<int>(t.g.size()) != arity + 1)
            throw MalformedInputError("target has " + std::to_string(t.g.size()) +
                                      " maps; the tuple has " + std::to_string(arity + 1) +
                                      " coordinates");
        if (tj.contains("family")) t.family = family_from_json(tj["family"], amb);
        out.push_back(std::move(t));
    }
    return out;
}

int cmd_generic(const std::string& desc_path, int depth, int width, int arity,
                const std::string& anchor_txt, const std::string& schedule_path, int budget,
                const std::string& verify_path, const std::string& state_path) {
    Out out("generic");
    std::string raw;
    RegularSpaceDesc d = load_desc(desc_path, &raw);
    std::vector<std::pair<std::string, std::string>> files{{desc_path, raw}};
    Ambient start = Ambient::window(d, depth, width);
    out.rep["window"] = Json{{"depth", depth}, {"width", width}};

    FDFamily anchor = anchor_txt.empty() ? FDFamily{} : parse_family(anchor_txt, start);
    GenericSchedule sched;
    if (!schedule_path.empty()) {
        std::string sraw = read_file(schedule_path);
        files.emplace_back(schedule_path, sraw);
        sched = parse_schedule(parse_json(sraw, schedule_path), start, arity);
    }
    int stages = budget > 0 ? budget : std::max<int>(4, 2 * static_cast<int>(sched.requests.size()) + 2);
    if (g_budget) stages = static_cast<int>(std::min<uint64_t>(g_budget, 64));
    out.rep["budgets"] = Json{{"stages", stages}};

    std::optional<Json> targets_json;
    if (!verify_path.empty()) {
        std::string traw = read_file(verify_path);
        files.emplace_back(verify_path, traw);
        targets_json = parse_json(traw, verify_path);
    }
    out.input(files);

    GenericBuildState st = build_generic_tuple(start, arity, anchor, sched, stages);

    Json stages_j = Json::array();
    int fired = 0;
    for (size_t k = 0; k < st.stages.size(); ++k) {
        const auto& sg = st.stages[k];
        Json sj;
        sj["stage"] = k;
        if (sg.point >= 0) sj["point"] = st.amb.label(sg.point);
        sj["request"] = sg.request;
        sj["fired"] = sg.fired;
        sj["note"] = sg.note;
        sj["X_size"] = sg.X.size();
        sj["audits"] = Json{{"chain", sg.cond_a}, {"maps_extend", sg.cond_b},
                            {"conjugacy", !sg.fired || sg.cond_c}};
        stages_j.push_back(std::move(sj));
        std::string human = "stage " + std::to_string(k) + ": ";
        human += sg.point >= 0 ? "point " + st.amb.label(sg.point) : "seed";
        human += sg.fired ? ", fired request " + std::to_string(sg.request) : "";
        human += ", |X|=" + std::to_string(sg.X.size());
        human += std::string(", audits ") +
                 (sg.cond_a && sg.cond_b && (!sg.fired || sg.cond_c) ? "ok" : "FAILED");
        out.line(human);
        if (sg.fired) ++fired;
    }
    out.rep["stages"] = std::move(stages_j);
    out.rep["fired_requests"] = fired;
    out.rep["all_audits_hold"] = st.all_conditions_hold();
    Json gj = Json::array();
    for (const auto& g : st.gamma) gj.push_back(pairs_json(st.amb, g));
    out.rep["tuple"] = std::move(gj);
    Json lj = Json::array();
    for (const auto& l : st.log) lj.push_back(l);
    out.rep["log"] = std::move(lj);
    for (const auto& l : st.log) out.line("log: " + l);
    out.line(std::string("audits: ") + (st.all_conditions_hold() ? "all hold" : "FAILED"));

    if (!state_path.empty()) {
        Json sj;
        sj["schema"] = 1;
        sj["arity"] = st.arity;
        Json aj = Json::array();
        for (int b : st.anchor) aj.push_back(ball_json(st.amb, b));
        sj["anchor"] = std::move(aj);
        sj["stages"] = out.rep["stages"];
        Json gj2 = Json::array();
        for (const auto& g : st.gamma) gj2.push_back(pairs_json(st.amb, g));
        sj["tuple"] = std::move(gj2);
        sj["log"] = out.rep["log"];
        write_file(state_path, sj.dump(2) + "\n");
        out.line("state written to " + state_path);
        out.rep["state_file"] = state_path;
    }

    int rc = st.all_conditions_hold() ? 0 : 3;
    if (targets_json) {
        auto targets = parse_targets(*targets_json, st.amb, arity);
        auto reports = verify_density_witness(st, targets);
        Json tarr = Json::array();
        for (size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            Json tj;
            tj["target"] = i;
            tj["rejected"] = r.rejected;
            if (r.rejected) tj["reason"] = r.reason;
            tj["found"] = r.found;
            tj["searched"] = r.searched;
            if (r.found) tj["conjugator"] = perm_str(st.amb, r.h);
            if (!r.note.empty()) tj["note"] = r.note;
            tarr.push_back(std::move(tj));
            std::string human = "target " + std::to_string(i) + ": ";
            if (r.rejected)
                human += "rejected (" + r.reason + ")";
            else if (r.found)
                human += "conjugator " + perm_str(st.amb, r.h) + " after " +
                         std::to_string(r.searched) + " candidates";
            else
                human += "no conjugator found (" + r.note + ")";
            out.line(human);
        }
        out.rep["density"] = std::move(tarr);
    }
    return out.flush(rc);
}

// ---------------------------------------------------------------------------
// quotient
// ---------------------------------------------------------------------------

int cmd_quotient(const std::string& path, bool trace) {
    Out out("quotient");
    std::string raw;
    FiniteSpace s = load_space(path, &raw);
    out.input({{path, raw}});
    tree_of(s, path);
    QuotientSequence seq = rigid_core(s);
    out.rep["rank"] = seq.rank;
    out.rep["stage_sizes"] = Json::array();
    for (const auto& st : seq.stages) out.rep["stage_sizes"].push_back(st.space.n());
    out.line("rank: " + std::to_string(seq.rank));
    {
        std::vector<std::string> sizes;
        for (const auto& st : seq.stages) sizes.push_back(std::to_string(st.space.n()));
        out.line("stage sizes: " + join(sizes, " -> "));
    }
    Json stages_j = Json::array();
    for (size_t a = 0; a < seq.stages.size(); ++a) {
        const auto& st = seq.stages[a];
        Json sj;
        sj["stage"] = a;
        sj["points"] = st.space.n();
        sj["matrix_csv"] = csv_matrix(st.space);
        if (a) {
            Json pj = Json::array();
            const auto& prev = seq.stages[a - 1].space;
            for (int p = 0; p < prev.n(); ++p)
                pj.push_back(Json::array({prev.label(p), st.space.label(st.projection[p])}));
            sj["projection"] = std::move(pj);
        }
        BallTree t = build_ball_tree(st.space);
        auto codes = subtree_codes(t);
        canonicalize(t, codes);
        std::string dot_src = ball_tree_dot(t, st.space.labels(), "stage" + std::to_string(a));
        sj["dot"] = dot_src;
        stages_j.push_back(std::move(sj));
        if (trace) {
            out.line("");
            out.line("stage " + std::to_string(a) + " (" + std::to_string(st.space.n()) +
                     " points):");
            std::istringstream csv(csv_matrix(st.space));
            std::string l;
            while (std::getline(csv, l)) out.line("  " + l);
            std::istringstream dot(dot_src);
            while (std::getline(dot, l)) out.line("  " + l);
        }
    }
    out.rep["stages"] = std::move(stages_j);
    if (!trace) out.line("final core: " + csv_matrix(seq.core()));
    return out.flush(0);
}

// ---------------------------------------------------------------------------
// truncate
// ---------------------------------------------------------------------------

int cmd_truncate(const std::string& desc_path, int depth, int width, const std::string& format) {
    std::string raw;
    RegularSpaceDesc d = load_desc(desc_path, &raw);
    Truncation tr = truncate_desc(d, depth, width);
    if (format == "csv") {
        std::cout << csv_matrix(tr.space);
    } else if (format == "dendrogram") {
        std::cout << dendrogram_json(tr.tree, tr.space.labels()).dump(2) << "\n";
    } else if (format == "dot") {
        std::cout << ball_tree_dot(tr.tree, tr.space.labels());
    } else {
        throw MalformedInputError("unknown format '" + format + "' (csv, dendrogram, dot)");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

struct FixtureResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

FixtureResult run_criterion_fixture(const Json& fx, const std::string& dir) {
    FixtureResult res;
    res.name = fx.at("name").get<std::string>();
    RegularSpaceDesc d = read_desc_json(parse_json(read_file(dir + "/" + fx.at("file").get<std::string>()),
                                                   res.name));
    CriterionReport rep = decide_ample_generics_criterion(d);
    std::string want = fx.at("expect").get<std::string>();
    if (std::string(answer_str(rep.answer)) != want) {
        res.detail = std::string("expected ") + want + ", got " + answer_str(rep.answer);
        return res;
    }
    if (fx.contains("mode") && rep.mode != fx["mode"].get<int>()) {
        res.detail = "expected failure mode " + std::to_string(fx["mode"].get<int>()) + ", got " +
                     std::to_string(rep.mode);
        return res;
    }
    std::vector<int> depths = fx.value("replay_depths", std::vector<int>{2, 3, 4, 5});
    for (int dep : depths) {
        std::string why;
        if (!verify_criterion_certificate(d, rep, dep, &why)) {
            res.detail = "certificate replay failed at depth " + std::to_string(dep) + ": " + why;
            return res;
        }
    }
    res.pass = true;
    res.detail = want + (rep.mode ? " mode " + std::to_string(rep.mode) : "") +
                 ", certificate replayed at " + std::to_string(depths.size()) + " depths";
    return res;
}

FixtureResult run_extremal_fixture(const Json& fx, const std::string& dir) {
    FixtureResult res;
    res.name = fx.at("name").get<std::string>();
    RegularSpaceDesc d = read_desc_json(parse_json(read_file(dir + "/" + fx.at("file").get<std::string>()),
                                                   res.name));
    int width = fx.value("width", 2);
    for (int dep : fx.at("depths").get<std::vector<int>>()) {
        Ambient amb = Ambient::window(d, dep, width);
        auto bad = r_maximal_non_extremal(amb, {});
        if (!bad.empty()) {
            res.detail = "non-extremal ball at depth " + std::to_string(dep) + ": " +
                         ball_str(amb, bad.front());
            return res;
        }
    }
    res.pass = true;
    std::vector<std::string> ds;
    for (int dep : fx.at("depths").get<std::vector<int>>()) ds.push_back(std::to_string(dep));
    res.detail = "every ball extremal at depths " + join(ds, ",");
    return res;
}

// Full-space orbit cardinality of every ball under the stabilizer of a
// fixed base point: all finite, and unchanged when the window deepens.
FixtureResult run_stabilizer_fixture(const Json& fx, const std::string& dir) {
    FixtureResult res;
    res.name = fx.at("name").get<std::string>();
    RegularSpaceDesc d = read_desc_json(parse_json(read_file(dir + "/" + fx.at("file").get<std::string>()),
                                                   res.name));
    int width = fx.value("width", 2);
    auto depths = fx.at("depths").get<std::vector<int>>();

    auto least_point = [](const Ambient& amb) {
        int x0 = 0;
        for (int p = 1; p < amb.n(); ++p)
            if (amb.label(p) < amb.label(x0)) x0 = p;
        return x0;
    };

    for (int dep : depths) {
        Ambient amb = Ambient::window(d, dep, width);
        int x0 = least_point(amb);
        FDFamily pin{amb.tree().point_leaf[x0]};
        WidenMaps maps;
        Ambient wider = amb.widened(1, 0, &maps);
        FDFamily pin_w{wider.tree().point_leaf[maps.point[x0]]};
        for (size_t v = 0; v < amb.tree().nodes.size(); ++v) {
            if (static_cast<int>(v) == amb.root()) continue;
            Card c = amb.orbit_card(static_cast<int>(v), pin);
            if (c.omega) {
                res.detail = "infinite stabilizer orbit for " + ball_str(amb, static_cast<int>(v)) +
                             " at depth " + std::to_string(dep);
                return res;
            }
            Card cw = wider.orbit_card(maps.node[v], pin_w);
            if (c.str() != cw.str()) {
                res.detail = "orbit of " + ball_str(amb, static_cast<int>(v)) + " changed from " +
                             c.str() + " to " + cw.str() + " when depth " + std::to_string(dep) +
                             " grew";
                return res;
            }
        }
    }
    res.pass = true;
    res.detail = "stabilizer orbits finite and stable under added depth";
    return res;
}

// Setwise stabilizers of the growing balls around the least point form a
// strictly increasing chain, witnessed by one separating isometry per step.
FixtureResult run_chain_fixture(const Json& fx, const std::string& dir) {
    FixtureResult res;
    res.name = fx.at("name").get<std::string>();
    RegularSpaceDesc d = read_desc_json(parse_json(read_file(dir + "/" + fx.at("file").get<std::string>()),
                                                   res.name));
    int depth = fx.value("depth", 4);
    int width = fx.value("width", 2);
    Ambient amb = Ambient::window(d, depth, width);
    const auto& t = amb.tree();

    int x0 = 0;
    for (int p = 1; p < amb.n(); ++p)
        if (amb.label(p) < amb.label(x0)) x0 = p;
    std::vector<int> chain; // B_0 c B_1 c ... up the tree
    for (int v = t.nodes[t.point_leaf[x0]].parent; v != -1; v = t.nodes[v].parent)
        chain.push_back(v);
    if (chain.size() < 2) {
        res.detail = "window too shallow for a chain";
        return res;
    }

    int steps = 0;
    for (size_t k = 0; k + 1 < chain.size(); ++k) {
        int B = chain[k], P = chain[k + 1];
        int S = -1;
        for (int c : t.nodes[P].children)
            if (c != B && amb.codes()[c] == amb.codes()[B]) {
                S = c;
                break;
            }
        if (S == -1) {
            res.detail = "no interchangeable sibling for " + ball_str(amb, B);
            return res;
        }
        // swap the two sibling subtrees leaf by leaf, identity elsewhere
        Isometry g = Isometry::identity(amb.n());
        auto leaves = [&](int v) {
            std::vector<int> out;
            auto rec = [&](auto&& self, int u) -> void {
                if (t.nodes[u].children.empty()) {
                    out.push_back(t.nodes[u].point);
                    return;
                }
                for (int c : t.nodes[u].children) self(self, c);
            };
            rec(rec, v);
            return out;
        };
        auto lb = leaves(B), ls = leaves(S);
        if (lb.size() != ls.size()) {
            res.detail = "interchangeable siblings with unequal sizes at " + ball_str(amb, B);
            return res;
        }
        for (size_t i = 0; i < lb.size(); ++i) {
            g.map[lb[i]] = ls[i];
            g.map[ls[i]] = lb[i];
        }
        if (!is_isometry(amb.space(), g)) {
            res.detail = "sibling swap at " + ball_str(amb, B) + " is not an isometry";
            return res;
        }
        if (image_ball(t, B, g) == B || image_ball(t, P, g) != P) {
            res.detail = "separating isometry failed to separate at " + ball_str(amb, B);
            return res;
        }
        ++steps;
    }
    res.pass = true;
    res.detail = std::to_string(steps) + " strict inclusions witnessed";
    return res;
}

FixtureResult run_quotient_fixture(const Json& fx, const std::string& dir) {
    FixtureResult res;
    res.name = fx.at("name").get<std::string>();
    std::string path = dir + "/" + fx.at("file").get<std::string>();
    FiniteSpace s = load_space(path, nullptr);
    tree_of(s, path);
    QuotientSequence seq = rigid_core(s);
    int want = fx.at("rank").get<int>();
    if (seq.rank != want) {
        res.detail = "expected rank " + std::to_string(want) + ", got " + std::to_string(seq.rank);
        return res;
    }
    res.pass = true;
    res.detail = "rank " + std::to_string(seq.rank) + ", core has " +
                 std::to_string(seq.core().n()) + " point(s)";
    return res;
}

int cmd_corpus(const std::string& dir) {
    Out out("corpus");
    std::string mraw = read_file(dir + "/corpus.json");
    Json manifest = parse_json(mraw, "corpus manifest");
    out.input({{dir + "/corpus.json", mraw}});
    int passed = 0, total = 0;
    Json results = Json::array();
    for (const auto& fx : manifest.at("fixtures")) {
        const std::string check = fx.at("check").get<std::string>();
        FixtureResult r;
        if (check == "criterion")
            r = run_criterion_fixture(fx, dir);
        else if (check == "extremal_everywhere")
            r = run_extremal_fixture(fx, dir);
        else if (check == "stabilizer_orbits")
            r = run_stabilizer_fixture(fx, dir);
        else if (check == "stabilizer_chain")
            r = run_chain_fixture(fx, dir);
        else if (check == "quotient_rank")
            r = run_quotient_fixture(fx, dir);
        else
            throw MalformedInputError("unknown corpus check '" + check + "'");
        ++total;
        if (r.pass) ++passed;
        results.push_back(Json{{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        out.line(std::string(r.pass ? "PASS " : "FAIL ") + r.name + ": " + r.detail);
    }
    out.rep["fixtures"] = std::move(results);
    out.rep["passed"] = passed;
    out.rep["total"] = total;
    out.line("corpus: " + std::to_string(passed) + "/" + std::to_string(total) +
             " fixtures passed");
    return out.flush(0);
}

} // namespace

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"exact toolkit for ultrametric spaces and their isometry groups"};
    app.require_subcommand(1);
    app.add_flag("--json", g_json, "emit reports as JSON");
    app.add_flag("--timing", g_timing, "append wall-clock timing (not deterministic)");

    if (const char* b = std::getenv("ULTRA_BUDGET")) {
        char* end = nullptr;
        g_budget = std::strtoull(b, &end, 10);
        if (end && *end != '\0') g_budget = 0;
    }

    std::function<int()> run;

    // validate
    {
        auto* c = app.add_subcommand("validate", "check a finite space for the ultrametric law");
        auto path = std::make_shared<std::string>();
        c->add_option("space", *path, "CSV matrix or dendrogram JSON")->required();
        c->callback([path, &run] { run = [path] { return cmd_validate(*path); }; });
    }
    // canon
    {
        auto* c = app.add_subcommand("canon", "canonical form of a finite space");
        auto path = std::make_shared<std::string>();
        auto dot = std::make_shared<std::string>();
        c->add_option("space", *path)->required();
        c->add_option("--dot", *dot, "write the canonical ball tree as DOT");
        c->callback([path, dot, &run] { run = [path, dot] { return cmd_canon(*path, *dot); }; });
    }
    // iso
    {
        auto* c = app.add_subcommand("iso", "isometry test / group enumeration");
        auto a = std::make_shared<std::string>();
        auto b = std::make_shared<std::string>();
        auto en = std::make_shared<bool>(false);
        auto lim = std::make_shared<int>(64);
        c->add_option("a", *a, "first space")->required();
        c->add_option("b", *b, "second space (omit to inspect the group of the first)");
        c->add_flag("--enumerate", *en, "list the isometry group");
        c->add_option("--limit", *lim, "maximum isometries to list")->capture_default_str();
        c->callback([=, &run] { run = [=] { return cmd_iso(*a, *b, *en, *lim); }; });
    }
    // orbits
    {
        auto* c = app.add_subcommand("orbits", "point orbits under the isometry group");
        auto path = std::make_shared<std::string>();
        auto balls = std::make_shared<bool>(false);
        c->add_option("space", *path)->required();
        c->add_flag("--balls", *balls, "also list ball orbit classes");
        c->callback([=, &run] { run = [=] { return cmd_orbits(*path, *balls); }; });
    }
    // extend
    {
        auto* c = app.add_subcommand("extend", "test a partial isometry for extendability");
        auto src = std::make_shared<SpaceOrDesc>();
        auto map = std::make_shared<std::string>();
        auto wit = std::make_shared<bool>(false);
        src->add_to(c);
        c->add_option("--map", *map, "partial map as a:b,c:d")->required();
        c->add_flag("--witness", *wit, "also print one extending isometry");
        c->callback([=, &run] { run = [=] { return cmd_extend(*src, *map, *wit); }; });
    }
    // hrushovski
    {
        auto* c = app.add_subcommand("hrushovski", "closure with the extension property");
        auto src = std::make_shared<SpaceOrDesc>();
        auto set = std::make_shared<std::string>();
        auto tr = std::make_shared<std::string>();
        src->add_to(c);
        c->add_option("--set", *set, "seed points a,b,c")->required();
        c->add_option("--trace", *tr, "write the construction trace as JSON");
        c->callback([=, &run] { run = [=] { return cmd_hrushovski(*src, *set, *tr); }; });
    }
    // extremal
    {
        auto* c = app.add_subcommand("extremal", "ball orbit cardinalities and extremality");
        auto src = std::make_shared<SpaceOrDesc>();
        auto fam = std::make_shared<std::string>();
        auto ball = std::make_shared<std::string>();
        auto str = std::make_shared<bool>(false);
        src->add_to(c);
        c->add_option("--family", *fam, "pinned balls as p@radius,q@radius");
        c->add_option("--ball", *ball, "classify one ball p@radius");
        c->add_flag("--strengthen", *str, "pin offenders until extremality holds");
        c->callback([=, &run] { run = [=] { return cmd_extremal(*src, *fam, *ball, *str); }; });
    }
    // criterion
    {
        auto* c = app.add_subcommand("criterion", "decide the comeager-class criterion");
        auto desc = std::make_shared<std::string>();
        auto budget = std::make_shared<int>(0);
        auto cert = std::make_shared<std::string>();
        auto verify = std::make_shared<std::string>();
        c->add_option("--desc", *desc, "space description JSON");
        c->add_option("--budget", *budget, "probe depth");
        c->add_option("--certify", *cert, "write a replayable certificate");
        c->add_option("--verify", *verify, "replay a certificate file");
        c->callback(
            [=, &run] { run = [=] { return cmd_criterion(*desc, *budget, *cert, *verify); }; });
    }
    // generic
    {
        auto* c = app.add_subcommand("generic", "build a generic tuple by scheduled requests");
        auto desc = std::make_shared<std::string>();
        auto depth = std::make_shared<int>(3);
        auto width = std::make_shared<int>(2);
        auto arity = std::make_shared<int>(0);
        auto anchor = std::make_shared<std::string>();
        auto sched = std::make_shared<std::string>();
        auto budget = std::make_shared<int>(0);
        auto verify = std::make_shared<std::string>();
        auto state = std::make_shared<std::string>();
        c->add_option("--desc", *desc, "space description JSON")->required();
        c->add_option("--depth", *depth, "starting window depth")->capture_default_str();
        c->add_option("--width", *width, "starting window width")->capture_default_str();
        c->add_option("--arity", *arity, "tuple has arity+1 coordinates")->capture_default_str();
        c->add_option("--anchor", *anchor, "family every coordinate fixes setwise (p@r,...)");
        c->add_option("--schedule", *sched, "requests JSON");
        c->add_option("--budget", *budget, "number of construction stages");
        c->add_option("--verify", *verify, "density targets JSON");
        c->add_option("--state", *state, "write the build state as JSON");
        c->callback([=, &run] {
            run = [=] {
                return cmd_generic(*desc, *depth, *width, *arity, *anchor, *sched, *budget,
                                   *verify, *state);
            };
        });
    }
    // quotient
    {
        auto* c = app.add_subcommand("quotient", "iterated orbit quotient down to the rigid core");
        auto path = std::make_shared<std::string>();
        auto tr = std::make_shared<bool>(false);
        c->add_option("space", *path)->required();
        c->add_flag("--trace", *tr, "print every stage matrix and ball tree");
        c->callback([=, &run] { run = [=] { return cmd_quotient(*path, *tr); }; });
    }
    // truncate
    {
        auto* c = app.add_subcommand("truncate", "unfold a description into a finite window");
        auto desc = std::make_shared<std::string>();
        auto depth = std::make_shared<int>(3);
        auto width = std::make_shared<int>(2);
        auto format = std::make_shared<std::string>("csv");
        c->add_option("--desc", *desc)->required();
        c->add_option("--depth", *depth)->capture_default_str();
        c->add_option("--width", *width)->capture_default_str();
        c->add_option("--format", *format, "csv, dendrogram, or dot")->capture_default_str();
        c->callback(
            [=, &run] { run = [=] { return cmd_truncate(*desc, *depth, *width, *format); }; });
    }
    // corpus
    {
        auto* c = app.add_subcommand("corpus", "run the bundled fixture suite");
        auto dir = std::make_shared<std::string>("data/corpus");
        c->add_option("--dir", *dir, "fixture directory")->capture_default_str();
        c->callback([=, &run] { run = [=] { return cmd_corpus(*dir); }; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        auto t0 = std::chrono::steady_clock::now();
        int rc = run();
        if (g_timing) {
            auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
            std::cout << "elapsed_ms: " << ms << "\n";
        }
        return rc;
    } catch (const MalformedInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceBudgetError& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return 3;
    } catch (const InconclusiveError& e) {
        std::cerr << "inconclusive: " << e.what() << "\n";
        return 3;
    } catch (const ClosureImpossibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
