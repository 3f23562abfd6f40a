#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ultra/ball_tree.hpp"
#include "ultra/errors.hpp"
#include "ultra/extremality.hpp"
#include "ultra/rational.hpp"
#include "ultra/regular_desc.hpp"
#include "ultra/space.hpp"

namespace ultra {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV distance matrices
// ---------------------------------------------------------------------------
//
// Header row carries the point labels; each following row is one matrix
// row of exact rationals written "p/q" (or plain integers).

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        size_t b = f.find_first_not_of(" \t");
        size_t e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
    }
    return out;
}

} // namespace detail

inline FiniteSpace read_csv_matrix(std::istream& in) {
    std::string line;
    std::vector<std::string> labels;
    std::vector<std::vector<Rational>> rows;
    bool have_header = false;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = detail::split_csv_row(line);
        if (!have_header) {
            labels = fields;
            have_header = true;
            continue;
        }
        std::vector<Rational> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            try {
                row.push_back(parse_rational(f));
            } catch (const Error& e) {
                throw MalformedInputError("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (row.size() != labels.size())
            throw MalformedInputError("line " + std::to_string(lineno) + " has " +
                                      std::to_string(row.size()) + " entries, expected " +
                                      std::to_string(labels.size()));
        rows.push_back(std::move(row));
    }
    if (!have_header) throw MalformedInputError("empty CSV input");
    if (rows.size() != labels.size())
        throw MalformedInputError("matrix has " + std::to_string(rows.size()) + " rows but " +
                                  std::to_string(labels.size()) + " labels");
    return FiniteSpace::from_matrix(std::move(labels), rows);
}

inline FiniteSpace read_csv_matrix(const std::string& text) {
    std::istringstream in(text);
    return read_csv_matrix(in);
}

inline void write_csv_matrix(std::ostream& out, const FiniteSpace& s) {
    for (int j = 0; j < s.n(); ++j) out << (j ? "," : "") << s.label(j);
    out << "\n";
    for (int i = 0; i < s.n(); ++i) {
        for (int j = 0; j < s.n(); ++j) out << (j ? "," : "") << rat_str(s.d(i, j));
        out << "\n";
    }
}

inline std::string csv_matrix(const FiniteSpace& s) {
    std::ostringstream out;
    write_csv_matrix(out, s);
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON dendrograms
// ---------------------------------------------------------------------------
//
// Internal node: {"level": "p/q", "children": [...]}, at least two
// children, levels strictly decreasing downward.  Leaf: {"label": "x"}.

namespace detail {

struct DendroNode {
    Rational level;
    std::string label;
    std::vector<DendroNode> kids;
};

inline DendroNode parse_dendro(const Json& j, const Rational* parent_level) {
    if (!j.is_object()) throw MalformedInputError("dendrogram node must be an object");
    DendroNode nd;
    if (j.contains("label")) {
        if (j.contains("children") || j.contains("level"))
            throw MalformedInputError("leaf '" + j["label"].get<std::string>() +
                                      "' must not carry level or children");
        nd.label = j["label"].get<std::string>();
        return nd;
    }
    if (!j.contains("level") || !j.contains("children"))
        throw MalformedInputError("internal dendrogram node needs level and children");
    nd.level = parse_rational(j["level"].get<std::string>());
    if (nd.level <= 0) throw MalformedInputError("node level must be positive");
    if (parent_level && !(nd.level < *parent_level))
        throw MalformedInputError("child level " + rat_str(nd.level) +
                                  " does not decrease below " + rat_str(*parent_level));
    const auto& kids = j["children"];
    if (!kids.is_array() || kids.size() < 2)
        throw MalformedInputError("internal dendrogram node needs at least two children");
    for (const auto& k : kids) nd.kids.push_back(parse_dendro(k, &nd.level));
    return nd;
}

inline void dendro_leaves(const DendroNode& nd, std::vector<const DendroNode*>& out) {
    if (nd.kids.empty()) {
        out.push_back(&nd);
        return;
    }
    for (const auto& k : nd.kids) dendro_leaves(k, out);
}

inline void dendro_fill(const DendroNode& nd, int base, std::vector<int>& idx,
                        std::vector<std::vector<Rational>>& m) {
    if (nd.kids.empty()) {
        idx.push_back(base);
        return;
    }
    std::vector<std::vector<int>> groups;
    int next = base;
    for (const auto& k : nd.kids) {
        std::vector<int> g;
        dendro_fill(k, next, g, m);
        next += static_cast<int>(g.size());
        groups.push_back(g);
    }
    for (size_t a = 0; a < groups.size(); ++a)
        for (size_t b = a + 1; b < groups.size(); ++b)
            for (int p : groups[a])
                for (int q : groups[b]) m[p][q] = m[q][p] = nd.level;
    for (const auto& g : groups) idx.insert(idx.end(), g.begin(), g.end());
}

} // namespace detail

inline FiniteSpace read_dendrogram_json(const Json& j) {
    detail::DendroNode root = detail::parse_dendro(j, nullptr);
    std::vector<const detail::DendroNode*> leaves;
    detail::dendro_leaves(root, leaves);
    std::vector<std::string> labels;
    for (const auto* l : leaves) labels.push_back(l->label);
    const int n = static_cast<int>(labels.size());
    std::vector<std::vector<Rational>> m(n, std::vector<Rational>(n, Rational(0)));
    std::vector<int> order;
    detail::dendro_fill(root, 0, order, m);
    return FiniteSpace::from_matrix(std::move(labels), m);
}

inline Json dendrogram_json(const BallTree& t, const std::vector<std::string>& labels,
                            int v = -1) {
    if (v == -1) v = t.root;
    const auto& nd = t.nodes[v];
    if (nd.children.empty()) return Json{{"label", labels[nd.point]}};
    Json kids = Json::array();
    for (int c : nd.children) kids.push_back(dendrogram_json(t, labels, c));
    return Json{{"level", rat_str(t.level_of(v))}, {"children", std::move(kids)}};
}

// ---------------------------------------------------------------------------
// Regular space descriptions
// ---------------------------------------------------------------------------
//
// {"schema": 1, "ladders": [{"id", "base", "ratio", "dense"?}],
//  "types": [{"id", "level"} | {"id", "ladder"}],
//  "edges": [{"from", "to", "mult"}], "root": id}
// Edge endpoints and the root name types by id; mult is a positive
// integer or the string "omega".

inline RegularSpaceDesc read_desc_json(const Json& j) {
    if (!j.is_object()) throw MalformedInputError("description must be a JSON object");
    if (j.contains("schema") && j["schema"].get<int>() != 1)
        throw MalformedInputError("unsupported schema version");
    RegularSpaceDesc d;
    if (j.contains("ladders"))
        for (const auto& lj : j["ladders"]) {
            LadderSpec l;
            l.id = lj.at("id").get<std::string>();
            l.base = parse_rational(lj.at("base").get<std::string>());
            l.ratio = parse_rational(lj.at("ratio").get<std::string>());
            l.dense = lj.value("dense", false);
            d.ladders.push_back(std::move(l));
        }
    if (!j.contains("types")) throw MalformedInputError("description needs a types array");
    for (const auto& tj : j["types"]) {
        DescType t;
        t.id = tj.at("id").get<std::string>();
        const bool has_level = tj.contains("level");
        const bool has_ladder = tj.contains("ladder");
        if (has_level == has_ladder)
            throw MalformedInputError("type '" + t.id +
                                      "' must have exactly one of level / ladder");
        if (has_level) t.const_level = parse_rational(tj["level"].get<std::string>());
        if (has_ladder) t.ladder = tj["ladder"].get<std::string>();
        d.types.push_back(std::move(t));
    }
    auto type_ref = [&](const Json& v, const char* what) {
        int idx = v.is_number_integer() ? v.get<int>() : d.type_index(v.get<std::string>());
        if (idx < 0 || idx >= static_cast<int>(d.types.size()))
            throw MalformedInputError(std::string(what) + " names no type: " + v.dump());
        return idx;
    };
    if (j.contains("edges"))
        for (const auto& ej : j["edges"]) {
            DescEdge e;
            e.from = type_ref(ej.at("from"), "edge 'from'");
            e.to = type_ref(ej.at("to"), "edge 'to'");
            const auto& m = ej.at("mult");
            if (m.is_string()) {
                if (m.get<std::string>() != "omega")
                    throw MalformedInputError("edge mult must be an integer or \"omega\"");
                e.omega = true;
            } else {
                e.mult = m.get<uint64_t>();
            }
            d.edges.push_back(e);
        }
    d.root = type_ref(j.at("root"), "root");
    validate_desc(d);
    return d;
}

inline Json desc_json(const RegularSpaceDesc& d) {
    Json j;
    j["schema"] = 1;
    j["ladders"] = Json::array();
    for (const auto& l : d.ladders) {
        Json lj{{"id", l.id}, {"base", rat_str(l.base)}, {"ratio", rat_str(l.ratio)}};
        if (l.dense) lj["dense"] = true;
        j["ladders"].push_back(std::move(lj));
    }
    j["types"] = Json::array();
    for (const auto& t : d.types) {
        Json tj{{"id", t.id}};
        if (t.const_level) tj["level"] = rat_str(*t.const_level);
        if (t.ladder) tj["ladder"] = *t.ladder;
        j["types"].push_back(std::move(tj));
    }
    j["edges"] = Json::array();
    for (const auto& e : d.edges) {
        Json ej{{"from", d.types[e.from].id}, {"to", d.types[e.to].id}};
        if (e.omega)
            ej["mult"] = "omega";
        else
            ej["mult"] = e.mult;
        j["edges"].push_back(std::move(ej));
    }
    j["root"] = d.types[d.root].id;
    return j;
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

// One box per leaf (point label), one ellipse per ball (its level); edges
// point from each ball to its children in canonical order.
inline std::string ball_tree_dot(const BallTree& t, const std::vector<std::string>& labels,
                                 const std::string& name = "balls") {
    std::ostringstream out;
    out << "digraph " << name << " {\n";
    for (size_t v = 0; v < t.nodes.size(); ++v) {
        const auto& nd = t.nodes[v];
        if (nd.children.empty())
            out << "  n" << v << " [shape=box,label=\"" << labels[nd.point] << "\"];\n";
        else
            out << "  n" << v << " [label=\"" << rat_str(t.level_of(static_cast<int>(v)))
                << "\"];\n";
    }
    for (size_t v = 0; v < t.nodes.size(); ++v)
        for (int c : t.nodes[v].children) out << "  n" << v << " -> n" << c << ";\n";
    out << "}\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Criterion certificates
// ---------------------------------------------------------------------------

inline Json criterion_report_json(const CriterionReport& rep) {
    Json j;
    j["schema"] = 1;
    switch (rep.answer) {
        case CriterionReport::Answer::BasisExists: j["answer"] = "BASIS_EXISTS"; break;
        case CriterionReport::Answer::NoComeagerClass: j["answer"] = "NO_COMEAGER_CLASS"; break;
        case CriterionReport::Answer::Inconclusive: j["answer"] = "INCONCLUSIVE"; break;
    }
    if (rep.mode) j["mode"] = rep.mode;
    j["witness"] = rep.witness;
    j["verified_depths"] = rep.verified_depths;
    j["notes"] = rep.notes;
    return j;
}

inline CriterionReport read_criterion_report(const Json& j) {
    if (j.contains("schema") && j["schema"].get<int>() != 1)
        throw MalformedInputError("unsupported schema version");
    CriterionReport rep;
    const std::string a = j.at("answer").get<std::string>();
    if (a == "BASIS_EXISTS")
        rep.answer = CriterionReport::Answer::BasisExists;
    else if (a == "NO_COMEAGER_CLASS")
        rep.answer = CriterionReport::Answer::NoComeagerClass;
    else if (a == "INCONCLUSIVE")
        rep.answer = CriterionReport::Answer::Inconclusive;
    else
        throw MalformedInputError("unknown answer '" + a + "'");
    rep.mode = j.value("mode", 0);
    rep.witness = j.value("witness", std::string{});
    if (j.contains("verified_depths"))
        rep.verified_depths = j["verified_depths"].get<std::vector<int>>();
    if (j.contains("notes")) rep.notes = j["notes"].get<std::vector<std::string>>();
    return rep;
}

// ---------------------------------------------------------------------------
// Digests and point resolution
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string digest_hex(std::string_view s) {
    static const char* hex = "0123456789abcdef";
    uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[i] = hex[h & 0xf];
    return out;
}

inline int point_by_label(const FiniteSpace& s, const std::string& label) {
    for (int p = 0; p < s.n(); ++p)
        if (s.label(p) == label) return p;
    throw MalformedInputError("no point labeled '" + label + "'");
}

// Ball of radius r around p in the open sense: the highest ancestor of
// p's leaf whose level is strictly below r.
inline int ball_at_radius(const BallTree& t, int p, const Rational& r) {
    if (r <= 0) throw PreconditionError("ball radius must be positive");
    int v = t.point_leaf[p];
    while (t.nodes[v].parent != -1 && t.level_of(t.nodes[v].parent) < r)
        v = t.nodes[v].parent;
    return v;
}

} // namespace ultra
