#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ultra/errors.hpp"
#include "ultra/rational.hpp"

namespace ultra {

// A finite metric space with exact rational distances.
//
// Distances are interned: `levels` holds the distinct values sorted
// ascending with levels[0] == 0, and the matrix stores indices into it.
// Because the table is sorted, comparing two distances is an integer
// comparison; rationals are only touched at the I/O boundary and when new
// level values are created.
class FiniteSpace {
public:
    FiniteSpace() = default;

    // Validates shape only (symmetry, zero diagonal, positive off-diagonal).
    // Whether the matrix is ultrametric is a separate verdict, not an error.
    static FiniteSpace from_matrix(std::vector<std::string> labels,
                                   const std::vector<std::vector<Rational>>& m) {
        const size_t n = labels.size();
        if (m.size() != n)
            throw MalformedInputError("matrix has " + std::to_string(m.size()) +
                                      " rows but " + std::to_string(n) + " labels");
        for (size_t i = 0; i < n; ++i)
            if (m[i].size() != n)
                throw MalformedInputError("row " + std::to_string(i) + " has " +
                                          std::to_string(m[i].size()) + " entries, expected " +
                                          std::to_string(n));
        for (size_t i = 0; i < n; ++i) {
            if (m[i][i] != 0)
                throw MalformedInputError("nonzero diagonal entry at (" + labels[i] + "," +
                                          labels[i] + ")");
            for (size_t j = i + 1; j < n; ++j) {
                if (m[i][j] != m[j][i])
                    throw MalformedInputError("matrix not symmetric at (" + labels[i] + "," +
                                              labels[j] + ")");
                if (m[i][j] < 0)
                    throw MalformedInputError("negative distance at (" + labels[i] + "," +
                                              labels[j] + ")");
                if (m[i][j] == 0)
                    throw MalformedInputError("zero distance between distinct points " +
                                              labels[i] + " and " + labels[j]);
            }
        }

        std::map<Rational, uint16_t> intern;
        intern[Rational{0}] = 0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                intern.emplace(m[i][j], 0);
        FiniteSpace s;
        s.labels_ = std::move(labels);
        s.levels_.reserve(intern.size());
        uint16_t next = 0;
        for (auto& [value, idx] : intern) {
            idx = next++;
            s.levels_.push_back(value);
        }
        s.code_.assign(n * n, 0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                if (i != j) s.code_[i * n + j] = intern.at(m[i][j]);
        return s;
    }

    // Trusted constructor for callers that already hold interned codes
    // (tree unfolding, quotients).  `levels` must be sorted, distinct,
    // start at 0; codes must be symmetric with zero diagonal.
    static FiniteSpace from_codes(std::vector<std::string> labels,
                                  std::vector<Rational> levels,
                                  std::vector<uint16_t> codes) {
        FiniteSpace s;
        s.labels_ = std::move(labels);
        s.levels_ = std::move(levels);
        s.code_ = std::move(codes);
        return s;
    }

    int n() const { return static_cast<int>(labels_.size()); }
    const std::string& label(int i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const { return labels_; }

    uint16_t dcode(int i, int j) const { return code_[static_cast<size_t>(i) * labels_.size() + j]; }
    const Rational& d(int i, int j) const { return levels_[dcode(i, j)]; }
    const Rational& level(uint16_t c) const { return levels_[c]; }
    uint16_t level_count() const { return static_cast<uint16_t>(levels_.size()); }
    const std::vector<Rational>& levels() const { return levels_; }

    // Distinct positive distances, ascending.
    std::vector<Rational> distance_set() const {
        return {levels_.begin() + (levels_.empty() ? 0 : 1), levels_.end()};
    }

    uint16_t max_code() const {
        uint16_t m = 0;
        for (uint16_t c : code_) m = std::max(m, c);
        return m;
    }

    // Subspace induced on `pts` (indices into this space, kept in order).
    FiniteSpace induced(const std::vector<int>& pts) const {
        std::vector<std::string> lab;
        lab.reserve(pts.size());
        for (int p : pts) lab.push_back(labels_[p]);
        // Re-intern so the level table has no unused entries.
        std::map<uint16_t, uint16_t> used;
        used[0] = 0;
        for (size_t a = 0; a < pts.size(); ++a)
            for (size_t b = a + 1; b < pts.size(); ++b)
                used.emplace(dcode(pts[a], pts[b]), 0);
        std::vector<Rational> lev;
        lev.reserve(used.size());
        uint16_t next = 0;
        for (auto& [old_code, new_code] : used) {
            new_code = next++;
            lev.push_back(levels_[old_code]);
        }
        std::vector<uint16_t> codes(pts.size() * pts.size(), 0);
        for (size_t a = 0; a < pts.size(); ++a)
            for (size_t b = 0; b < pts.size(); ++b)
                if (a != b) codes[a * pts.size() + b] = used.at(dcode(pts[a], pts[b]));
        return from_codes(std::move(lab), std::move(lev), std::move(codes));
    }

private:
    std::vector<std::string> labels_;
    std::vector<Rational> levels_;
    std::vector<uint16_t> code_;
};

// Witness that a matrix is not ultrametric: d(x,z) > max(d(x,y), d(y,z)).
struct TripleViolation {
    int x = -1, y = -1, z = -1;

    std::string describe(const FiniteSpace& s) const {
        return "d(" + s.label(x) + "," + s.label(z) + ") = " + rat_str(s.d(x, z)) +
               " exceeds max(d(" + s.label(x) + "," + s.label(y) + "), d(" + s.label(y) + "," +
               s.label(z) + ")) = " + rat_str(std::max(s.d(x, y), s.d(y, z)));
    }
};

// First failing triple in lexicographic (i,j,k) order, or nullopt when the
// space is ultrametric.  A triple passes exactly when its two largest
// pairwise distances are equal.
inline std::optional<TripleViolation> check_ultrametric(const FiniteSpace& s) {
    const int n = s.n();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const uint16_t dij = s.dcode(i, j);
            for (int k = j + 1; k < n; ++k) {
                const uint16_t dik = s.dcode(i, k);
                const uint16_t djk = s.dcode(j, k);
                uint16_t a = dij, b = dik, c = djk;
                // sort three codes descending by hand
                if (a < b) std::swap(a, b);
                if (b < c) std::swap(b, c);
                if (a < b) std::swap(a, b);
                if (a != b) {
                    // Unique maximum: identify which pair realizes it.
                    TripleViolation v;
                    if (dij == a) {
                        v = {i, k, j};
                    } else if (dik == a) {
                        v = {i, j, k};
                    } else {
                        v = {j, i, k};
                    }
                    return v;
                }
            }
        }
    return std::nullopt;
}

} // namespace ultra
