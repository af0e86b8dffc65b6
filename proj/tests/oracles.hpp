#pragma once

// Brute-force reference implementations used only by the test suites. Each
// oracle computes the same quantity as the library through an independent
// code path (naive loops, recursion, full sorts).

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "advdef/embedspace.hpp"
#include "advdef/errormap.hpp"
#include "advdef/sentinel.hpp"

namespace oracle {

// Per-pixel MSE of one block, summed with plain loops.
inline double block_mse(const advdef::Image& a, const advdef::Image& b, int r0, int r1, int c0,
                        int c1) {
    double acc = 0.0;
    long count = 0;
    for (int ch = 0; ch < a.channels(); ++ch) {
        for (int y = r0; y < r1; ++y) {
            for (int x = c0; x < c1; ++x) {
                const double d = static_cast<double>(a.planes[static_cast<std::size_t>(ch)](y, x)) -
                                 static_cast<double>(b.planes[static_cast<std::size_t>(ch)](y, x));
                acc += d * d;
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

// Sort-based CVaR: insertion sort, then the mean of the tail at or above the
// ceil(alpha*n)-th smallest value (1-indexed).
inline double cvar(std::vector<double> losses, double alpha) {
    for (std::size_t i = 1; i < losses.size(); ++i) {
        const double key = losses[i];
        std::size_t j = i;
        while (j > 0 && losses[j - 1] > key) {
            losses[j] = losses[j - 1];
            --j;
        }
        losses[j] = key;
    }
    const std::size_t n = losses.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    double acc = 0.0;
    for (std::size_t i = rank - 1; i < n; ++i) acc += losses[i];
    return acc / static_cast<double>(n - rank + 1);
}

// High-precision entropy of a normalized distribution.
inline double entropy(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double h = 0.0;
    for (double w : weights) {
        const double e = w / total;
        if (e > 0.0) h -= e * std::log(e);
    }
    return h;
}

// Recursive flood fill partition of a binary grid.
using CoordSet = std::set<std::pair<int, int>>;

inline void flood(const advdef::Mask& mask, std::vector<std::vector<bool>>& seen, int r, int c,
                  bool diag, CoordSet& comp) {
    const int rows = static_cast<int>(mask.rows());
    const int cols = static_cast<int>(mask.cols());
    if (r < 0 || r >= rows || c < 0 || c >= cols) return;
    if (seen[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] || !mask(r, c)) return;
    seen[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = true;
    comp.insert({r, c});
    flood(mask, seen, r - 1, c, diag, comp);
    flood(mask, seen, r + 1, c, diag, comp);
    flood(mask, seen, r, c - 1, diag, comp);
    flood(mask, seen, r, c + 1, diag, comp);
    if (diag) {
        flood(mask, seen, r - 1, c - 1, diag, comp);
        flood(mask, seen, r - 1, c + 1, diag, comp);
        flood(mask, seen, r + 1, c - 1, diag, comp);
        flood(mask, seen, r + 1, c + 1, diag, comp);
    }
}

inline std::set<CoordSet> flood_fill_partition(const advdef::Mask& mask, bool diag) {
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(mask.rows()),
                                        std::vector<bool>(static_cast<std::size_t>(mask.cols())));
    std::set<CoordSet> parts;
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) && !seen[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
                CoordSet comp;
                flood(mask, seen, r, c, diag, comp);
                parts.insert(std::move(comp));
            }
        }
    }
    return parts;
}

// Element-wise matrix-vector product with a naive double loop.
inline Eigen::VectorXd matvec(const Eigen::MatrixXd& w, const Eigen::VectorXd& e,
                              const Eigen::VectorXd& b) {
    Eigen::VectorXd out(w.rows());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double acc = b(r);
        for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * e(c);
        out(r) = acc;
    }
    return out;
}

// Central finite differences of a scalar function.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd p = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = p(i);
        p(i) = orig + step;
        const double hi = f(p);
        p(i) = orig - step;
        const double lo = f(p);
        p(i) = orig;
        g(i) = (hi - lo) / (2.0 * step);
    }
    return g;
}

// All-pairs rank statistic: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc_all_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
    double acc = 0.0;
    for (const double p : pos) {
        for (const double n : neg) {
            if (p > n) acc += 1.0;
            else if (p == n) acc += 0.5;
        }
    }
    return acc / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Exhaustive similarity sort for nearest-neighbor checks.
inline std::vector<std::pair<std::string, double>> nn_full_sort(const Eigen::VectorXd& query,
                                                                const advdef::Vocabulary& vocab) {
    std::vector<std::pair<std::string, double>> out;
    std::vector<std::size_t> order;
    std::vector<double> sims;
    for (int i = 0; i < vocab.size(); ++i) {
        sims.push_back(advdef::cosine(query, Eigen::VectorXd(vocab.embeddings().col(i))));
        order.push_back(static_cast<std::size_t>(i));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
    });
    for (const std::size_t i : order) out.emplace_back(vocab.token(static_cast<int>(i)), sims[i]);
    return out;
}

}  // namespace oracle
