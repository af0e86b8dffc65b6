#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

#include "advdef/errormap.hpp"

namespace advdef {

// Total block loss below this is treated as a perfect reconstruction: the
// map is declared uniform (h_norm = 1, c_local = 0), which gates to Clean.
inline constexpr double kTotalLossEpsilon = 1e-9;

struct BlockCoord {
    int row = 0;
    int col = 0;
    friend bool operator==(const BlockCoord&, const BlockCoord&) = default;
    friend auto operator<=>(const BlockCoord&, const BlockCoord&) = default;
};

// Maximal set of active blocks connected under the chosen adjacency,
// coordinates kept sorted.
struct Component {
    std::vector<BlockCoord> blocks;
    double loss_sum = 0.0;
};

enum class Connectivity { Four = 4, Eight = 8 };

enum class ThreatClass { Clean = 0, GlobalAttack = 1, LocalAttack = 2 };

std::string_view to_string(ThreatClass cls);
ThreatClass threat_class_from_string(std::string_view s);

// Statistics of one error map: tail magnitude, dispersion entropy and the
// concentration of the dominant connected component.
struct DetectionMetrics {
    double m_anom = 0.0;    // CVaR tail mean of block losses
    double h_energy = 0.0;  // Shannon entropy of the loss distribution, nats
    double h_norm = 0.0;    // h_energy / ln(block count), in [0, 1]
    double c_local = 0.0;   // largest component's share of total loss
    double c_enh = 0.0;     // c_local * (1 - h_norm)^beta
    std::vector<BlockCoord> largest_component;

    void validate() const;
};

struct GateThresholds {
    double t_s = 0.2;     // stage-I magnitude threshold
    double t_cc1 = 0.03;  // stage-I concentration recall threshold
    double t_cc2 = 0.02;  // stage-II local/global separation threshold
    double alpha = 0.95;  // CVaR confidence level
    double beta = 0.8;    // concentration exponent

    void validate() const;
};

struct Verdict {
    ThreatClass cls = ThreatClass::Clean;
    DetectionMetrics metrics;
    double attack_score = 0.0;  // max(m_anom/t_s, c_enh/t_cc1)
};

// CVaR tail mean: the mean of all losses at or above the empirical
// alpha-quantile, where the quantile is the ceil(alpha*n)-th smallest value
// (1-indexed). A single-element list returns that element.
double anomaly_magnitude(std::vector<double> losses, double alpha);

// Shannon entropy of the normalized loss distribution with 0*ln(0) := 0,
// plus its ln(n)-normalized value. Near-zero total loss returns the
// maximum-entropy pair (ln(n), 1).
template <typename Derived>
std::pair<double, double> energy_entropy(const Eigen::DenseBase<Derived>& losses) {
    const Eigen::Index n = losses.size();
    if (n < 1) throw InvalidInput("energy_entropy: empty loss grid");
    const double log_n = std::log(static_cast<double>(n));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += static_cast<double>(losses.derived()(i));
    if (total < kTotalLossEpsilon) return {log_n, 1.0};
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = static_cast<double>(losses.derived()(i)) / total;
        if (e > 0.0) h -= e * std::log(e);
    }
    // summation order can overshoot the ln(n) bound by an ulp
    h = std::clamp(h, 0.0, log_n);
    return {h, log_n > 0.0 ? h / log_n : 1.0};
}

std::pair<double, double> energy_entropy(const ErrorMap& map);

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Block b is active iff its loss exceeds mean + population standard
// deviation over all blocks. Strict inequality: a flat map has no active
// blocks.
Mask active_mask(const ErrorMap& map);

// Partition of active blocks into maximal connected sets. Ordered by
// decreasing loss sum, ties by smallest (row, col) of the component's
// top-left block; block lists are sorted. Output does not depend on
// iteration order.
std::vector<Component> connected_components(const ErrorMap& map, const Mask& mask,
                                            Connectivity connectivity);

// Largest component's share of the total loss over ALL blocks. Zero when
// there are no components or the total is below kTotalLossEpsilon.
double local_concentration(const ErrorMap& map, const std::vector<Component>& components);

// c_local attenuated by normalized entropy: c_local * (1 - h_norm)^beta.
double enhanced_concentration(double c_local, double h_norm, double beta);

// Full per-map metric computation (m_anom uses the map's own losses).
DetectionMetrics compute_metrics(const ErrorMap& map, const GateThresholds& th,
                                 Connectivity connectivity);

// Two-stage gate. Stage I: attacked iff m_anom > t_s or c_enh > t_cc1.
// Stage II: local iff c_enh > t_cc2, else global. All comparisons strict.
Verdict dual_gate(const DetectionMetrics& metrics, const GateThresholds& th);

}  // namespace advdef
