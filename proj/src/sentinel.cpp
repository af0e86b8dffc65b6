#include "advdef/sentinel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace advdef {

std::string_view to_string(ThreatClass cls) {
    switch (cls) {
        case ThreatClass::Clean: return "Clean";
        case ThreatClass::GlobalAttack: return "GlobalAttack";
        case ThreatClass::LocalAttack: return "LocalAttack";
    }
    return "Clean";
}

ThreatClass threat_class_from_string(std::string_view s) {
    if (s == "Clean" || s == "clean") return ThreatClass::Clean;
    if (s == "GlobalAttack" || s == "global") return ThreatClass::GlobalAttack;
    if (s == "LocalAttack" || s == "local") return ThreatClass::LocalAttack;
    throw ParseError("unknown threat class: " + std::string(s));
}

void DetectionMetrics::validate() const {
    if (!(h_norm >= 0.0 && h_norm <= 1.0)) throw InvalidInput("metrics: h_norm out of [0,1]");
    if (!(c_local >= 0.0 && c_local <= 1.0)) throw InvalidInput("metrics: c_local out of [0,1]");
    if (c_enh > c_local + 1e-12) throw InvalidInput("metrics: c_enh must not exceed c_local");
    if (!std::isfinite(m_anom) || m_anom < 0.0) throw InvalidInput("metrics: bad m_anom");
    if (c_local > 0.0 && largest_component.empty())
        throw InvalidInput("metrics: positive c_local with empty component");
}

void GateThresholds::validate() const {
    if (!(t_s > 0.0 && t_cc1 > 0.0 && t_cc2 > 0.0))
        throw InvalidInput("thresholds: must be positive");
    if (t_cc2 > t_cc1) throw InvalidInput("thresholds: t_cc2 must not exceed t_cc1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("thresholds: alpha must be in (0,1)");
    if (!(beta > 0.0)) throw InvalidInput("thresholds: beta must be positive");
}

double anomaly_magnitude(std::vector<double> losses, double alpha) {
    if (losses.empty()) throw InvalidInput("anomaly_magnitude: empty loss list");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("anomaly_magnitude: alpha out of (0,1)");
    for (double v : losses)
        if (!std::isfinite(v) || v < 0.0)
            throw InvalidInput("anomaly_magnitude: losses must be finite and non-negative");

    const std::size_t n = losses.size();
    std::sort(losses.begin(), losses.end());
    // quantile by the "higher" convention: ceil(alpha*n)-th smallest, 1-indexed
    std::size_t rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    double acc = 0.0;
    for (std::size_t i = rank - 1; i < n; ++i) acc += losses[i];
    return acc / static_cast<double>(n - rank + 1);
}

std::pair<double, double> energy_entropy(const ErrorMap& map) {
    map.validate();
    return energy_entropy(map.grid.reshaped());
}

Mask active_mask(const ErrorMap& map) {
    map.validate();
    const double n = static_cast<double>(map.grid.size());
    const double mean = map.grid.sum() / n;
    const double var = (map.grid - mean).square().sum() / n;
    const double threshold = mean + std::sqrt(var);
    return map.grid > threshold;
}

std::vector<Component> connected_components(const ErrorMap& map, const Mask& mask,
                                            Connectivity connectivity) {
    map.validate();
    if (mask.rows() != map.grid.rows() || mask.cols() != map.grid.cols())
        throw InvalidInput("connected_components: mask shape mismatch");

    const int rows = static_cast<int>(mask.rows());
    const int cols = static_cast<int>(mask.cols());
    Eigen::ArrayXXi label = Eigen::ArrayXXi::Constant(rows, cols, -1);
    std::vector<Component> out;

    const bool diag = connectivity == Connectivity::Eight;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask(r, c) || label(r, c) >= 0) continue;
            Component comp;
            std::deque<BlockCoord> queue{{r, c}};
            label(r, c) = static_cast<int>(out.size());
            while (!queue.empty()) {
                const BlockCoord cur = queue.front();
                queue.pop_front();
                comp.blocks.push_back(cur);
                comp.loss_sum += map.grid(cur.row, cur.col);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (!diag && dr != 0 && dc != 0) continue;
                        const int nr = cur.row + dr, nc = cur.col + dc;
                        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                        if (!mask(nr, nc) || label(nr, nc) >= 0) continue;
                        label(nr, nc) = static_cast<int>(out.size());
                        queue.push_back({nr, nc});
                    }
                }
            }
            std::sort(comp.blocks.begin(), comp.blocks.end());
            out.push_back(std::move(comp));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
        if (a.loss_sum != b.loss_sum) return a.loss_sum > b.loss_sum;
        return a.blocks.front() < b.blocks.front();
    });
    return out;
}

double local_concentration(const ErrorMap& map, const std::vector<Component>& components) {
    map.validate();
    const double total = map.total();
    if (total < kTotalLossEpsilon || components.empty()) return 0.0;
    double best = 0.0;
    for (const Component& comp : components) best = std::max(best, comp.loss_sum);
    // component sums accumulate in a different order than the total
    return std::min(1.0, best / total);
}

double enhanced_concentration(double c_local, double h_norm, double beta) {
    if (!(c_local >= 0.0 && c_local <= 1.0))
        throw InvalidInput("enhanced_concentration: c_local out of [0,1]");
    if (!(h_norm >= 0.0 && h_norm <= 1.0))
        throw InvalidInput("enhanced_concentration: h_norm out of [0,1]");
    if (!(beta > 0.0)) throw InvalidInput("enhanced_concentration: beta must be positive");
    return c_local * std::pow(std::max(0.0, 1.0 - h_norm), beta);
}

DetectionMetrics compute_metrics(const ErrorMap& map, const GateThresholds& th,
                                 Connectivity connectivity) {
    th.validate();
    DetectionMetrics m;
    m.m_anom = anomaly_magnitude(flatten_losses(map), th.alpha);
    std::tie(m.h_energy, m.h_norm) = energy_entropy(map);
    const Mask mask = active_mask(map);
    const std::vector<Component> comps = connected_components(map, mask, connectivity);
    m.c_local = local_concentration(map, comps);
    m.c_enh = enhanced_concentration(m.c_local, m.h_norm, th.beta);
    if (!comps.empty()) m.largest_component = comps.front().blocks;
    return m;
}

Verdict dual_gate(const DetectionMetrics& metrics, const GateThresholds& th) {
    metrics.validate();
    th.validate();
    Verdict v;
    v.metrics = metrics;
    v.attack_score = std::max(metrics.m_anom / th.t_s, metrics.c_enh / th.t_cc1);
    const bool attacked = metrics.m_anom > th.t_s || metrics.c_enh > th.t_cc1;
    if (!attacked) {
        v.cls = ThreatClass::Clean;
    } else if (metrics.c_enh > th.t_cc2) {
        v.cls = ThreatClass::LocalAttack;
    } else {
        v.cls = ThreatClass::GlobalAttack;
    }
    return v;
}

}  // namespace advdef
