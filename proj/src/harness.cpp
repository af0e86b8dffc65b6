#include "advdef/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "advdef/image_io.hpp"

namespace advdef {

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::GlobalUniform: return "global-uniform";
        case AttackKind::GlobalGaussian: return "global-gaussian";
        case AttackKind::GlobalSignGrad: return "global-signgrad";
        case AttackKind::Patch: return "patch";
    }
    return "global-uniform";
}

Image gen_global(const Image& image, const AttackSpec& spec) {
    image.validate();
    if (spec.kind == AttackKind::Patch)
        throw InvalidInput("gen_global: attack kind is not a global kind");
    if (!(spec.epsilon > 0.0 && spec.epsilon <= 1.0))
        throw InvalidInput("gen_global: epsilon must be in (0, 1]");

    const double eps = spec.epsilon;
    Image out = image;
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));

    if (spec.kind == AttackKind::GlobalSignGrad) {
        const LowpassReconstructor lowpass;
        const Image smooth = lowpass.apply(image);
        for (std::size_t c = 0; c < out.planes.size(); ++c) {
            const Plane hp = image.planes[c] - smooth.planes[c];
            out.planes[c] += static_cast<float>(eps) * hp.sign();
        }
    } else {
        for (Plane& p : out.planes) {
            for (int y = 0; y < image.height; ++y) {
                for (int x = 0; x < image.width; ++x) {
                    double delta;
                    if (spec.kind == AttackKind::GlobalUniform) {
                        delta = rng.uniform(-eps, eps);
                    } else {
                        delta = std::clamp(rng.normal() * eps / 2.0, -eps, eps);
                    }
                    p(y, x) += static_cast<float>(delta);
                }
            }
        }
    }
    clamp_pixels(out);
    return out;
}

std::pair<Image, PixelMask> gen_patch(const Image& image, const AttackSpec& spec) {
    image.validate();
    if (spec.kind != AttackKind::Patch) throw InvalidInput("gen_patch: attack kind is not Patch");
    const PatchSpec& p = spec.patch;
    if (p.height < 1 || p.width < 1 || p.top < 0 || p.left < 0 ||
        p.top + p.height > image.height || p.left + p.width > image.width)
        throw InvalidInput("gen_patch: patch out of bounds");

    PixelMask mask;
    mask.height = image.height;
    mask.width = image.width;
    mask.bits = Mask::Constant(image.height, image.width, false);
    mask.bits.block(p.top, p.left, p.height, p.width).setConstant(true);

    Plane fill = Plane::Zero(p.height, p.width);
    if (p.fill == PatchSpec::Fill::Checker) {
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) fill(y, x) = ((y / 4 + x / 4) % 2 == 0) ? 1.0f : 0.0f;
    } else {
        Rng rng(mix_seed(spec.seed, 0xfadeULL));
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) fill(y, x) = rng.bernoulli(0.5) ? 1.0f : 0.0f;
    }

    Image out = image;
    for (Plane& plane : out.planes) plane.block(p.top, p.left, p.height, p.width) = fill;
    return {std::move(out), std::move(mask)};
}

Image make_clean_image(int height, int width, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xc1ea7ULL));
    Image img(height, width, 3);

    // oriented linear gradient shared across channels, per-channel offset
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double ux = std::cos(theta), uy = std::sin(theta);
    const double scale = 1.0 / std::max(height, width);
    std::array<double, 3> offset{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                 rng.uniform(0.3, 0.7)};
    std::array<double, 3> slope{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                rng.uniform(-0.4, 0.4)};

    struct Blob {
        double cy, cx, sigma;
        std::array<double, 3> amp;
    };
    std::vector<Blob> blobs;
    const int n_blobs = 3 + static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < n_blobs; ++i) {
        Blob b;
        b.cy = rng.uniform(0.0, static_cast<double>(height));
        b.cx = rng.uniform(0.0, static_cast<double>(width));
        b.sigma = rng.uniform(24.0, 48.0);
        const double base_amp = rng.uniform(-0.3, 0.3);
        for (int c = 0; c < 3; ++c) b.amp[static_cast<std::size_t>(c)] = base_amp * rng.uniform(0.6, 1.0);
        blobs.push_back(b);
    }

    for (int c = 0; c < 3; ++c) {
        Plane& plane = img.planes[static_cast<std::size_t>(c)];
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double v = offset[static_cast<std::size_t>(c)] +
                           slope[static_cast<std::size_t>(c)] * (ux * x + uy * y) * scale;
                for (const Blob& b : blobs) {
                    const double dy = y - b.cy, dx = x - b.cx;
                    v += b.amp[static_cast<std::size_t>(c)] *
                         std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
                }
                plane(y, x) = static_cast<float>(v);
            }
        }
    }

    // single affine map into [0.08, 0.92] keeps pixel curvature profiles
    float lo = img.planes[0].minCoeff(), hi = img.planes[0].maxCoeff();
    for (int c = 1; c < 3; ++c) {
        lo = std::min(lo, img.planes[static_cast<std::size_t>(c)].minCoeff());
        hi = std::max(hi, img.planes[static_cast<std::size_t>(c)].maxCoeff());
    }
    const float span = std::max(hi - lo, 1e-6f);
    for (Plane& p : img.planes) p = 0.08f + 0.84f * (p - lo) / span;
    clamp_pixels(img);
    return img;
}

std::vector<FixtureSample> make_fixture_suite(const FixtureSuiteConfig& cfg) {
    if (cfg.clean < 0 || cfg.global < 0 || cfg.patch < 0)
        throw InvalidInput("make_fixture_suite: negative counts");
    if (cfg.height < 64 || cfg.width < 64)
        throw InvalidInput("make_fixture_suite: image too small for patch fixtures");

    std::vector<FixtureSample> out;
    out.reserve(static_cast<std::size_t>(cfg.clean + cfg.global + cfg.patch));
    char id[64];

    for (int i = 0; i < cfg.clean; ++i) {
        FixtureSample s;
        std::snprintf(id, sizeof(id), "clean_%03d", i);
        s.id = id;
        s.truth = ThreatClass::Clean;
        s.image = make_clean_image(cfg.height, cfg.width, mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i)));
        out.push_back(std::move(s));
    }

    static constexpr AttackKind kGlobalKinds[] = {AttackKind::GlobalUniform,
                                                  AttackKind::GlobalGaussian,
                                                  AttackKind::GlobalSignGrad};
    static constexpr double kBudgets[] = {4.0 / 255.0, 8.0 / 255.0, 16.0 / 255.0};
    for (int i = 0; i < cfg.global; ++i) {
        FixtureSample s;
        std::snprintf(id, sizeof(id), "global_%03d", i);
        s.id = id;
        s.truth = ThreatClass::GlobalAttack;
        const Image base =
            make_clean_image(cfg.height, cfg.width, mix_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(i)));
        AttackSpec spec;
        spec.kind = kGlobalKinds[i % 3];
        spec.epsilon = kBudgets[(i / 3) % 3];
        spec.seed = mix_seed(cfg.seed, 3000 + static_cast<std::uint64_t>(i));
        s.image = gen_global(base, spec);
        out.push_back(std::move(s));
    }

    const BlockGrid grid = BlockGrid::fit(cfg.height, cfg.width, cfg.grid_target, cfg.grid_target);
    // block-multiple sizes spanning roughly 2-5% of a 224x224 image
    const std::array<std::pair<int, int>, 4> patch_sizes{{{2, 2}, {2, 3}, {3, 2}, {3, 3}}};
    for (int i = 0; i < cfg.patch; ++i) {
        FixtureSample s;
        std::snprintf(id, sizeof(id), "patch_%03d", i);
        s.id = id;
        s.truth = ThreatClass::LocalAttack;
        const Image base =
            make_clean_image(cfg.height, cfg.width, mix_seed(cfg.seed, 4000 + static_cast<std::uint64_t>(i)));
        Rng rng(mix_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(i)));
        const auto [bh, bw] = patch_sizes[static_cast<std::size_t>(i) % patch_sizes.size()];
        AttackSpec spec;
        spec.kind = AttackKind::Patch;
        spec.seed = mix_seed(cfg.seed, 6000 + static_cast<std::uint64_t>(i));
        spec.patch.height = bh * grid.block_h;
        spec.patch.width = bw * grid.block_w;
        spec.patch.fill = (i % 2 == 0) ? PatchSpec::Fill::Checker : PatchSpec::Fill::SaturatedRandom;
        const int max_r = grid.rows - bh, max_c = grid.cols - bw;
        spec.patch.top = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_r + 1))) * grid.block_h;
        spec.patch.left = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_c + 1))) * grid.block_w;
        // keep the whole patch inside even when edge blocks are partial
        spec.patch.top = std::min(spec.patch.top, cfg.height - spec.patch.height);
        spec.patch.left = std::min(spec.patch.left, cfg.width - spec.patch.width);
        auto [attacked, mask] = gen_patch(base, spec);
        s.image = std::move(attacked);
        s.patch_mask = std::move(mask);
        out.push_back(std::move(s));
    }
    return out;
}

EvalReport evaluate(std::span<const EvalRecord> records) {
    if (records.empty()) throw InvalidInput("evaluate: no records");
    EvalReport rep;
    rep.total = static_cast<long>(records.size());

    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const EvalRecord& r : records) {
        if (!std::isfinite(r.attack_score)) throw InvalidInput("evaluate: non-finite score");
        rep.confusion[static_cast<std::size_t>(r.truth)][static_cast<std::size_t>(r.predicted)]++;
        const bool truth_pos = r.truth != ThreatClass::Clean;
        const bool pred_pos = r.predicted != ThreatClass::Clean;
        if (truth_pos && pred_pos) ++tp;
        else if (!truth_pos && pred_pos) ++fp;
        else if (truth_pos && !pred_pos) ++fn;
        else ++tn;
    }

    rep.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    rep.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    rep.f1_binary = rep.precision + rep.recall > 0.0
                        ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
                        : 0.0;
    rep.d_acc = static_cast<double>(tp + tn) / static_cast<double>(rep.total);
    rep.three_way_accuracy =
        static_cast<double>(rep.confusion[0][0] + rep.confusion[1][1] + rep.confusion[2][2]) /
        static_cast<double>(rep.total);

    const long n_pos = tp + fn, n_neg = fp + tn;
    if (n_pos > 0 && n_neg > 0) {
        // AUC via midranks; algebraically equal to the all-pairs statistic
        std::vector<std::pair<double, bool>> scored;
        scored.reserve(records.size());
        for (const EvalRecord& r : records)
            scored.emplace_back(r.attack_score, r.truth != ThreatClass::Clean);
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double rank_sum_pos = 0.0;
        std::size_t i = 0;
        while (i < scored.size()) {
            std::size_t j = i;
            while (j < scored.size() && scored[j].first == scored[i].first) ++j;
            const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
            for (std::size_t k = i; k < j; ++k)
                if (scored[k].second) rank_sum_pos += midrank;
            i = j;
        }
        rep.auc = (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
                  (static_cast<double>(n_pos) * static_cast<double>(n_neg));
        rep.auc_defined = true;

        // AP over the step-interpolated precision-recall curve
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        double ap = 0.0, prev_recall = 0.0;
        long cum_tp = 0, cum_fp = 0;
        i = 0;
        while (i < scored.size()) {
            std::size_t j = i;
            while (j < scored.size() && scored[j].first == scored[i].first) ++j;
            for (std::size_t k = i; k < j; ++k) scored[k].second ? ++cum_tp : ++cum_fp;
            const double recall = static_cast<double>(cum_tp) / static_cast<double>(n_pos);
            const double precision =
                static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp);
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
            i = j;
        }
        rep.ap = ap;
        rep.ap_defined = true;
    }
    return rep;
}

ThresholdGrid make_threshold_grid(std::span<const CalibrationSample> samples, int per_axis) {
    if (samples.empty()) throw InvalidInput("make_threshold_grid: no samples");
    if (per_axis < 1) throw InvalidInput("make_threshold_grid: per_axis must be >= 1");

    const auto candidates = [per_axis](std::vector<double> values) {
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        std::vector<double> mids;
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double m = 0.5 * (values[i] + values[i + 1]);
            if (m > 0.0) mids.push_back(m);
        }
        if (!values.empty()) {
            const double above = values.back() > 0.0 ? values.back() * 2.0 : 1.0;
            mids.push_back(above);
        }
        if (mids.empty()) mids.push_back(1e-9);
        if (static_cast<int>(mids.size()) > per_axis) {
            std::vector<double> thin;
            thin.reserve(static_cast<std::size_t>(per_axis));
            for (int i = 0; i < per_axis; ++i) {
                const std::size_t idx =
                    static_cast<std::size_t>(i) * (mids.size() - 1) / static_cast<std::size_t>(per_axis - 1);
                thin.push_back(mids[idx]);
            }
            thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
            mids = std::move(thin);
        }
        return mids;
    };

    std::vector<double> m_values, c_values;
    m_values.reserve(samples.size());
    c_values.reserve(samples.size());
    for (const CalibrationSample& s : samples) {
        m_values.push_back(s.m_anom);
        c_values.push_back(s.c_enh);
    }
    ThresholdGrid grid;
    grid.t_s = candidates(m_values);
    grid.t_cc1 = candidates(c_values);
    grid.t_cc2 = grid.t_cc1;
    return grid;
}

GateThresholds calibrate(std::span<const CalibrationSample> samples, const ThresholdGrid& grid,
                         const GateThresholds& base) {
    if (samples.empty()) throw InvalidInput("calibrate: no samples");
    if (grid.t_s.empty() || grid.t_cc1.empty() || grid.t_cc2.empty())
        throw InvalidInput("calibrate: empty grid");
    bool has[3] = {false, false, false};
    for (const CalibrationSample& s : samples) has[static_cast<std::size_t>(s.truth)] = true;
    if (!has[0] || !has[1] || !has[2])
        throw InvalidInput("calibrate: need samples from all three classes");

    struct Best {
        double f1 = -1.0, acc3 = -1.0;
        double t_s = 0.0, t_cc1 = 0.0, t_cc2 = 0.0;
    } best;

    for (const double t_s : grid.t_s) {
        if (!(t_s > 0.0)) continue;
        for (const double t_cc1 : grid.t_cc1) {
            if (!(t_cc1 > 0.0)) continue;
            for (const double t_cc2 : grid.t_cc2) {
                if (!(t_cc2 > 0.0) || t_cc2 > t_cc1) continue;
                long tp = 0, fp = 0, fn = 0, correct3 = 0;
                for (const CalibrationSample& s : samples) {
                    const bool attacked = s.m_anom > t_s || s.c_enh > t_cc1;
                    ThreatClass pred = ThreatClass::Clean;
                    if (attacked)
                        pred = s.c_enh > t_cc2 ? ThreatClass::LocalAttack : ThreatClass::GlobalAttack;
                    const bool truth_pos = s.truth != ThreatClass::Clean;
                    if (truth_pos && attacked) ++tp;
                    else if (!truth_pos && attacked) ++fp;
                    else if (truth_pos && !attacked) ++fn;
                    if (pred == s.truth) ++correct3;
                }
                const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
                const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
                const double f1 =
                    precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
                const double acc3 = static_cast<double>(correct3) / static_cast<double>(samples.size());
                const bool better =
                    f1 > best.f1 ||
                    (f1 == best.f1 &&
                     (acc3 > best.acc3 ||
                      (acc3 == best.acc3 &&
                       (t_s < best.t_s ||
                        (t_s == best.t_s &&
                         (t_cc1 < best.t_cc1 || (t_cc1 == best.t_cc1 && t_cc2 < best.t_cc2)))))));
                if (better) best = {f1, acc3, t_s, t_cc1, t_cc2};
            }
        }
    }
    if (best.f1 < 0.0) throw InvalidInput("calibrate: no valid threshold combination");
    GateThresholds out = base;
    out.t_s = best.t_s;
    out.t_cc1 = best.t_cc1;
    out.t_cc2 = best.t_cc2;
    out.validate();
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows,
                  const EvalReport& summary) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write report: " + path.string());
    out << "id,truth,predicted,m_anom,h_norm,c_local,c_enh,attack_score,v_sem,suffix\n";
    for (const ReportRow& r : rows) {
        out << r.id << ',' << to_string(r.truth) << ',' << to_string(r.predicted) << ','
            << fmt17(r.m_anom) << ',' << fmt17(r.h_norm) << ',' << fmt17(r.c_local) << ','
            << fmt17(r.c_enh) << ',' << fmt17(r.attack_score) << ','
            << (r.v_sem ? fmt17(*r.v_sem) : "") << ',' << r.suffix << '\n';
    }
    out << "# total=" << summary.total << "\n";
    out << "# precision=" << fmt17(summary.precision) << "\n";
    out << "# recall=" << fmt17(summary.recall) << "\n";
    out << "# f1_binary=" << fmt17(summary.f1_binary) << "\n";
    out << "# d_acc=" << fmt17(summary.d_acc) << "\n";
    out << "# three_way_accuracy=" << fmt17(summary.three_way_accuracy) << "\n";
    out << "# ap=" << (summary.ap_defined ? fmt17(summary.ap) : "undefined") << "\n";
    out << "# auc=" << (summary.auc_defined ? fmt17(summary.auc) : "undefined") << "\n";
    static constexpr const char* kNames[3] = {"clean", "global", "local"};
    for (int t = 0; t < 3; ++t) {
        out << "# confusion_" << kNames[t] << '=';
        for (int p = 0; p < 3; ++p)
            out << summary.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]
                << (p < 2 ? "," : "\n");
    }
    if (!out) throw ParseError("cannot write report: " + path.string());
}

std::vector<ReportRow> read_report_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open report: " + path.string());
    std::vector<ReportRow> rows;
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 10)
            throw ParseError("report: expected 10 fields at line " + std::to_string(lineno));
        ReportRow r;
        r.id = fields[0];
        r.truth = threat_class_from_string(fields[1]);
        r.predicted = threat_class_from_string(fields[2]);
        try {
            r.m_anom = std::stod(fields[3]);
            r.h_norm = std::stod(fields[4]);
            r.c_local = std::stod(fields[5]);
            r.c_enh = std::stod(fields[6]);
            r.attack_score = std::stod(fields[7]);
            if (!fields[8].empty()) r.v_sem = std::stod(fields[8]);
        } catch (const std::exception&) {
            throw ParseError("report: bad numeric field at line " + std::to_string(lineno));
        }
        r.suffix = fields[9];
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError("report: no data rows in " + path.string());
    return rows;
}

void write_distribution_csv(const std::filesystem::path& path, std::span<const ReportRow> rows) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write distribution csv: " + path.string());
    out << "class,m_anom,h_energy,h_norm,c_local,c_enh,attack_score\n";
    for (const ReportRow& r : rows)
        out << to_string(r.truth) << ',' << fmt17(r.m_anom) << ',' << fmt17(r.h_energy) << ','
            << fmt17(r.h_norm) << ',' << fmt17(r.c_local) << ',' << fmt17(r.c_enh) << ','
            << fmt17(r.attack_score) << '\n';
    if (!out) throw ParseError("cannot write distribution csv: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab1 = line.find('\t');
        const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                           : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos)
            throw ParseError("manifest: expected id<TAB>path<TAB>truth at line " +
                             std::to_string(lineno));
        ManifestEntry e;
        e.id = line.substr(0, tab1);
        e.path = line.substr(tab1 + 1, tab2 - tab1 - 1);
        e.truth = threat_class_from_string(line.substr(tab2 + 1));
        if (e.id.empty() || e.path.empty())
            throw ParseError("manifest: empty field at line " + std::to_string(lineno));
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw ParseError("manifest: no entries in " + path.string());
    return entries;
}

std::filesystem::path write_fixture_suite(const std::filesystem::path& dir,
                                          std::span<const FixtureSample> samples,
                                          const std::string& format) {
    if (format != "png" && format != "ppm")
        throw InvalidInput("write_fixture_suite: format must be png or ppm");
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    const std::filesystem::path manifest_path = dir / "manifest.tsv";
    std::ofstream manifest(manifest_path);
    if (!manifest) throw ParseError("cannot write manifest: " + manifest_path.string());
    for (const FixtureSample& s : samples) {
        const std::filesystem::path img_path = dir / "images" / (s.id + "." + format);
        if (format == "png")
            write_png(img_path, s.image);
        else
            write_ppm(img_path, s.image);
        if (s.patch_mask) write_mask_png(dir / "masks" / (s.id + "_mask.png"), s.patch_mask->bits);
        manifest << s.id << '\t' << img_path.generic_string() << '\t' << to_string(s.truth)
                 << '\n';
    }
    if (!manifest) throw ParseError("cannot write manifest: " + manifest_path.string());
    return manifest_path;
}

SuiteResult run_defense(const DefensePipeline& pipeline, std::span<const FixtureSample> samples,
                        const std::string& prompt) {
    SuiteResult result;
    result.rows.reserve(samples.size());
    result.records.reserve(samples.size());
    for (const FixtureSample& s : samples) {
        const DefenseOutcome outcome = pipeline.defend(std::span(&s.image, 1), prompt);
        ReportRow row;
        row.id = s.id;
        row.truth = s.truth;
        row.predicted = outcome.verdict.cls;
        row.m_anom = outcome.verdict.metrics.m_anom;
        row.h_energy = outcome.verdict.metrics.h_energy;
        row.h_norm = outcome.verdict.metrics.h_norm;
        row.c_local = outcome.verdict.metrics.c_local;
        row.c_enh = outcome.verdict.metrics.c_enh;
        row.attack_score = outcome.verdict.attack_score;
        row.v_sem = outcome.v_sem;
        if (outcome.robust_prompt) {
            for (std::size_t i = 0; i < outcome.robust_prompt->suffix.size(); ++i) {
                if (i) row.suffix += ' ';
                row.suffix += outcome.robust_prompt->suffix[i];
            }
        }
        result.records.push_back({row.id, row.truth, row.predicted, row.attack_score});
        result.rows.push_back(std::move(row));
    }
    return result;
}

EvalRecord to_eval_record(const ReportRow& row) {
    return {row.id, row.truth, row.predicted, row.attack_score};
}

CalibrationSample to_calibration_sample(const ReportRow& row) {
    return {row.truth, row.m_anom, row.c_enh};
}

}  // namespace advdef
