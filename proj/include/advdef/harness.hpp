#pragma once

#include <array>
#include <optional>

#include "advdef/pipeline.hpp"

namespace advdef {

enum class AttackKind { GlobalUniform, GlobalGaussian, GlobalSignGrad, Patch };

std::string_view to_string(AttackKind kind);

struct PatchSpec {
    int height = 48;
    int width = 48;
    int top = 0;
    int left = 0;
    enum class Fill { Checker, SaturatedRandom } fill = Fill::Checker;
};

struct AttackSpec {
    AttackKind kind = AttackKind::GlobalUniform;
    double epsilon = 8.0 / 255.0;  // L-inf budget for the global kinds
    PatchSpec patch;
    std::uint64_t seed = 0;
};

// Frame-wide bounded noise: I' = clamp(I + delta) with |delta|_inf <= eps.
// Uniform draws in [-eps, eps]; Gaussian draws sigma = eps/2 clamped to
// +-eps; SignGrad uses eps * sign(I - lowpass(I)) as a gradient-free proxy
// for a one-step sign attack. Deterministic per seed.
Image gen_global(const Image& image, const AttackSpec& spec);

// High-intensity patch: I' = (1-M) (.) I + M (.) fill, returning the exact
// mask. Checker fill alternates 0/1 at a 4-px period; saturated-random fill
// draws {0,1} per pixel, seeded.
std::pair<Image, PixelMask> gen_patch(const Image& image, const AttackSpec& spec);

// Procedural smooth scene: oriented gradients plus Gaussian blobs, mapped
// into [0.08, 0.92] so attack noise never saturates.
Image make_clean_image(int height, int width, std::uint64_t seed);

struct FixtureSample {
    std::string id;
    ThreatClass truth = ThreatClass::Clean;
    Image image;
    std::optional<PixelMask> patch_mask;  // ground truth for patch samples
};

struct FixtureSuiteConfig {
    int clean = 70;
    int global = 65;
    int patch = 65;
    int height = 224;
    int width = 224;
    std::uint64_t seed = 2024;
    int grid_target = 14;  // patches are block-aligned against this grid
};

// Deterministic fixture suite mixing the three classes; the global kinds and
// budgets {4,8,16}/255 cycle, patch sizes span 2-5% of the image area with
// both fills.
std::vector<FixtureSample> make_fixture_suite(const FixtureSuiteConfig& cfg);

struct EvalRecord {
    std::string id;
    ThreatClass truth = ThreatClass::Clean;
    ThreatClass predicted = ThreatClass::Clean;
    double attack_score = 0.0;
};

struct EvalReport {
    std::array<std::array<long, 3>, 3> confusion{};  // [truth][predicted]
    double precision = 0.0;
    double recall = 0.0;
    double f1_binary = 0.0;
    double d_acc = 0.0;
    double three_way_accuracy = 0.0;
    double auc = 0.0;
    double ap = 0.0;
    bool auc_defined = false;
    bool ap_defined = false;
    long total = 0;
};

// Binary metrics treat both attack classes as positive. AUC is the rank
// statistic P(score_pos > score_neg) + 0.5 P(tie); AP is the area under the
// step-interpolated precision-recall curve. Single-class inputs leave
// AUC/AP flagged undefined.
EvalReport evaluate(std::span<const EvalRecord> records);

struct CalibrationSample {
    ThreatClass truth = ThreatClass::Clean;
    double m_anom = 0.0;
    double c_enh = 0.0;
};

struct ThresholdGrid {
    std::vector<double> t_s;
    std::vector<double> t_cc1;
    std::vector<double> t_cc2;
};

// Candidate thresholds from midpoints between consecutive distinct observed
// values, thinned to at most `per_axis` per dimension.
ThresholdGrid make_threshold_grid(std::span<const CalibrationSample> samples, int per_axis = 32);

// Exhaustive grid search maximizing binary F1; ties broken by three-way
// accuracy, then by the smallest (t_s, t_cc1, t_cc2). Combinations with
// t_cc2 > t_cc1 are skipped. alpha/beta are taken from `base`.
GateThresholds calibrate(std::span<const CalibrationSample> samples, const ThresholdGrid& grid,
                         const GateThresholds& base = {});

struct ReportRow {
    std::string id;
    ThreatClass truth = ThreatClass::Clean;
    ThreatClass predicted = ThreatClass::Clean;
    double m_anom = 0.0;
    double h_energy = 0.0;
    double h_norm = 0.0;
    double c_local = 0.0;
    double c_enh = 0.0;
    double attack_score = 0.0;
    std::optional<double> v_sem;
    std::string suffix;  // space-joined tokens, empty when none
};

// Per-sample CSV plus a '#'-prefixed summary block; byte-stable for a fixed
// input.
void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows,
                  const EvalReport& summary);
std::vector<ReportRow> read_report_rows(const std::filesystem::path& path);

// Long-format per-class metric values for plotting distribution overlays.
void write_distribution_csv(const std::filesystem::path& path, std::span<const ReportRow> rows);

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;
    ThreatClass truth = ThreatClass::Clean;
};

// One line per sample: id<TAB>path<TAB>truth.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Writes images (png or ppm), ground-truth masks and the manifest under
// `dir`; returns the manifest path.
std::filesystem::path write_fixture_suite(const std::filesystem::path& dir,
                                          std::span<const FixtureSample> samples,
                                          const std::string& format = "png");

struct SuiteResult {
    std::vector<ReportRow> rows;
    std::vector<EvalRecord> records;
};

// Runs the defense over every sample (single-frame) and collects rows and
// evaluation records in input order.
SuiteResult run_defense(const DefensePipeline& pipeline,
                        std::span<const FixtureSample> samples, const std::string& prompt);

EvalRecord to_eval_record(const ReportRow& row);
CalibrationSample to_calibration_sample(const ReportRow& row);

}  // namespace advdef
