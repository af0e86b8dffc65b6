// advdef - adversarial input defense toolkit
//
// Subcommands: gen-fixtures, detect, purify, eapt, run, evaluate, calibrate.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "advdef/harness.hpp"
#include "advdef/image_io.hpp"

namespace {

using namespace advdef;

struct ConfigOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config file (key = value lines)");
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set t_s=0.01")
        ->type_name("KEY=VALUE");
}

PipelineConfig load_config(const ConfigOptions& opts) {
    PipelineConfig cfg;
    if (!opts.config_path.empty()) cfg = PipelineConfig::from_file(opts.config_path);
    for (const std::string& kv : opts.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--set expects KEY=VALUE, got: " + kv);
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void print_metrics(const Verdict& v) {
    std::cout << "verdict=" << to_string(v.cls) << " m_anom=" << fmt(v.metrics.m_anom)
              << " h_energy=" << fmt(v.metrics.h_energy) << " h_norm=" << fmt(v.metrics.h_norm)
              << " c_local=" << fmt(v.metrics.c_local) << " c_enh=" << fmt(v.metrics.c_enh)
              << " attack_score=" << fmt(v.attack_score) << "\n";
}

void print_summary(const EvalReport& rep) {
    std::cout << "samples=" << rep.total << " f1_binary=" << fmt(rep.f1_binary)
              << " d_acc=" << fmt(rep.d_acc) << " three_way_accuracy="
              << fmt(rep.three_way_accuracy)
              << " ap=" << (rep.ap_defined ? fmt(rep.ap) : "undefined")
              << " auc=" << (rep.auc_defined ? fmt(rep.auc) : "undefined") << "\n";
}

void write_outcomes(const std::filesystem::path& path, std::span<const ReportRow> rows,
                    const std::vector<StageTimings>& timings,
                    const std::vector<std::string>& prompts) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write outcomes: " + path.string());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ReportRow& r = rows[i];
        out << "sample " << r.id << "\n";
        out << "verdict " << to_string(r.predicted) << "\n";
        out << "metrics m_anom=" << fmt(r.m_anom) << " h_energy=" << fmt(r.h_energy)
            << " h_norm=" << fmt(r.h_norm) << " c_local=" << fmt(r.c_local)
            << " c_enh=" << fmt(r.c_enh) << " attack_score=" << fmt(r.attack_score) << "\n";
        if (r.v_sem) out << "v_sem " << fmt(*r.v_sem) << "\n";
        if (!r.suffix.empty()) out << "suffix " << r.suffix << "\n";
        out << "prompt " << prompts[i] << "\n";
        out << "timings detect=" << fmt(timings[i].detect_seconds)
            << " purify=" << fmt(timings[i].purify_seconds)
            << " prompt=" << fmt(timings[i].prompt_seconds) << "\n\n";
    }
}

int run_gen_fixtures(const std::string& out_dir, FixtureSuiteConfig cfg,
                     const std::string& format) {
    const std::vector<FixtureSample> suite = make_fixture_suite(cfg);
    const std::filesystem::path manifest = write_fixture_suite(out_dir, suite, format);
    std::cout << "wrote " << suite.size() << " samples, manifest: " << manifest.string() << "\n";
    return 0;
}

int run_detect(const ConfigOptions& copts, const std::string& image_path,
               const std::string& import_map, const std::string& export_map) {
    const PipelineConfig cfg = load_config(copts);
    const ToyDualEncoder enc;
    const Vocabulary vocab = Vocabulary::synthetic();
    const Projector proj = Projector::identity(enc.dim());
    const DefensePipeline pipeline(cfg, enc, vocab, proj);

    ErrorMap map;
    DetectionMetrics metrics;
    if (!import_map.empty()) {
        map = import_error_map(import_map);
        metrics = compute_metrics(map, cfg.thresholds, cfg.connectivity);
    } else {
        const Image img = read_image(image_path);
        auto analysis = pipeline.analyze_frame(img);
        map = std::move(analysis.map);
        metrics = std::move(analysis.metrics);
    }
    if (!export_map.empty()) export_error_map(export_map, map);
    print_metrics(dual_gate(metrics, cfg.thresholds));
    return 0;
}

int run_purify(const ConfigOptions& copts, const std::string& image_path,
               const std::string& out_path, const std::string& mask_out, bool force) {
    const PipelineConfig cfg = load_config(copts);
    const ToyDualEncoder enc;
    const Vocabulary vocab = Vocabulary::synthetic();
    const Projector proj = Projector::identity(enc.dim());
    const DefensePipeline pipeline(cfg, enc, vocab, proj);

    const Image img = read_image(image_path);
    const auto analysis = pipeline.analyze_frame(img);
    const Verdict verdict = dual_gate(analysis.metrics, cfg.thresholds);
    print_metrics(verdict);

    if (verdict.cls != ThreatClass::LocalAttack && !force) {
        std::cout << "no local attack detected; nothing to purify (use --force to mask anyway)\n";
        return 0;
    }
    if (analysis.metrics.largest_component.empty())
        throw InvalidInput("purify: no active component to mask");

    const BlockGrid grid = BlockGrid::fit(img.height, img.width, cfg.grid_rows, cfg.grid_cols);
    const PixelMask mask = build_mask(analysis.metrics.largest_component, grid,
                                      cfg.purifier.dilation, img.height, img.width);
    write_png(out_path, apply_gray_mask(img, mask, cfg.purifier.gray));
    if (!mask_out.empty()) write_mask_png(mask_out, mask.bits);
    std::cout << "purified image written to " << out_path << "\n";
    return 0;
}

int run_eapt(const ConfigOptions& copts, const std::string& image_path, const std::string& prompt,
             const std::string& trace_csv, bool force) {
    const PipelineConfig cfg = load_config(copts);
    const ToyDualEncoder enc;
    const Vocabulary vocab = Vocabulary::synthetic();
    const Projector proj = Projector::identity(enc.dim());

    const Image img = read_image(image_path);
    const double v_sem = semantic_verification(img, prompt, enc);
    std::cout << "v_sem=" << fmt(v_sem) << " tau_sem=" << fmt(cfg.eapt.tau_sem) << "\n";
    if (v_sem >= cfg.eapt.tau_sem && !force) {
        std::cout << "semantic gate passed; prompt unchanged: " << prompt << "\n";
        return 0;
    }
    const auto [e_opt, trace] = optimize_suffix_embedding(img, prompt, enc, cfg.eapt);
    const std::vector<std::string> suffix = generate_suffix(e_opt, proj, vocab, cfg.eapt.k_suffix);
    const RobustPrompt robust = compose_prompt(prompt, suffix);
    if (!trace_csv.empty()) {
        std::ofstream out(trace_csv);
        if (!out) throw ParseError("cannot write trace: " + trace_csv);
        write_trace_csv(out, trace);
    }
    std::cout << "suffix:";
    for (const std::string& t : suffix) std::cout << ' ' << t;
    std::cout << "\nprompt: " << robust.composed << "\n";
    return 0;
}

int run_run(const ConfigOptions& copts, const std::string& manifest_path,
            const std::string& report_path, const std::string& prompt,
            const std::string& outcomes_path, const std::string& dist_path) {
    const PipelineConfig cfg = load_config(copts);
    const ToyDualEncoder enc;
    const Vocabulary vocab = Vocabulary::synthetic();
    const Projector proj = Projector::identity(enc.dim());
    const DefensePipeline pipeline(cfg, enc, vocab, proj);

    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    std::vector<ReportRow> rows;
    std::vector<EvalRecord> records;
    std::vector<StageTimings> timings;
    std::vector<std::string> prompts;
    rows.reserve(manifest.size());
    for (const ManifestEntry& entry : manifest) {
        const Image img = read_image(entry.path);
        const DefenseOutcome outcome = pipeline.defend(std::span(&img, 1), prompt);
        ReportRow row;
        row.id = entry.id;
        row.truth = entry.truth;
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
        records.push_back(to_eval_record(row));
        timings.push_back(outcome.timings);
        prompts.push_back(outcome.prompt_out);
        rows.push_back(std::move(row));
    }
    const EvalReport summary = evaluate(records);
    write_report(report_path, rows, summary);
    if (!outcomes_path.empty()) write_outcomes(outcomes_path, rows, timings, prompts);
    if (!dist_path.empty()) write_distribution_csv(dist_path, rows);
    print_summary(summary);
    return 0;
}

int run_evaluate(const std::string& report_path) {
    const std::vector<ReportRow> rows = read_report_rows(report_path);
    std::vector<EvalRecord> records;
    records.reserve(rows.size());
    for (const ReportRow& r : rows) records.push_back(to_eval_record(r));
    print_summary(evaluate(records));
    return 0;
}

int run_calibrate(const std::string& report_path, const std::string& out_path, int per_axis) {
    const std::vector<ReportRow> rows = read_report_rows(report_path);
    std::vector<CalibrationSample> samples;
    samples.reserve(rows.size());
    for (const ReportRow& r : rows) samples.push_back(to_calibration_sample(r));
    const ThresholdGrid grid = make_threshold_grid(samples, per_axis);
    const GateThresholds th = calibrate(samples, grid);
    std::cout << "t_s=" << fmt(th.t_s) << " t_cc1=" << fmt(th.t_cc1) << " t_cc2=" << fmt(th.t_cc2)
              << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ParseError("cannot write thresholds: " + out_path);
        out << "t_s = " << fmt(th.t_s) << "\n";
        out << "t_cc1 = " << fmt(th.t_cc1) << "\n";
        out << "t_cc2 = " << fmt(th.t_cc2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial input defense: triage, purification, prompt tuning"};
    app.require_subcommand(1);

    // gen-fixtures
    auto* gen = app.add_subcommand("gen-fixtures", "generate a synthetic attack fixture suite");
    std::string gen_out = "fixtures";
    FixtureSuiteConfig suite_cfg;
    std::string gen_format = "png";
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--clean", suite_cfg.clean, "clean sample count");
    gen->add_option("--global", suite_cfg.global, "global attack sample count");
    gen->add_option("--patch", suite_cfg.patch, "patch attack sample count");
    gen->add_option("--height", suite_cfg.height, "image height");
    gen->add_option("--width", suite_cfg.width, "image width");
    gen->add_option("--seed", suite_cfg.seed, "suite seed");
    gen->add_option("--format", gen_format, "image format: png or ppm")
        ->check(CLI::IsMember({"png", "ppm"}));

    // detect
    auto* detect = app.add_subcommand("detect", "classify one image as clean/global/local");
    ConfigOptions detect_cfg;
    std::string detect_image, detect_import, detect_export;
    add_config_options(detect, detect_cfg);
    detect->add_option("--image", detect_image, "input image (png or ppm)");
    detect->add_option("--import-map", detect_import, "use a precomputed loss-map file");
    detect->add_option("--export-map", detect_export, "write the computed loss map");

    // purify
    auto* purify = app.add_subcommand("purify", "gray-mask the detected patch region");
    ConfigOptions purify_cfg;
    std::string purify_image, purify_out, purify_mask;
    bool purify_force = false;
    add_config_options(purify, purify_cfg);
    purify->add_option("--image", purify_image, "input image")->required();
    purify->add_option("--out", purify_out, "purified image output path")->required();
    purify->add_option("--mask-out", purify_mask, "write the applied mask as 1-bit png");
    purify->add_flag("--force", purify_force, "mask the largest component regardless of verdict");

    // eapt
    auto* eapt_cmd = app.add_subcommand("eapt", "tune a robust prompt suffix for one image");
    ConfigOptions eapt_cfg;
    std::string eapt_image, eapt_prompt = "describe the scene", eapt_trace;
    bool eapt_force = false;
    add_config_options(eapt_cmd, eapt_cfg);
    eapt_cmd->add_option("--image", eapt_image, "input image")->required();
    eapt_cmd->add_option("--prompt", eapt_prompt, "base prompt");
    eapt_cmd->add_option("--trace-csv", eapt_trace, "write the optimization trace as CSV");
    eapt_cmd->add_flag("--force", eapt_force, "run optimization even if the gate passes");

    // run
    auto* run = app.add_subcommand("run", "full defense over a manifest of images");
    ConfigOptions run_cfg;
    std::string run_manifest, run_report, run_prompt = "describe the scene";
    std::string run_outcomes, run_dist;
    add_config_options(run, run_cfg);
    run->add_option("--manifest", run_manifest, "manifest: id<TAB>path<TAB>truth")->required();
    run->add_option("--report", run_report, "per-sample report CSV output")->required();
    run->add_option("--prompt", run_prompt, "prompt applied to every sample");
    run->add_option("--outcomes", run_outcomes, "write per-sample outcome records with timings");
    run->add_option("--dist", run_dist, "write per-class metric distribution CSV");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "recompute metrics from a report CSV");
    std::string eval_report;
    eval->add_option("--report", eval_report, "report CSV produced by run")->required();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "grid-search gate thresholds from a report CSV");
    std::string cal_report, cal_out;
    int cal_per_axis = 32;
    cal->add_option("--report", cal_report, "report CSV produced by run")->required();
    cal->add_option("--out", cal_out, "write calibrated thresholds as a config fragment");
    cal->add_option("--per-axis", cal_per_axis, "max grid candidates per threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the usage message
        return code == 0 ? 0 : 1;     // help/version exit 0, usage errors exit 1
    }

    try {
        if (gen->parsed()) return run_gen_fixtures(gen_out, suite_cfg, gen_format);
        if (detect->parsed()) {
            if (detect_image.empty() && detect_import.empty()) {
                std::cerr << "detect: need --image or --import-map\n";
                return 1;
            }
            return run_detect(detect_cfg, detect_image, detect_import, detect_export);
        }
        if (purify->parsed())
            return run_purify(purify_cfg, purify_image, purify_out, purify_mask, purify_force);
        if (eapt_cmd->parsed())
            return run_eapt(eapt_cfg, eapt_image, eapt_prompt, eapt_trace, eapt_force);
        if (run->parsed())
            return run_run(run_cfg, run_manifest, run_report, run_prompt, run_outcomes, run_dist);
        if (eval->parsed()) return run_evaluate(eval_report);
        if (cal->parsed()) return run_calibrate(cal_report, cal_out, cal_per_axis);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
