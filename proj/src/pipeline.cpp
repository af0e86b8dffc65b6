#include "advdef/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace advdef {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad numeric value for " + key + ": " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ParseError("config: bad integer value for " + key + ": " + value);
    }
}

}  // namespace

void PurifierConfig::validate() const {
    if (!(gray >= 0.0f && gray <= 1.0f)) throw InvalidInput("PurifierConfig: gray out of [0,1]");
    if (dilation < 0) throw InvalidInput("PurifierConfig: dilation must be >= 0");
}

void PipelineConfig::validate() const {
    thresholds.validate();
    eapt.validate();
    purifier.validate();
    if (grid_rows < 2 || grid_cols < 2)
        throw InvalidInput("PipelineConfig: grid must be at least 2x2");
    if (reconstructor != "lowpass" && reconstructor != "median")
        throw InvalidInput("PipelineConfig: unknown reconstructor " + reconstructor);
    if (median_kernel < 3 || median_kernel % 2 == 0)
        throw InvalidInput("PipelineConfig: median_kernel must be odd and >= 3");
    if (connectivity != Connectivity::Four && connectivity != Connectivity::Eight)
        throw InvalidInput("PipelineConfig: connectivity must be 4 or 8");
}

void PipelineConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "t_s") thresholds.t_s = parse_double(key, value);
    else if (key == "t_cc1") thresholds.t_cc1 = parse_double(key, value);
    else if (key == "t_cc2") thresholds.t_cc2 = parse_double(key, value);
    else if (key == "cvar_alpha") thresholds.alpha = parse_double(key, value);
    else if (key == "beta") thresholds.beta = parse_double(key, value);
    else if (key == "tau_sem") eapt.tau_sem = parse_double(key, value);
    else if (key == "eapt_steps") eapt.steps = parse_int(key, value);
    else if (key == "eapt_learning_rate") eapt.learning_rate = parse_double(key, value);
    else if (key == "eapt_drift_weight") eapt.drift_weight = parse_double(key, value);
    else if (key == "eapt_n_aug") eapt.n_aug = parse_int(key, value);
    else if (key == "eapt_k_suffix") eapt.k_suffix = parse_int(key, value);
    else if (key == "seed") {
        try {
            std::size_t pos = 0;
            eapt.seed = static_cast<std::uint64_t>(std::stoull(value, &pos));
            if (pos != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw ParseError("config: bad seed value: " + value);
        }
    }
    else if (key == "grid_rows") grid_rows = parse_int(key, value);
    else if (key == "grid_cols") grid_cols = parse_int(key, value);
    else if (key == "reconstructor") reconstructor = value;
    else if (key == "median_kernel") median_kernel = parse_int(key, value);
    else if (key == "gray") purifier.gray = static_cast<float>(parse_double(key, value));
    else if (key == "dilation") purifier.dilation = parse_int(key, value);
    else if (key == "connectivity") {
        const int c = parse_int(key, value);
        if (c != 4 && c != 8) throw ParseError("config: connectivity must be 4 or 8");
        connectivity = c == 4 ? Connectivity::Four : Connectivity::Eight;
    } else {
        throw ParseError("config: unknown key " + key);
    }
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path.string());
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config: expected key = value at line " + std::to_string(lineno));
        cfg.apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void PipelineConfig::save(const std::filesystem::path& path) const {
    validate();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write config: " + path.string());
    char buf[64];
    const auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "t_s = " << num(thresholds.t_s) << "\n";
    out << "t_cc1 = " << num(thresholds.t_cc1) << "\n";
    out << "t_cc2 = " << num(thresholds.t_cc2) << "\n";
    out << "cvar_alpha = " << num(thresholds.alpha) << "\n";
    out << "beta = " << num(thresholds.beta) << "\n";
    out << "tau_sem = " << num(eapt.tau_sem) << "\n";
    out << "eapt_steps = " << eapt.steps << "\n";
    out << "eapt_learning_rate = " << num(eapt.learning_rate) << "\n";
    out << "eapt_drift_weight = " << num(eapt.drift_weight) << "\n";
    out << "eapt_n_aug = " << eapt.n_aug << "\n";
    out << "eapt_k_suffix = " << eapt.k_suffix << "\n";
    out << "seed = " << eapt.seed << "\n";
    out << "grid_rows = " << grid_rows << "\n";
    out << "grid_cols = " << grid_cols << "\n";
    out << "reconstructor = " << reconstructor << "\n";
    out << "median_kernel = " << median_kernel << "\n";
    out << "gray = " << num(purifier.gray) << "\n";
    out << "dilation = " << purifier.dilation << "\n";
    out << "connectivity = " << static_cast<int>(connectivity) << "\n";
}

DefensePipeline::DefensePipeline(PipelineConfig cfg, const DualEncoder& enc,
                                 const Vocabulary& vocab, const Projector& proj)
    : cfg_(std::move(cfg)), enc_(&enc), vocab_(&vocab), proj_(&proj) {
    cfg_.validate();
    recon_ = make_reconstructor(cfg_.reconstructor, cfg_.median_kernel);
}

DefensePipeline::FrameAnalysis DefensePipeline::analyze_frame(const Image& frame) const {
    FrameAnalysis out;
    const Image recon = reconstruct(frame, *recon_);
    const BlockGrid grid = BlockGrid::fit(frame.height, frame.width, cfg_.grid_rows, cfg_.grid_cols);
    out.map = block_losses(frame, recon, grid);
    out.metrics = compute_metrics(out.map, cfg_.thresholds, cfg_.connectivity);
    return out;
}

DefenseOutcome DefensePipeline::defend(std::span<const Image> frames,
                                       const std::string& prompt) const {
    if (frames.empty()) throw InvalidInput("defend: empty frame list");
    for (const Image& f : frames) {
        f.validate();
        if (!f.same_shape(frames.front())) throw InvalidInput("defend: frame shape mismatch");
    }

    DefenseOutcome outcome;
    const auto t_detect = std::chrono::steady_clock::now();

    std::vector<FrameAnalysis> analyses;
    analyses.reserve(frames.size());
    std::vector<double> pooled;
    for (const Image& f : frames) {
        analyses.push_back(analyze_frame(f));
        const std::vector<double> losses = flatten_losses(analyses.back().map);
        pooled.insert(pooled.end(), losses.begin(), losses.end());
    }

    // Temporal pooling: CVaR over the union of all frames' block losses;
    // spatial metrics come from the frame with the strongest concentration.
    std::size_t rep = 0;
    for (std::size_t i = 1; i < analyses.size(); ++i)
        if (analyses[i].metrics.c_enh > analyses[rep].metrics.c_enh) rep = i;

    DetectionMetrics metrics = analyses[rep].metrics;
    metrics.m_anom = anomaly_magnitude(pooled, cfg_.thresholds.alpha);
    outcome.verdict = dual_gate(metrics, cfg_.thresholds);
    outcome.timings.detect_seconds = seconds_since(t_detect);
    outcome.prompt_out = prompt;

    if (outcome.verdict.cls == ThreatClass::LocalAttack) {
        const auto t_purify = std::chrono::steady_clock::now();
        const BlockGrid grid = BlockGrid::fit(frames.front().height, frames.front().width,
                                              cfg_.grid_rows, cfg_.grid_cols);
        const PixelMask mask =
            build_mask(metrics.largest_component, grid, cfg_.purifier.dilation,
                       frames.front().height, frames.front().width);
        outcome.purified_frames.reserve(frames.size());
        for (const Image& f : frames)
            outcome.purified_frames.push_back(apply_gray_mask(f, mask, cfg_.purifier.gray));
        outcome.timings.purify_seconds = seconds_since(t_purify);
        return outcome;
    }

    if (outcome.verdict.cls == ThreatClass::GlobalAttack) {
        const auto t_prompt = std::chrono::steady_clock::now();
        const Image& last = frames.back();
        outcome.v_sem = semantic_verification(last, prompt, *enc_);
        if (*outcome.v_sem < cfg_.eapt.tau_sem) {
            auto [e_opt, trace] = optimize_suffix_embedding(last, prompt, *enc_, cfg_.eapt);
            const std::vector<std::string> suffix =
                generate_suffix(e_opt, *proj_, *vocab_, cfg_.eapt.k_suffix);
            outcome.robust_prompt = compose_prompt(prompt, suffix);
            outcome.trace = std::move(trace);
            outcome.prompt_out = outcome.robust_prompt->composed;
        }
        outcome.timings.prompt_seconds = seconds_since(t_prompt);
    }
    return outcome;
}

DefenseOutcome defend(std::span<const Image> frames, const std::string& prompt,
                      const PipelineConfig& cfg, const DualEncoder& enc, const Vocabulary& vocab,
                      const Projector& proj) {
    return DefensePipeline(cfg, enc, vocab, proj).defend(frames, prompt);
}

}  // namespace advdef
