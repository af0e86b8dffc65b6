#pragma once

#include <memory>
#include <optional>
#include <span>

#include "advdef/eapt.hpp"
#include "advdef/purifier.hpp"

namespace advdef {

struct PurifierConfig {
    float gray = 0.5f;  // mid-gray fill
    int dilation = 1;   // blocks of margin around the detected component

    void validate() const;
};

struct PipelineConfig {
    GateThresholds thresholds;
    EaptConfig eapt;
    int grid_rows = 14;
    int grid_cols = 14;
    std::string reconstructor = "lowpass";
    int median_kernel = 5;
    PurifierConfig purifier;
    Connectivity connectivity = Connectivity::Eight;

    void validate() const;

    // Flat `key = value` text, '#' comments. Unknown keys are rejected.
    static PipelineConfig from_file(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Applies `key = value` overrides on top of the current values.
    void apply_override(const std::string& key, const std::string& value);
};

struct StageTimings {
    double detect_seconds = 0.0;
    double purify_seconds = 0.0;
    double prompt_seconds = 0.0;
};

// Result of one defense invocation. Exactly one branch populates outputs:
// LocalAttack carries purified frames, GlobalAttack below the semantic gate
// carries a robust prompt, everything else passes the input through.
struct DefenseOutcome {
    Verdict verdict;
    std::vector<Image> purified_frames;          // non-empty iff LocalAttack
    std::optional<RobustPrompt> robust_prompt;   // present iff gated global
    std::optional<double> v_sem;                 // present iff GlobalAttack
    std::optional<OptimTrace> trace;             // present iff robust_prompt
    std::string prompt_out;                      // composed or echoed prompt
    StageTimings timings;
};

// Detection + branch dispatch over one or more frames of identical shape.
// Immutable after construction; defend() is const and safe to call
// concurrently on distinct inputs.
class DefensePipeline {
public:
    DefensePipeline(PipelineConfig cfg, const DualEncoder& enc, const Vocabulary& vocab,
                    const Projector& proj);

    DefenseOutcome defend(std::span<const Image> frames, const std::string& prompt) const;

    const PipelineConfig& config() const { return cfg_; }

    // Detection stage only: error map + per-frame metrics (m_anom over the
    // frame's own losses). Used by the CLI and the evaluation harness.
    struct FrameAnalysis {
        ErrorMap map;
        DetectionMetrics metrics;
    };
    FrameAnalysis analyze_frame(const Image& frame) const;

private:
    PipelineConfig cfg_;
    const DualEncoder* enc_;
    const Vocabulary* vocab_;
    const Projector* proj_;
    std::unique_ptr<Reconstructor> recon_;
};

// One-shot convenience wrapper over DefensePipeline.
DefenseOutcome defend(std::span<const Image> frames, const std::string& prompt,
                      const PipelineConfig& cfg, const DualEncoder& enc, const Vocabulary& vocab,
                      const Projector& proj);

}  // namespace advdef
