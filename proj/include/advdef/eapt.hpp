#pragma once

#include <functional>
#include <ostream>
#include <span>
#include <utility>

#include "advdef/embedspace.hpp"

namespace advdef {

struct EaptConfig {
    int steps = 3;                  // gradient iterations
    double learning_rate = 5e-3;
    double drift_weight = 0.1;      // anchor strength toward the prompt embedding
    double tau_sem = 0.2;           // semantic gate threshold
    int n_aug = 4;                  // augmented views per step
    int k_suffix = 7;               // suffix token count
    std::uint64_t seed = 0;

    void validate() const;
};

struct OptimStep {
    double consistency = 0.0;
    double drift = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;
};

struct OptimTrace {
    std::vector<OptimStep> steps;
    Embedding final_embedding;
};

struct RobustPrompt {
    std::string base;
    std::vector<std::string> suffix;
    std::string composed;
};

// Deterministic stochastic view of the image: random crop with area scale
// uniform in [0.8, 1.0] resized back, horizontal flip with probability 0.5,
// additive Gaussian pixel noise (sigma 0.01), clamped to [0, 1]. A pure
// function of (image, seed, index).
Image augment(const Image& image, std::uint64_t seed, std::uint64_t index);

// Mean over the views of (1 - cos(a_i, e)).
double consistency_loss(const Embedding& e, std::span<const Embedding> aug_embeddings);

// Squared Euclidean distance to the anchor embedding.
double drift_loss(const Embedding& e, const Embedding& e_init);

double eapt_loss(const Embedding& e, std::span<const Embedding> aug_embeddings,
                 const Embedding& e_init, double drift_weight);

// Analytic gradient of the joint loss:
//   mean_i[-(a_i/(|a_i||e|) - (a_i.e) e/(|a_i||e|^3))] + 2*lambda*(e - e_init)
Embedding eapt_gradient(const Embedding& e, std::span<const Embedding> aug_embeddings,
                        const Embedding& e_init, double drift_weight);

// Supplies the augmentation embeddings for a given step (1-based).
using AugEmbeddingProvider = std::function<std::vector<Embedding>(int step)>;

// Plain gradient descent from e_init. The per-step record holds the loss at
// the pre-step iterate under that step's views, and the trace has exactly
// `steps` entries.
std::pair<Embedding, OptimTrace> optimize_embedding(const Embedding& e_init,
                                                    const AugEmbeddingProvider& views,
                                                    const EaptConfig& cfg);

// Full optimization path: embed the prompt, then descend against fresh
// augmentations of the image drawn per step from cfg.seed.
std::pair<Embedding, OptimTrace> optimize_suffix_embedding(const Image& image,
                                                           const std::string& prompt,
                                                           const DualEncoder& enc,
                                                           const EaptConfig& cfg);

// Projects the optimized embedding and returns its k nearest vocabulary
// tokens by cosine, descending.
std::vector<std::string> generate_suffix(const Embedding& e_opt, const Projector& projector,
                                         const Vocabulary& vocab, int k_suffix);

// composed = base + " " + tokens joined by single spaces; empty suffix
// leaves the prompt unchanged.
RobustPrompt compose_prompt(const std::string& prompt, const std::vector<std::string>& suffix);

// CSV rows: step,consistency,drift,total,grad_norm
void write_trace_csv(std::ostream& out, const OptimTrace& trace);

}  // namespace advdef
