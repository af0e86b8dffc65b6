#include "advdef/eapt.hpp"

#include <cmath>
#include <cstdio>

namespace advdef {

void EaptConfig::validate() const {
    if (steps < 1) throw InvalidInput("EaptConfig: steps must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidInput("EaptConfig: learning_rate must be positive");
    if (drift_weight < 0.0) throw InvalidInput("EaptConfig: drift_weight must be >= 0");
    if (n_aug < 1) throw InvalidInput("EaptConfig: n_aug must be >= 1");
    if (k_suffix < 1) throw InvalidInput("EaptConfig: k_suffix must be >= 1");
    if (!(tau_sem > -1.0 && tau_sem < 1.0)) throw InvalidInput("EaptConfig: tau_sem out of range");
}

Image augment(const Image& image, std::uint64_t seed, std::uint64_t index) {
    image.validate();
    Rng rng(mix_seed(seed, index));

    const double area_scale = rng.uniform(0.8, 1.0);
    const double side = std::sqrt(area_scale);
    const int ch = std::max(1, static_cast<int>(std::lround(image.height * side)));
    const int cw = std::max(1, static_cast<int>(std::lround(image.width * side)));
    const int top = ch < image.height
                        ? static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(image.height - ch + 1)))
                        : 0;
    const int left = cw < image.width
                         ? static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(image.width - cw + 1)))
                         : 0;
    Image out = crop(image, top, left, std::min(ch, image.height), std::min(cw, image.width));
    out = resize_bilinear(out, image.height, image.width);

    if (rng.bernoulli(0.5)) out = flip_horizontal(out);

    for (Plane& p : out.planes)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                p(y, x) += static_cast<float>(0.01 * rng.normal());
    clamp_pixels(out);
    return out;
}

double consistency_loss(const Embedding& e, std::span<const Embedding> aug_embeddings) {
    if (aug_embeddings.empty()) throw InvalidInput("consistency_loss: no augmentation embeddings");
    double acc = 0.0;
    for (const Embedding& a : aug_embeddings) acc += 1.0 - cosine(a, e);
    return acc / static_cast<double>(aug_embeddings.size());
}

double drift_loss(const Embedding& e, const Embedding& e_init) {
    if (e.size() != e_init.size()) throw InvalidInput("drift_loss: dimension mismatch");
    return (e - e_init).squaredNorm();
}

double eapt_loss(const Embedding& e, std::span<const Embedding> aug_embeddings,
                 const Embedding& e_init, double drift_weight) {
    return consistency_loss(e, aug_embeddings) + drift_weight * drift_loss(e, e_init);
}

Embedding eapt_gradient(const Embedding& e, std::span<const Embedding> aug_embeddings,
                        const Embedding& e_init, double drift_weight) {
    if (aug_embeddings.empty()) throw InvalidInput("eapt_gradient: no augmentation embeddings");
    if (e.size() != e_init.size()) throw InvalidInput("eapt_gradient: dimension mismatch");
    const double en = e.norm();
    if (en == 0.0) throw InvalidInput("eapt_gradient: zero embedding");

    Embedding grad = Embedding::Zero(e.size());
    for (const Embedding& a : aug_embeddings) {
        if (a.size() != e.size()) throw InvalidInput("eapt_gradient: dimension mismatch");
        const double an = a.norm();
        if (an == 0.0) throw InvalidInput("eapt_gradient: zero augmentation embedding");
        grad -= a / (an * en) - (a.dot(e) / (an * en * en * en)) * e;
    }
    grad /= static_cast<double>(aug_embeddings.size());
    grad += 2.0 * drift_weight * (e - e_init);
    if (!grad.allFinite()) throw InvalidInput("eapt_gradient: non-finite gradient");
    return grad;
}

std::pair<Embedding, OptimTrace> optimize_embedding(const Embedding& e_init,
                                                    const AugEmbeddingProvider& views,
                                                    const EaptConfig& cfg) {
    cfg.validate();
    if (e_init.size() < 2) throw InvalidInput("optimize_embedding: bad initial embedding");

    Embedding e = e_init;
    OptimTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 1; step <= cfg.steps; ++step) {
        const std::vector<Embedding> augs = views(step);
        OptimStep rec;
        rec.consistency = consistency_loss(e, augs);
        rec.drift = drift_loss(e, e_init);
        rec.total = rec.consistency + cfg.drift_weight * rec.drift;
        const Embedding grad = eapt_gradient(e, augs, e_init, cfg.drift_weight);
        rec.grad_norm = grad.norm();
        trace.steps.push_back(rec);
        e -= cfg.learning_rate * grad;
    }
    trace.final_embedding = e;
    return {std::move(e), std::move(trace)};
}

std::pair<Embedding, OptimTrace> optimize_suffix_embedding(const Image& image,
                                                           const std::string& prompt,
                                                           const DualEncoder& enc,
                                                           const EaptConfig& cfg) {
    cfg.validate();
    const Embedding e_init = enc.encode_text(prompt);
    const auto views = [&](int step) {
        std::vector<Embedding> augs;
        augs.reserve(static_cast<std::size_t>(cfg.n_aug));
        for (int j = 0; j < cfg.n_aug; ++j) {
            const std::uint64_t index =
                static_cast<std::uint64_t>(step - 1) * static_cast<std::uint64_t>(cfg.n_aug) +
                static_cast<std::uint64_t>(j);
            augs.push_back(enc.encode_image(augment(image, cfg.seed, index)));
        }
        return augs;
    };
    return optimize_embedding(e_init, views, cfg);
}

std::vector<std::string> generate_suffix(const Embedding& e_opt, const Projector& projector,
                                         const Vocabulary& vocab, int k_suffix) {
    const Embedding projected = project(e_opt, projector);
    if (projected.size() != vocab.dim())
        throw InvalidInput("generate_suffix: projector/vocabulary dimension mismatch");
    std::vector<ScoredToken> hits = nn_search(projected, vocab, k_suffix);
    std::vector<std::string> tokens;
    tokens.reserve(hits.size());
    for (ScoredToken& h : hits) tokens.push_back(std::move(h.token));
    return tokens;
}

RobustPrompt compose_prompt(const std::string& prompt, const std::vector<std::string>& suffix) {
    RobustPrompt out;
    out.base = prompt;
    out.suffix = suffix;
    out.composed = prompt;
    for (const std::string& token : suffix) {
        out.composed += ' ';
        out.composed += token;
    }
    return out;
}

void write_trace_csv(std::ostream& out, const OptimTrace& trace) {
    out << "step,consistency,drift,total,grad_norm\n";
    char buf[160];
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const OptimStep& s = trace.steps[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 1, s.consistency,
                      s.drift, s.total, s.grad_norm);
        out << buf;
    }
}

}  // namespace advdef
