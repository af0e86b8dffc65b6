#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "advdef/image.hpp"

namespace advdef {

using Embedding = Eigen::VectorXd;

// Cosine similarity in [-1, 1]; throws on zero vectors.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) throw InvalidInput("cosine: dimension mismatch");
    if (a.size() < 2) throw InvalidInput("cosine: dimension must be >= 2");
    const double na = a.template cast<double>().norm();
    const double nb = b.template cast<double>().norm();
    if (na == 0.0 || nb == 0.0) throw InvalidInput("cosine: zero vector");
    const double v = a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
    return std::clamp(v, -1.0, 1.0);
}

// A frozen image/text encoder pair sharing one latent space.
class DualEncoder {
public:
    virtual ~DualEncoder() = default;
    virtual Embedding encode_image(const Image& img) const = 0;
    virtual Embedding encode_text(const std::string& text) const = 0;
    virtual Eigen::Index dim() const = 0;
};

// Deterministic stand-in for a pretrained dual encoder. Images are
// area-resized to 16x16 grayscale and flattened; text is a hashed
// bag-of-words over 256 bins (FNV-1a token hashing). Both feature vectors
// are mean-centered, pushed through one fixed seeded Gaussian projection to
// d=64 and L2-normalized, so unrelated image/text pairs land near zero
// cosine while matched feature patterns align exactly.
class ToyDualEncoder final : public DualEncoder {
public:
    static constexpr int kFeatureBins = 256;
    static constexpr int kPatchSide = 16;
    static constexpr int kLatentDim = 64;

    explicit ToyDualEncoder(std::uint64_t seed = 0x7065u);

    Embedding encode_image(const Image& img) const override;
    Embedding encode_text(const std::string& text) const override;
    Eigen::Index dim() const override { return kLatentDim; }

    // Projection of a raw 256-bin feature vector; exposed so tests can
    // construct aligned image/text pairs.
    Embedding embed_features(const Eigen::VectorXd& features) const;

private:
    Eigen::MatrixXd projection_;  // kLatentDim x kFeatureBins
};

std::uint64_t fnv1a64(std::string_view s);

// Affine map between latent spaces: W * e + b.
struct Projector {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    static Projector identity(Eigen::Index dim);

    // Format: line 1 "d_out d_in"; d_out rows of d_in floats (W); one final
    // line of d_out floats (b).
    static Projector load(const std::filesystem::path& path);

    void validate() const;
    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

Embedding project(const Embedding& e, const Projector& p);

// Token table with unit-norm latent coordinates, immutable after build.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> tokens, Eigen::MatrixXd embeddings);

    // Deterministic table of `count` pronounceable tokens with seeded random
    // unit embeddings.
    static Vocabulary synthetic(int count = 1000, Eigen::Index dim = ToyDualEncoder::kLatentDim,
                                std::uint64_t seed = 0x70cabu);

    // Format: one entry per line, `token<TAB>v1,v2,...,vd`.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    Eigen::Index dim() const { return embeddings_.rows(); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int i) const { return tokens_[static_cast<std::size_t>(i)]; }
    const Eigen::MatrixXd& embeddings() const { return embeddings_; }

private:
    std::vector<std::string> tokens_;
    Eigen::MatrixXd embeddings_;  // dim x size, one column per token
    Eigen::VectorXd norms_;
};

struct ScoredToken {
    std::string token;
    double similarity = 0.0;
};

// The k vocabulary tokens most cosine-similar to e, in descending
// similarity; ties broken by ascending token index.
std::vector<ScoredToken> nn_search(const Embedding& e, const Vocabulary& vocab, int k);

// Cosine alignment of the encoded image and prompt.
double semantic_verification(const Image& image, const std::string& prompt,
                             const DualEncoder& enc);

}  // namespace advdef
