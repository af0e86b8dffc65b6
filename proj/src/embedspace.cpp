#include "advdef/embedspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "advdef/types.hpp"

namespace advdef {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ToyDualEncoder::ToyDualEncoder(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0));
    projection_.resize(kLatentDim, kFeatureBins);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kFeatureBins));
    for (int r = 0; r < kLatentDim; ++r)
        for (int c = 0; c < kFeatureBins; ++c) projection_(r, c) = scale * rng.normal();
}

Embedding ToyDualEncoder::embed_features(const Eigen::VectorXd& features) const {
    if (features.size() != kFeatureBins)
        throw InvalidInput("ToyDualEncoder: feature vector must have 256 entries");
    // Mean-centering keeps unrelated feature patterns near zero cosine in
    // the latent space; without it every non-negative histogram pair would
    // score highly similar.
    Eigen::VectorXd centered = features.array() - features.mean();
    if (centered.norm() < 1e-12) centered = features;
    if (centered.norm() < 1e-12) centered = Eigen::VectorXd::Ones(kFeatureBins);
    Embedding e = projection_ * centered;
    const double n = e.norm();
    if (n < 1e-300) throw InvalidInput("ToyDualEncoder: degenerate embedding");
    return e / n;
}

Embedding ToyDualEncoder::encode_image(const Image& img) const {
    img.validate();
    const Plane small = resize_area(img.to_gray(), kPatchSide, kPatchSide);
    Eigen::VectorXd features(kFeatureBins);
    for (int y = 0; y < kPatchSide; ++y)
        for (int x = 0; x < kPatchSide; ++x)
            features(y * kPatchSide + x) = static_cast<double>(small(y, x));
    return embed_features(features);
}

Embedding ToyDualEncoder::encode_text(const std::string& text) const {
    Eigen::VectorXd features = Eigen::VectorXd::Zero(kFeatureBins);
    std::istringstream in(text);
    std::string token;
    bool any = false;
    while (in >> token) {
        features(static_cast<Eigen::Index>(fnv1a64(token) % kFeatureBins)) += 1.0;
        any = true;
    }
    if (!any) features(0) = 1.0;
    return embed_features(features);
}

Projector Projector::identity(Eigen::Index dim) {
    if (dim < 2) throw InvalidInput("Projector: dimension must be >= 2");
    Projector p;
    p.weight = Eigen::MatrixXd::Identity(dim, dim);
    p.bias = Eigen::VectorXd::Zero(dim);
    return p;
}

void Projector::validate() const {
    if (weight.rows() < 1 || weight.cols() < 1 || bias.size() != weight.rows())
        throw InvalidInput("Projector: inconsistent shapes");
    if (!weight.allFinite() || !bias.allFinite())
        throw InvalidInput("Projector: entries must be finite");
}

Projector Projector::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open projector: " + path.string());
    Eigen::Index d_out = 0, d_in = 0;
    if (!(in >> d_out >> d_in) || d_out < 1 || d_in < 1)
        throw ParseError("projector: bad header in " + path.string());
    Projector p;
    p.weight.resize(d_out, d_in);
    p.bias.resize(d_out);
    for (Eigen::Index r = 0; r < d_out; ++r)
        for (Eigen::Index c = 0; c < d_in; ++c)
            if (!(in >> p.weight(r, c)))
                throw ParseError("projector: truncated weight matrix in " + path.string());
    for (Eigen::Index r = 0; r < d_out; ++r)
        if (!(in >> p.bias(r))) throw ParseError("projector: truncated bias in " + path.string());
    p.validate();
    return p;
}

Embedding project(const Embedding& e, const Projector& p) {
    p.validate();
    if (e.size() != p.in_dim()) throw InvalidInput("project: dimension mismatch");
    return p.weight * e + p.bias;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, Eigen::MatrixXd embeddings)
    : tokens_(std::move(tokens)), embeddings_(std::move(embeddings)) {
    if (tokens_.empty() || embeddings_.cols() != static_cast<Eigen::Index>(tokens_.size()))
        throw InvalidInput("Vocabulary: token/embedding count mismatch");
    if (embeddings_.rows() < 2) throw InvalidInput("Vocabulary: dimension must be >= 2");
    if (!embeddings_.allFinite()) throw InvalidInput("Vocabulary: embeddings must be finite");
    norms_ = embeddings_.colwise().norm();
    if ((norms_.array() == 0.0).any()) throw InvalidInput("Vocabulary: zero embedding");
    std::vector<std::string> sorted = tokens_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidInput("Vocabulary: duplicate token");
}

Vocabulary Vocabulary::synthetic(int count, Eigen::Index dim, std::uint64_t seed) {
    if (count < 1) throw InvalidInput("Vocabulary::synthetic: count must be >= 1");
    Rng rng(mix_seed(seed, 1));
    static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m",
                                              "n", "p", "r", "s", "t", "v", "z"};
    static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        std::string t;
        const int syllables = 2 + static_cast<int>(rng.uniform_index(2));
        for (int s = 0; s < syllables; ++s) {
            t += kOnsets[rng.uniform_index(std::size(kOnsets))];
            t += kVowels[rng.uniform_index(std::size(kVowels))];
        }
        t += std::to_string(i);  // guarantees uniqueness
        tokens.push_back(std::move(t));
    }
    Eigen::MatrixXd emb(dim, count);
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd v(dim);
        for (Eigen::Index r = 0; r < dim; ++r) v(r) = rng.normal();
        emb.col(i) = v / v.norm();
    }
    return Vocabulary(std::move(tokens), std::move(emb));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    std::vector<Eigen::VectorXd> rows;
    std::string line;
    Eigen::Index dim = -1;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw ParseError("vocabulary: missing token<TAB>values at line " +
                             std::to_string(lineno));
        tokens.push_back(line.substr(0, tab));
        std::vector<double> vals;
        std::stringstream ss(line.substr(tab + 1));
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t pos = 0;
                vals.push_back(std::stod(field, &pos));
                while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos])))
                    ++pos;
                if (pos != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw ParseError("vocabulary: bad value at line " + std::to_string(lineno));
            }
        }
        if (dim < 0) dim = static_cast<Eigen::Index>(vals.size());
        if (dim != static_cast<Eigen::Index>(vals.size()) || dim < 2)
            throw ParseError("vocabulary: inconsistent dimension at line " +
                             std::to_string(lineno));
        rows.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), dim));
    }
    if (tokens.empty()) throw ParseError("vocabulary: empty file " + path.string());
    Eigen::MatrixXd emb(dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) emb.col(static_cast<Eigen::Index>(i)) = rows[i];
    return Vocabulary(std::move(tokens), std::move(emb));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write vocabulary: " + path.string());
    char buf[64];
    for (int i = 0; i < size(); ++i) {
        out << tokens_[static_cast<std::size_t>(i)] << '\t';
        for (Eigen::Index r = 0; r < dim(); ++r) {
            std::snprintf(buf, sizeof(buf), "%.17g", embeddings_(r, i));
            out << buf << (r + 1 < dim() ? "," : "");
        }
        out << '\n';
    }
}

std::vector<ScoredToken> nn_search(const Embedding& e, const Vocabulary& vocab, int k) {
    if (k < 1) throw InvalidInput("nn_search: k must be >= 1");
    if (k > vocab.size()) throw InvalidInput("nn_search: k exceeds vocabulary size");
    const double en = e.norm();
    if (en == 0.0) throw InvalidInput("nn_search: zero query");
    if (e.size() != vocab.dim()) throw InvalidInput("nn_search: dimension mismatch");

    const Eigen::VectorXd dots = vocab.embeddings().transpose() * e;
    std::vector<int> order(static_cast<std::size_t>(vocab.size()));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sims(order.size());
    for (int i = 0; i < vocab.size(); ++i)
        sims[static_cast<std::size_t>(i)] =
            std::clamp(dots(i) / (en * vocab.embeddings().col(i).norm()), -1.0, 1.0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (sims[static_cast<std::size_t>(a)] != sims[static_cast<std::size_t>(b)])
            return sims[static_cast<std::size_t>(a)] > sims[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::vector<ScoredToken> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        out.push_back({vocab.token(order[static_cast<std::size_t>(i)]),
                       sims[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]});
    return out;
}

double semantic_verification(const Image& image, const std::string& prompt,
                             const DualEncoder& enc) {
    const Embedding ei = enc.encode_image(image);
    const Embedding et = enc.encode_text(prompt);
    return cosine(ei, et);
}

}  // namespace advdef
