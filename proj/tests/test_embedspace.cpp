#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "advdef/embedspace.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace advdef;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "advdef_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// fixed-output encoder for constructed-geometry cases
class StubEncoder final : public DualEncoder {
public:
    StubEncoder(Embedding img, Embedding txt) : img_(std::move(img)), txt_(std::move(txt)) {}
    Embedding encode_image(const Image&) const override { return img_; }
    Embedding encode_text(const std::string&) const override { return txt_; }
    Eigen::Index dim() const override { return img_.size(); }

private:
    Embedding img_, txt_;
};

// 256 distinct tokens, one per feature bin, probed deterministically
std::vector<std::string> tokens_for_all_bins() {
    std::vector<std::string> by_bin(ToyDualEncoder::kFeatureBins);
    int found = 0;
    for (int i = 0; found < ToyDualEncoder::kFeatureBins; ++i) {
        const std::string t = "t" + std::to_string(i);
        const auto bin = static_cast<std::size_t>(fnv1a64(t) % ToyDualEncoder::kFeatureBins);
        if (by_bin[bin].empty()) {
            by_bin[bin] = t;
            ++found;
        }
    }
    return by_bin;
}

}  // namespace

TEST_CASE("cosine identities") {
    Embedding v(3);
    v << 1.0, -2.0, 0.5;
    CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-14));

    Embedding ex(2), ey(2);
    ex << 1.0, 0.0;
    ey << 0.0, 1.0;
    CHECK(cosine(ex, ey) == 0.0);

    Embedding a(2), b(2);
    a << 1.0, 1.0;
    b << 1.0, 0.0;
    CHECK(cosine(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

    const Embedding zero = Embedding::Zero(3);
    CHECK_THROWS_AS(cosine(zero, v), InvalidInput);
    CHECK_THROWS_AS(cosine(v, zero), InvalidInput);
}

TEST_CASE("cosine is symmetric, scale-invariant and bounded") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const Embedding a = testsup::random_unit(16, rng) * rng.uniform(0.1, 5.0);
        const Embedding b = testsup::random_unit(16, rng) * rng.uniform(0.1, 5.0);
        const double ab = cosine(a, b);
        CHECK(ab == cosine(b, a));
        CHECK(cosine((3.7 * a).eval(), b) == doctest::Approx(ab).epsilon(1e-12));
        CHECK(ab >= -1.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("toy encoders are deterministic per seed") {
    const ToyDualEncoder enc_a(123), enc_b(123), enc_c(456);
    const Image img = testsup::random_image(32, 32, 3, 9);
    CHECK(enc_a.encode_image(img) == enc_b.encode_image(img));
    CHECK(enc_a.encode_text("turn left now") == enc_b.encode_text("turn left now"));
    CHECK(enc_a.encode_image(img) != enc_c.encode_image(img));

    const Embedding e = enc_a.encode_image(img);
    CHECK(e.size() == ToyDualEncoder::kLatentDim);
    CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("semantic verification: constructed alignment scores one") {
    // image cells and prompt token bins realize the same feature pattern,
    // so both encoders see identical 256-bin vectors
    const ToyDualEncoder enc;
    const auto bin_tokens = tokens_for_all_bins();

    Rng rng(7);
    std::string prompt;
    Image img(224, 224, 1, 0.0f);
    for (int bin = 0; bin < ToyDualEncoder::kFeatureBins; ++bin) {
        if (!rng.bernoulli(0.35)) continue;
        if (!prompt.empty()) prompt += ' ';
        prompt += bin_tokens[static_cast<std::size_t>(bin)];
        const int cy = bin / 16, cx = bin % 16;
        img.planes[0].block(cy * 14, cx * 14, 14, 14).setConstant(1.0f);
    }
    REQUIRE(!prompt.empty());
    CHECK(semantic_verification(img, prompt, enc) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("semantic verification: constructed orthogonality scores zero") {
    Embedding ei(4), et(4);
    ei << 1.0, 0.0, 0.0, 0.0;
    et << 0.0, 0.0, 2.0, 0.0;
    const StubEncoder enc(ei, et);
    const Image img = testsup::random_image(16, 16, 1, 3);
    CHECK(semantic_verification(img, "anything", enc) == 0.0);
}

TEST_CASE("semantic verification equals the cosine of separate encodings") {
    const ToyDualEncoder enc;
    const Image img = testsup::random_image(48, 64, 3, 12);
    const std::string prompt = "is the lane clear ahead";
    const double direct = semantic_verification(img, prompt, enc);
    CHECK(direct == cosine(enc.encode_image(img), enc.encode_text(prompt)));
}

TEST_CASE("projector identities and the naive matvec oracle") {
    const Projector id = Projector::identity(4);
    Embedding e(4);
    e << 0.5, -1.0, 2.0, 0.25;
    CHECK(project(e, id) == e);

    Projector constant;
    constant.weight = Eigen::MatrixXd::Zero(4, 4);
    constant.bias = Eigen::VectorXd::Constant(4, 3.5);
    CHECK(project(e, constant) == constant.bias);

    Rng rng(10);
    Projector random;
    random.weight.resize(4, 4);
    random.bias.resize(4);
    for (int r = 0; r < 4; ++r) {
        random.bias(r) = rng.normal();
        for (int c = 0; c < 4; ++c) random.weight(r, c) = rng.normal();
    }
    const Embedding got = project(e, random);
    const Embedding want = oracle::matvec(random.weight, e, random.bias);
    CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-12);

    Embedding wrong(3);
    wrong << 1, 2, 3;
    CHECK_THROWS_AS(project(wrong, random), InvalidInput);
}

TEST_CASE("projection is affine") {
    Rng rng(11);
    Projector p;
    p.weight.resize(5, 5);
    p.bias.resize(5);
    for (int r = 0; r < 5; ++r) {
        p.bias(r) = rng.normal();
        for (int c = 0; c < 5; ++c) p.weight(r, c) = rng.normal();
    }
    const Embedding a = testsup::random_unit(5, rng);
    const Embedding b = testsup::random_unit(5, rng);
    const Embedding lhs = project(a + b, p);
    const Embedding rhs = project(a, p) + project(b, p) - p.bias;
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("projector file round trip and parse failures") {
    const auto path = temp_file("proj.txt");
    {
        std::ofstream out(path);
        out << "2 3\n1 0 0.5\n0 -1 2\n0.25 0.75\n";
    }
    const Projector p = Projector::load(path);
    CHECK(p.out_dim() == 2);
    CHECK(p.in_dim() == 3);
    CHECK(p.weight(0, 2) == 0.5);
    CHECK(p.bias(1) == 0.75);

    const auto bad = temp_file("proj_bad.txt");
    {
        std::ofstream out(bad);
        out << "2 3\n1 0 0.5\n0 -1\n";
    }
    CHECK_THROWS_AS(Projector::load(bad), ParseError);
    CHECK_THROWS_AS(Projector::load(temp_file("proj_missing.txt")), ParseError);
}

TEST_CASE("nn search worked cases") {
    std::vector<std::string> tokens{"A", "B"};
    Eigen::MatrixXd emb(2, 2);
    emb << 1.0, 0.0, 0.0, 1.0;  // A=[1,0], B=[0,1]
    const Vocabulary vocab(tokens, emb);

    Embedding q(2);
    q << 0.9, 0.1;
    const auto top = nn_search(q, vocab, 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0].token == "A");

    const auto all = nn_search(q, vocab, 2);
    CHECK(all[0].token == "A");
    CHECK(all[1].token == "B");

    Embedding exact(2);
    exact << 0.0, 1.0;
    const auto hit = nn_search(exact, vocab, 1);
    CHECK(hit[0].token == "B");
    CHECK(hit[0].similarity == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(nn_search(q, vocab, 3), InvalidInput);
    CHECK_THROWS_AS(nn_search(q, vocab, 0), InvalidInput);
}

TEST_CASE("nn search over the synthetic vocabulary matches the full sort") {
    const Vocabulary vocab = Vocabulary::synthetic(60, 8, 4242);
    Rng rng(5);
    const Embedding q = testsup::random_unit(8, rng);
    const auto got = nn_search(q, vocab, vocab.size());
    const auto want = oracle::nn_full_sort(q, vocab);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].token == want[i].first);
        CHECK(got[i].similarity == doctest::Approx(want[i].second).epsilon(1e-12));
    }
    // descending similarity
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].similarity >= got[i].similarity);
}

TEST_CASE("nn search argmax is invariant under positive query scaling") {
    const Vocabulary vocab = Vocabulary::synthetic(100, 16, 999);
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Embedding q = testsup::random_unit(16, rng);
        const auto a = nn_search(q, vocab, 1);
        const auto b = nn_search((q * rng.uniform(0.1, 20.0)).eval(), vocab, 1);
        CHECK(a[0].token == b[0].token);
    }
}

TEST_CASE("synthetic vocabulary has unique tokens and unit embeddings") {
    const Vocabulary vocab = Vocabulary::synthetic(1000);
    CHECK(vocab.size() == 1000);
    CHECK(vocab.dim() == ToyDualEncoder::kLatentDim);
    std::set<std::string> seen;
    for (int i = 0; i < vocab.size(); ++i) {
        seen.insert(vocab.token(i));
        CHECK(vocab.embeddings().col(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(seen.size() == 1000);

    // deterministic rebuild
    const Vocabulary again = Vocabulary::synthetic(1000);
    CHECK(again.token(123) == vocab.token(123));
    CHECK(again.embeddings() == vocab.embeddings());
}

TEST_CASE("vocabulary file round trip and parse failures") {
    const Vocabulary vocab = Vocabulary::synthetic(20, 6, 31);
    const auto path = temp_file("vocab.tsv");
    vocab.save(path);
    const Vocabulary loaded = Vocabulary::load(path);
    CHECK(loaded.size() == vocab.size());
    CHECK(loaded.dim() == vocab.dim());
    for (int i = 0; i < vocab.size(); ++i) CHECK(loaded.token(i) == vocab.token(i));
    CHECK(loaded.embeddings() == vocab.embeddings());

    const auto bad = temp_file("vocab_bad.tsv");
    {
        std::ofstream out(bad);
        out << "tok\t1.0,2.0\nother\t1.0\n";  // inconsistent dimension
    }
    CHECK_THROWS_AS(Vocabulary::load(bad), ParseError);

    const auto dup = temp_file("vocab_dup.tsv");
    {
        std::ofstream out(dup);
        out << "tok\t1.0,2.0\ntok\t0.0,1.0\n";
    }
    CHECK_THROWS_AS(Vocabulary::load(dup), InvalidInput);

    CHECK_THROWS_AS(Vocabulary::load(temp_file("vocab_missing.tsv")), ParseError);
}
