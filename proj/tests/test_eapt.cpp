#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "advdef/eapt.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace advdef;

TEST_CASE("augment is a pure function of (image, seed, index)") {
    const Image img = testsup::random_image(64, 64, 3, 17);
    const Image a = augment(img, 42, 7);
    const Image b = augment(img, 42, 7);
    CHECK(max_abs_diff(a, b) == 0.0f);
    a.validate();
}

TEST_CASE("augment with a differing index changes the output") {
    const Image img = testsup::random_image(64, 64, 3, 18);
    const Image base = augment(img, 1, 0);
    int distinct = 0;
    for (std::uint64_t index = 1; index <= 100; ++index)
        if (max_abs_diff(base, augment(img, 1, index)) > 0.0f) ++distinct;
    CHECK(distinct == 100);
}

TEST_CASE("augmenting a constant image only adds bounded noise") {
    const Image img(64, 64, 3, 0.5f);
    for (std::uint64_t index = 0; index < 10; ++index) {
        const Image out = augment(img, 9, index);
        out.validate();
        // crop/resize/flip of a constant stay constant; noise is sigma=0.01
        CHECK(max_abs_diff(out, img) < 0.08f);
    }
}

TEST_CASE("consistency loss worked cases") {
    Embedding e(2);
    e << 1.0, 0.0;
    Embedding par(2), orth(2);
    par << 2.0, 0.0;
    orth << 0.0, 3.0;

    std::vector<Embedding> parallel{par, par};
    CHECK(consistency_loss(e, parallel) == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<Embedding> orthogonal{orth};
    CHECK(consistency_loss(e, orthogonal) == doctest::Approx(1.0));

    std::vector<Embedding> mixed{par, orth};
    CHECK(consistency_loss(e, mixed) == doctest::Approx(0.5));

    CHECK_THROWS_AS(consistency_loss(e, std::span<const Embedding>{}), InvalidInput);
}

TEST_CASE("drift loss worked cases and the summation oracle") {
    Embedding a(2), b(2);
    a << 3.0, 4.0;
    b << 0.0, 0.0;
    CHECK(drift_loss(a, a) == 0.0);
    CHECK(drift_loss(a, b) == 25.0);

    Rng rng(21);
    const Embedding x = testsup::random_unit(64, rng) * 2.0;
    const Embedding y = testsup::random_unit(64, rng);
    double naive = 0.0;
    for (Eigen::Index i = 0; i < 64; ++i) naive += (x(i) - y(i)) * (x(i) - y(i));
    CHECK(drift_loss(x, y) == doctest::Approx(naive).epsilon(1e-12));

    Embedding wrong(3);
    wrong << 1, 2, 3;
    CHECK_THROWS_AS(drift_loss(a, wrong), InvalidInput);
}

TEST_CASE("gradient vanishes at the anchored stationary point") {
    Rng rng(22);
    const Embedding e = testsup::random_unit(8, rng);
    std::vector<Embedding> augs{e * 2.0, e * 0.5};  // parallel views
    const Embedding g = eapt_gradient(e, augs, e, 0.1);
    CHECK(g.norm() < 1e-12);
}

TEST_CASE("gradient against a single orthogonal view is minus its direction") {
    Embedding e(4), a(4);
    e << 1.0, 0.0, 0.0, 0.0;
    a << 0.0, 2.0, 0.0, 0.0;
    const Embedding g = eapt_gradient(e, std::vector<Embedding>{a}, e, 0.0);
    Embedding want(4);
    want << 0.0, -1.0, 0.0, 0.0;  // -a/|a|
    CHECK((g - want).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index dim = trial % 2 == 0 ? 8 : 4;
        const double lambda = (trial % 3 == 0) ? 0.0 : (trial % 3 == 1 ? 0.1 : 1.0);
        const Embedding e_init = testsup::random_unit(dim, rng);
        Embedding e = e_init + 0.3 * testsup::random_unit(dim, rng);
        std::vector<Embedding> augs;
        for (int j = 0; j < 3; ++j) augs.push_back(testsup::random_unit(dim, rng));

        const Embedding analytic = eapt_gradient(e, augs, e_init, lambda);
        const Embedding numeric = oracle::finite_difference(
            [&](const Eigen::VectorXd& x) { return eapt_loss(x, augs, e_init, lambda); }, e);
        const double rel = (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
        CHECK(rel <= 1e-4);
    }
    Embedding zero = Embedding::Zero(4);
    Embedding anchor(4);
    anchor << 1, 0, 0, 0;
    CHECK_THROWS_AS(
        eapt_gradient(zero, std::vector<Embedding>{anchor}, anchor, 0.1), InvalidInput);
}

TEST_CASE("optimization is stationary when views align with the anchor") {
    EaptConfig cfg;
    cfg.steps = 1;
    cfg.drift_weight = 0.0;
    Rng rng(24);
    const Embedding e_init = testsup::random_unit(16, rng);
    const auto views = [&](int) { return std::vector<Embedding>{e_init * 3.0}; };
    const auto [e_opt, trace] = optimize_embedding(e_init, views, cfg);
    CHECK((e_opt - e_init).norm() < 1e-12);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].grad_norm < 1e-12);
}

TEST_CASE("loss is non-increasing with fixed views at stock settings") {
    const EaptConfig cfg;  // steps=3, lr=5e-3, drift=0.1
    for (const auto& fixture : testsup::make_descent_fixtures(20)) {
        const auto views = [&](int) { return fixture.augs; };
        const auto [e_opt, trace] = optimize_embedding(fixture.e_init, views, cfg);
        REQUIRE(trace.steps.size() == 3);
        for (std::size_t i = 1; i < trace.steps.size(); ++i)
            CHECK(trace.steps[i].total <= trace.steps[i - 1].total);
        const double final_total = eapt_loss(e_opt, fixture.augs, fixture.e_init, cfg.drift_weight);
        CHECK(final_total <= trace.steps.back().total);
    }
}

TEST_CASE("stronger anchoring shrinks the final drift") {
    EaptConfig cfg;
    const auto fixtures = testsup::make_descent_fixtures(5);
    for (const auto& fixture : fixtures) {
        const auto views = [&](int) { return fixture.augs; };
        double prev_drift = std::numeric_limits<double>::infinity();
        for (const double lambda : {0.0, 0.1, 1.0, 10.0}) {
            cfg.drift_weight = lambda;
            const auto [e_opt, trace] = optimize_embedding(fixture.e_init, views, cfg);
            const double drift = drift_loss(e_opt, fixture.e_init);
            CHECK(drift <= prev_drift + 1e-15);
            prev_drift = drift;
        }
    }
}

TEST_CASE("full optimization path is deterministic under a fixed seed") {
    const Image img = testsup::random_image(64, 64, 3, 25);
    const ToyDualEncoder enc;
    EaptConfig cfg;
    cfg.seed = 77;
    const auto [e1, t1] = optimize_suffix_embedding(img, "keep in lane", enc, cfg);
    const auto [e2, t2] = optimize_suffix_embedding(img, "keep in lane", enc, cfg);
    CHECK(e1 == e2);
    REQUIRE(t1.steps.size() == t2.steps.size());
    for (std::size_t i = 0; i < t1.steps.size(); ++i) {
        CHECK(t1.steps[i].total == t2.steps[i].total);
        CHECK(t1.steps[i].grad_norm == t2.steps[i].grad_norm);
    }
    CHECK(t1.final_embedding == e1);

    cfg.seed = 78;
    const auto [e3, t3] = optimize_suffix_embedding(img, "keep in lane", enc, cfg);
    CHECK(e1 != e3);
}

TEST_CASE("suffix generation worked cases") {
    const Vocabulary vocab = Vocabulary::synthetic(30, 8, 61);
    const Projector id = Projector::identity(8);

    const Embedding target = vocab.embeddings().col(12);
    const auto one = generate_suffix(target, id, vocab, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == vocab.token(12));

    const auto all = generate_suffix(target, id, vocab, vocab.size());
    CHECK(static_cast<int>(all.size()) == vocab.size());
    std::set<std::string> unique(all.begin(), all.end());
    CHECK(static_cast<int>(unique.size()) == vocab.size());

    // full-order agreement with the exhaustive sort
    Rng rng(26);
    const Embedding q = testsup::random_unit(8, rng);
    const auto got = generate_suffix(q, id, vocab, vocab.size());
    const auto want = oracle::nn_full_sort(q, vocab);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i].first);

    // scale invariance of the whole suffix
    const auto scaled = generate_suffix((q * 7.5).eval(), id, vocab, 7);
    const auto plain = generate_suffix(q, id, vocab, 7);
    CHECK(scaled == plain);
}

TEST_CASE("compose prompt joins with single spaces") {
    const RobustPrompt same = compose_prompt("describe the scene", {});
    CHECK(same.composed == "describe the scene");

    const RobustPrompt two = compose_prompt("P", {"a", "b"});
    CHECK(two.composed == "P a b");

    const std::vector<std::string> seven{"s1", "s2", "s3", "s4", "s5", "s6", "s7"};
    const RobustPrompt full = compose_prompt("base prompt", seven);
    CHECK(full.suffix.size() == 7);
    CHECK(full.composed == "base prompt s1 s2 s3 s4 s5 s6 s7");
    CHECK(full.base == "base prompt");
}

TEST_CASE("trace exports as csv") {
    OptimTrace trace;
    trace.steps = {{0.5, 0.0, 0.5, 0.1}, {0.4, 0.01, 0.401, 0.08}};
    std::ostringstream out;
    write_trace_csv(out, trace);
    const std::string text = out.str();
    CHECK(text.find("step,consistency,drift,total,grad_norm\n") == 0);
    CHECK(text.find("\n1,") != std::string::npos);
    CHECK(text.find("\n2,") != std::string::npos);
}

TEST_CASE("config validation rejects bad values") {
    EaptConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = EaptConfig{};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = EaptConfig{};
    cfg.n_aug = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = EaptConfig{};
    cfg.k_suffix = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
