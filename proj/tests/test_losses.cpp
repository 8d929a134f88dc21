#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tdti/error.hpp"
#include "tdti/losses.hpp"

using namespace tdti;
using namespace tdti::losses;
using tdti::testing::composite_fd;
using tdti::testing::random_batch;
using tdti::testing::tiny_config;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("bce closed forms", "[losses]") {
    CHECK(std::abs(bce_with_logits(0.0, 1) - std::log(2.0)) < 1e-9);
    CHECK(std::abs(bce_with_logits(std::log(3.0), 0) + std::log(0.25)) < 1e-9);
    CHECK(bce_with_logits(50.0, 1) < 1e-20);
    CHECK(bce_with_logits(-50.0, 0) < 1e-20);
    CHECK(std::isfinite(bce_with_logits(800.0, 0)));
    CHECK(std::abs(bce_with_logits(800.0, 0) - 800.0) < 1e-9);
    for (double x = -30; x <= 30; x += 0.37) {
        CHECK(bce_with_logits(x, 1) == Catch::Approx(bce_with_logits(-x, 0)).margin(1e-15));
        CHECK(bce_with_logits(x, 1) >= 0.0);
    }
}

TEST_CASE("cosine contrastive closed forms", "[losses]") {
    const Eigen::VectorXd a = vec({1, 2, -1});
    CHECK(std::abs(contrastive_cosine(a, a, 1, 1.0)) < 1e-9);
    CHECK(std::abs(contrastive_cosine(a, a, 0, 1.0) - 1.0) < 1e-9);
    CHECK(std::abs(contrastive_cosine(vec({1, 0}), vec({0, 1}), 0, 1.0)) < 1e-9);
    CHECK_THROWS_AS(contrastive_cosine(a, Eigen::VectorXd::Zero(3), 1, 1.0), Error);
    CHECK_THROWS_AS(contrastive_cosine(a, a, 1, 0.0), Error);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd x(5), y(5);
        for (int j = 0; j < 5; ++j) {
            x(j) = g(rng);
            y(j) = g(rng);
        }
        for (int label : {0, 1}) {
            const double base = contrastive_cosine(x, y, label, 1.0);
            CHECK(base >= 0.0);
            CHECK(contrastive_cosine(3.7 * x, y, label, 1.0) == Catch::Approx(base).margin(1e-12));
            CHECK(contrastive_cosine(x, 0.01 * y, label, 1.0) == Catch::Approx(base).margin(1e-12));
        }
    }
}

TEST_CASE("triplet closed forms", "[losses]") {
    const double alpha = 0.5;
    CHECK(std::abs(contrastive_triplet(vec({1, 1}), vec({1, 1}), vec({2, 1}), alpha)) < 1e-9);
    CHECK(std::abs(contrastive_triplet(vec({0, 0}), vec({1, 0}), vec({0, 1}), alpha) - alpha) < 1e-9);
    CHECK(std::abs(contrastive_triplet(vec({0, 0}), vec({1, 0}), vec({0, 3}), 1.0)) < 1e-9);
}

TEST_CASE("confidence, reconstruction and mse closed forms", "[losses]") {
    CHECK(std::abs(confidence_loss(0.2, 1, 0.8)) < 1e-9);
    CHECK(std::abs(confidence_loss(0.5, 1, 1.0) - 0.25) < 1e-9);
    CHECK(std::abs(confidence_loss(0.3, 1, 0.8) - 0.01) < 1e-9);

    const model::Vocabulary v16("ABCDEFGHIJKLMNOP");
    REQUIRE(v16.size() == 20);
    const model::TokenSeq t = model::tokenize("ABBA", v16, 10);
    CHECK(std::abs(reconstruction_loss(Eigen::MatrixXd::Zero(10, 20), t) - std::log(20.0)) < 1e-9);
    const model::TokenSeq other = model::tokenize("PONMLK", v16, 10);
    CHECK(std::abs(reconstruction_loss(Eigen::MatrixXd::Constant(10, 20, 3.5), other) - std::log(20.0)) < 1e-9);

    Eigen::MatrixXd favour = Eigen::MatrixXd::Zero(10, 20);
    for (int p = 0; p < 10; ++p) favour(p, t.ids[static_cast<std::size_t>(p)]) = 40.0;
    CHECK(reconstruction_loss(favour, t) < 1e-8);
    favour = Eigen::MatrixXd::Zero(10, 20);
    for (int p = 0; p < 10; ++p) favour(p, t.ids[static_cast<std::size_t>(p)]) = 20.0;
    CHECK(reconstruction_loss(favour, t) < 1e-7);

    // PAD suffix does not change the loss.
    Eigen::MatrixXd logits = Eigen::MatrixXd::Random(10, 20);
    const model::TokenSeq shortseq = model::tokenize("ABBA", v16, 6);
    CHECK(std::abs(reconstruction_loss(logits, t) - reconstruction_loss(logits.topRows(6), shortseq)) < 1e-12);

    model::TokenSeq pad;
    pad.ids.assign(10, model::kPad);
    try {
        reconstruction_loss(logits, pad);
        FAIL("all-PAD accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
    }

    const std::vector<double> p1{1.5, -2.0}, p0{0, 0}, t1{1, 1};
    CHECK(mse_loss(p1, p1) == 0.0);
    CHECK(std::abs(mse_loss(p0, t1) - 1.0) < 1e-9);
    const std::vector<double> two{2}, five{5};
    CHECK(std::abs(mse_loss(two, five) - 9.0) < 1e-9);
}

TEST_CASE("combine", "[losses]") {
    LossBreakdown t;
    t.bce = 1.0;
    t.con = t.conf = t.recon = 0.5;
    CHECK(std::abs(combine(t, {0, 0, 0, 0}, io::TaskMode::Classification).total) < 1e-9);
    CHECK(std::abs(combine(t, {}, io::TaskMode::Classification).total - 0.7) < 1e-9);
    CHECK_THROWS_AS(combine(t, {0.4, -0.2, 0.2, 0.2}, io::TaskMode::Classification), Error);

    // Linear in the weights.
    const model::LossWeights a{0.1, 0.7, 0.3, 0.9}, b{0.5, 0.2, 0.6, 0.05};
    const model::LossWeights ab{a.cls + b.cls, a.con + b.con, a.conf + b.conf, a.recon + b.recon};
    CHECK(combine(t, ab, io::TaskMode::Classification).total ==
          Catch::Approx(combine(t, a, io::TaskMode::Classification).total +
                        combine(t, b, io::TaskMode::Classification).total)
              .margin(1e-12));
}

TEST_CASE("batched forms agree with the closed forms", "[losses]") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const int B = 6, D = 4;
    Eigen::MatrixXd ed(D, B), ep(D, B), en(D, B);
    for (Eigen::Index i = 0; i < ed.size(); ++i) {
        ed(i) = g(rng);
        ep(i) = g(rng);
        en(i) = g(rng);
    }
    nn::Tensor y(1, B), logits(1, B);
    for (int j = 0; j < B; ++j) {
        y(0, j) = j % 3 == 0;
        logits(0, j) = 2 * g(rng);
    }
    nn::Tape t(false);
    double bce = 0, cos = 0, trip = 0;
    int anchors = 0;
    for (int j = 0; j < B; ++j) {
        bce += bce_with_logits(logits(0, j), int(y(0, j))) / B;
        cos += contrastive_cosine(ed.col(j), ep.col(j), int(y(0, j)), 0.8) / B;
        if (y(0, j) == 1) {
            trip += contrastive_triplet(ed.col(j), ep.col(j), en.col(j), 1.0);
            ++anchors;
        }
    }
    CHECK(bce_loss(t.constant(logits), y).value()(0, 0) == Catch::Approx(bce).margin(1e-12));
    CHECK(cosine_contrastive_loss(t.constant(ed), t.constant(ep), y, 0.8).value()(0, 0) ==
          Catch::Approx(cos).margin(1e-12));
    CHECK(triplet_loss(t.constant(ed), t.constant(ep), t.constant(en), y, 1.0).value()(0, 0) ==
          Catch::Approx(trip / anchors).margin(1e-12));
    CHECK(triplet_loss(t.constant(ed), t.constant(ep), t.constant(en), nn::Tensor::Zero(1, B), 1.0).value()(0, 0) ==
          0.0);
}

TEST_CASE("negative permutation never maps a column to itself", "[losses]") {
    for (Eigen::Index n = 2; n < 12; ++n) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto p = negative_permutation(n, s);
            std::vector<bool> seen(static_cast<std::size_t>(n));
            for (Eigen::Index j = 0; j < n; ++j) {
                CHECK(p[static_cast<std::size_t>(j)] != j);
                seen[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] = true;
            }
            CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
        }
    }
    CHECK(negative_permutation(5, 3) == negative_permutation(5, 3));
}

TEST_CASE("composite gradient matches finite differences", "[losses][oracle]") {
    std::mt19937_64 rng(31);
    for (auto variant : {model::ContrastiveVariant::CosineMargin, model::ContrastiveVariant::TripletL2}) {
        model::ModelConfig c = tiny_config();
        c.contrastive = variant;
        model::Model m(c, 5);
        const model::Batch b = random_batch(c, 4, rng);
        const auto r = composite_fd(m, b, 17);
        INFO(model::to_string(variant) << " worst " << r.report.worst_parameter << "[" << r.report.worst_index
                                       << "] " << r.report.max_rel_error);
        CHECK(r.value_gap < 1e-12);
        CHECK(r.report.passed);
    }
    model::ModelConfig c = tiny_config(false);
    c.mode = io::TaskMode::Regression;
    c.weights.con = 0.0;
    model::Model m(c, 6);
    const model::Batch b = random_batch(c, 4, rng);
    const auto r = composite_fd(m, b, 0);
    INFO("regression worst " << r.report.worst_parameter << " " << r.report.max_rel_error);
    CHECK(r.value_gap < 1e-12);
    CHECK(r.report.passed);
}

TEST_CASE("confidence loss never reaches the classifier or encoders", "[losses]") {
    std::mt19937_64 rng(8);
    model::ModelConfig c = tiny_config();
    model::Model m(c, 3);
    for (int rep = 0; rep < 5; ++rep) {
        const model::Batch b = random_batch(c, 5, rng);
        nn::Tape tape;
        const model::ForwardResult f = m.forward(tape, b);
        const nn::Tensor target = nn::Tensor::Random(1, b.size()).cwiseAbs();
        const nn::Gradients g = tape.backward(confidence_loss(f.confidence, target));
        for (auto& p : m.classifier_parameters()) CHECK(g.get_or_zero(p.get()).isZero(0.0));
        for (auto* l : {&m.drug_encoder().first, &m.protein_encoder().second, &m.pocket_encoder().first}) {
            CHECK(g.get_or_zero(l->weight).isZero(0.0));
        }
        bool any = false;
        for (auto& p : m.confidence_parameters()) any = any || !g.get_or_zero(p.get()).isZero(0.0);
        CHECK(any);
    }
}

TEST_CASE("composite breakdown and weights", "[losses]") {
    std::mt19937_64 rng(9);
    model::ModelConfig c = tiny_config();
    model::Model m(c, 2);
    const model::Batch b = random_batch(c, 4, rng);
    nn::Tape t(false);
    const model::ForwardResult f = m.forward(t, b);
    const CompositeLoss L = composite_loss(f, b, c);
    const LossBreakdown& br = L.breakdown;
    CHECK(br.bce >= 0);
    CHECK(br.con >= 0);
    CHECK(br.conf >= 0);
    CHECK(br.recon >= 0);
    CHECK(br.total == Catch::Approx(0.4 * br.bce + 0.2 * br.con + 0.2 * br.conf + 0.2 * br.recon).margin(1e-12));
    CHECK(L.total.value()(0, 0) == Catch::Approx(br.total).margin(1e-12));

    c.weights = {0, 0, 0, 0};
    CHECK(composite_loss(f, b, c).breakdown.total == 0.0);
    c.weights = {0.4, 0.2, -1, 0.2};
    CHECK_THROWS_AS(composite_loss(f, b, c), Error);
}
