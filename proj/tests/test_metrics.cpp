#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tdti/error.hpp"
#include "tdti/metrics.hpp"

using namespace tdti;
using namespace tdti::metrics;
namespace tt = tdti::testing;

namespace {

// Every vector of length n over `grid`.
template <typename T>
std::vector<std::vector<T>> all_vectors(const std::vector<T>& grid, std::size_t n) {
    std::vector<std::vector<T>> out{{}};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<T>> next;
        for (const auto& v : out) {
            for (const T& g : grid) {
                auto w = v;
                w.push_back(g);
                next.push_back(std::move(w));
            }
        }
        out = std::move(next);
    }
    return out;
}

bool two_classes(const std::vector<int>& y) {
    int s = 0;
    for (int v : y) s += v;
    return s > 0 && s < static_cast<int>(y.size());
}

bool varies(const std::vector<double>& x) {
    return std::any_of(x.begin(), x.end(), [&](double v) { return v != x.front(); });
}

}  // namespace

TEST_CASE("aupr examples", "[metrics]") {
    const std::vector<double> s{0.9, 0.8, 0.7};
    CHECK(aupr(s, std::vector<int>{1, 1, 0}) == 1.0);
    CHECK(std::abs(aupr(s, std::vector<int>{1, 0, 1}) - (0.5 + 2.0 / 3.0 * 0.5)) < 1e-12);
    CHECK_THROWS_AS(aupr(s, std::vector<int>{1, 1, 1}), Error);
    CHECK_THROWS_AS(aupr(s, std::vector<int>{0, 0, 0}), Error);

    // Ties resolve by id, not by input order.
    std::vector<ScoredLabel> items{{0.5, 0, "b"}, {0.5, 1, "a"}};
    CHECK(aupr(items) == 1.0);
    items = {{0.5, 1, "b"}, {0.5, 0, "a"}};
    CHECK(aupr(items) == 0.5);
}

TEST_CASE("random scores give aupr near the positive rate", "[metrics]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u;
    for (double rho : {0.1, 0.3, 0.5}) {
        std::vector<double> s(10000);
        std::vector<int> y(10000);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = u(rng);
            y[i] = u(rng) < rho;
        }
        CHECK(std::abs(aupr(s, y) - rho) < 0.03);
    }
}

TEST_CASE("f1, pcc and rmse examples", "[metrics]") {
    const std::vector<int> y{1, 0, 1, 0};
    CHECK(f1(std::vector<double>{0.9, 0.1, 0.8, 0.2}, y) == 1.0);
    CHECK(f1(std::vector<double>{0.1, 0.1, 0.2, 0.2}, y) == 0.0);
    const Counts c{2, 1, 0, 1};
    CHECK(std::abs(f1_from_counts(c) - 2.0 / 3.0) < 1e-12);
    CHECK(confusion_counts(std::vector<double>{0.5}, std::vector<int>{1}).tp == 1);

    const std::vector<double> x{1, 2, 3, 4.5};
    std::vector<double> lin, neg;
    for (double v : x) {
        lin.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    CHECK(std::abs(pcc(x, lin) - 1.0) < 1e-12);
    CHECK(std::abs(pcc(x, neg) + 1.0) < 1e-12);
    const std::vector<double> z{0, 0}, o{1, 1};
    CHECK(rmse(z, o) == 1.0);
    try {
        pcc(z, o);
        FAIL("zero variance accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
    CHECK_THROWS_AS(pcc(std::vector<double>{1}, std::vector<double>{2}), Error);

    Eigen::RowVectorXd a(3), b(3);
    a << 1, 2, 4;
    b << 2, 4, 8;
    CHECK(std::abs(pcc(a, b) - 1.0) < 1e-12);
    CHECK(std::abs(rmse(a, b) - std::sqrt(21.0 / 3.0)) < 1e-12);
}

TEST_CASE("exhaustive oracle comparison on inputs of size <= 6", "[metrics][oracle]") {
    const std::vector<double> score_grid{0.0, 0.5, 1.0};
    const std::vector<double> prob_grid{0.2, 0.5, 0.7};
    const std::vector<double> value_grid{-1.0, 0.0, 2.5};
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        const auto labelings = all_vectors<int>({0, 1}, n);
        const auto scorings = all_vectors(score_grid, n);
        const auto probs = all_vectors(prob_grid, n);
        for (const auto& y : labelings) {
            for (const auto& s : scorings) {
                if (two_classes(y)) {
                    ++cases;
                    if (std::abs(aupr(s, y) - tt::brute_aupr(s, y)) > 1e-9) FAIL("aupr mismatch");
                }
            }
            for (const auto& p : probs) {
                if (std::abs(f1(p, y) - tt::brute_f1(p, y)) > 1e-9) FAIL("f1 mismatch");
                const double v = f1(p, y);
                if (v < 0 || v > 1) FAIL("f1 out of range");
            }
        }
        if (n < 2) continue;
        const auto values = all_vectors(value_grid, n);
        for (const auto& a : values) {
            for (const auto& b : values) {
                if (std::abs(rmse(a, b) - tt::brute_rmse(a, b)) > 1e-9) FAIL("rmse mismatch");
                if (varies(a) && varies(b) && std::abs(pcc(a, b) - tt::brute_pcc(a, b)) > 1e-9) FAIL("pcc mismatch");
            }
        }
    }
    CHECK(cases > 40000);
}

TEST_CASE("random size-100 oracle comparison", "[metrics][oracle]") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> s(100), p(100), a(100), b(100);
        std::vector<int> y(100);
        for (std::size_t i = 0; i < 100; ++i) {
            s[i] = std::round(g(rng) * 4) / 4;  // coarse grid forces ties
            p[i] = u(rng);
            a[i] = g(rng);
            b[i] = a[i] + g(rng);
            y[i] = u(rng) < 0.4;
        }
        if (!two_classes(y)) y[0] = 1 - y[0];
        CHECK(std::abs(aupr(s, y) - tt::brute_aupr(s, y)) < 1e-9);
        CHECK(std::abs(f1(p, y) - tt::brute_f1(p, y)) < 1e-9);
        CHECK(std::abs(pcc(a, b) - tt::brute_pcc(a, b)) < 1e-9);
        CHECK(std::abs(rmse(a, b) - tt::brute_rmse(a, b)) < 1e-9);
    }
}

TEST_CASE("metric invariances", "[metrics]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> s(40), t(40), a(40), b(40), a2(40), b2(40);
        std::vector<int> y(40);
        for (std::size_t i = 0; i < 40; ++i) {
            s[i] = g(rng);
            t[i] = std::exp(3 * s[i]) - 7;  // strictly increasing
            y[i] = g(rng) > 0;
            a[i] = g(rng);
            b[i] = g(rng);
            a2[i] = 3 * a[i] - 2;
            b2[i] = 0.5 * b[i] + 10;
        }
        if (!two_classes(y)) y[0] = 1 - y[0];
        CHECK(aupr(s, y) == Catch::Approx(aupr(t, y)).margin(1e-12));
        CHECK(aupr(s, y) <= 1.0);
        CHECK(pcc(a, b) == Catch::Approx(pcc(a2, b2)).margin(1e-12));
        std::vector<double> ac = a, bc = b;
        for (std::size_t i = 0; i < 40; ++i) {
            ac[i] += 4.25;
            bc[i] += 4.25;
        }
        CHECK(rmse(ac, bc) == Catch::Approx(rmse(a, b)).margin(1e-12));

        std::vector<double> perfect(40);
        for (std::size_t i = 0; i < 40; ++i) perfect[i] = y[i] + 0.01 * g(rng);
        CHECK(aupr(perfect, y) == 1.0);
    }
}

TEST_CASE("confusion confidence summary", "[metrics]") {
    const std::vector<double> p{0.9, 0.2, 0.8, 0.3, 0.6, 0.4};
    const std::vector<int> y{1, 0, 1, 0, 0, 1};
    const std::vector<double> c{0.1, 0.2, 0.3, 0.4, 0.8, 0.6};
    const ConfusionSummary s = confusion_confidence(p, y, c);
    CHECK(s.total() == 6);
    CHECK(s.tp.count == 2);
    CHECK(s.tn.count == 2);
    CHECK(s.fp.count == 1);
    CHECK(s.fn.count == 1);
    CHECK(*s.tp.mean == Catch::Approx(0.2));
    CHECK(*s.tp.median == Catch::Approx(0.2));
    CHECK(*s.tp.q25 == Catch::Approx(0.15));
    CHECK(*s.mean_correct() == Catch::Approx(0.25));
    CHECK(*s.mean_incorrect() == Catch::Approx(0.7));

    const ConfusionSummary all = confusion_confidence(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0},
                                                      std::vector<double>{0.5, 0.5});
    CHECK(all.fp.count == 0);
    CHECK(all.fn.count == 0);
    CHECK_FALSE(all.fp.mean.has_value());
    CHECK_FALSE(all.mean_incorrect().has_value());
    const auto j = to_json(s);
    CHECK(j["TP"]["count"] == 2);
}
