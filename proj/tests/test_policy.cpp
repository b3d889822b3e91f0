#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "banditaudit/normal.hpp"
#include "banditaudit/policy.hpp"
#include "banditaudit/rng.hpp"

using namespace banditaudit;

TEST_CASE("clip_probability examples", "[policy]") {
    CHECK(clip_probability(0.5) == Catch::Approx(0.2));
    CHECK(clip_probability(1.0) == Catch::Approx(0.8));
    CHECK(clip_probability(0.6875) == Catch::Approx(0.5));
    CHECK(clip_probability(0.0) == Catch::Approx(0.2));
    CHECK_THROWS_AS(clip_probability(-0.1), data_error);
    CHECK_THROWS_AS(clip_probability(1.1), data_error);
}

TEST_CASE("clip_probability is monotone, bounded and 1.6-Lipschitz", "[policy]") {
    double prev = clip_probability(0.0);
    for (int i = 1; i <= 1000; ++i) {
        const double p = i / 1000.0;
        const double c = clip_probability(p);
        CHECK(c >= 0.2);
        CHECK(c <= 0.8);
        CHECK(c >= prev);
        CHECK(c - prev <= 1.6 * 0.001 + 1e-12);
        prev = c;
    }
}

TEST_CASE("action_probability wraps the normal CDF in the clip", "[policy]") {
    CHECK(action_probability(0.0) == Catch::Approx(0.2));
    // Phi(delta) = 0.6875 is the inflection where the clip reaches 0.5.
    const double dstar = normal_quantile(0.6875);
    CHECK(action_probability(dstar) == Catch::Approx(0.5).margin(1e-12));
    CHECK(action_probability(50.0) == Catch::Approx(0.8));
    CHECK(action_probability(-50.0) == Catch::Approx(0.2));
    CHECK_THROWS_AS(action_probability(std::numeric_limits<double>::quiet_NaN()),
                    numeric_error);
}

TEST_CASE("eta_evaluate modes", "[policy]") {
    ThresholdPolicy pol;
    pol.constant = 0.3;
    CHECK(eta_evaluate(pol, 5.0) == Catch::Approx(0.3));
    pol.custom = [](double dosage) { return dosage; };
    CHECK(eta_evaluate(pol, 1.9) == Catch::Approx(1.9));
}

TEST_CASE("standardized_advantage pins its formula", "[policy]") {
    Vec mu = (Vec(5) << 1, 0, 0, 0, 0).finished();
    Mat sigma = Mat::Identity(5, 5);
    Vec f = (Vec(5) << 1, 0, 0, 0, 0).finished();
    // (f mu - eta) / sqrt(f Sigma f) = (1 - 0.3) / 1
    CHECK(standardized_advantage(mu, sigma, f, 0.3) == Catch::Approx(0.7));
    sigma(0, 0) = 4.0;
    CHECK(standardized_advantage(mu, sigma, f, 0.0) == Catch::Approx(0.5));
}

TEST_CASE("standardized_advantage is scale invariant", "[policy]") {
    RngStream rng = make_stream(3, StreamPurpose::scratch, 0, 0);
    for (int rep = 0; rep < 100; ++rep) {
        Vec mu(5), f(5);
        for (int i = 0; i < 5; ++i) {
            mu[i] = rng.normal();
            f[i] = rng.normal();
        }
        Mat a(5, 5);
        for (int i = 0; i < 25; ++i) a(i / 5, i % 5) = rng.normal();
        Mat sigma = a * a.transpose() + 0.5 * Mat::Identity(5, 5);
        const double eta = rng.normal();
        const double base = standardized_advantage(mu, sigma, f, eta);
        const double c = 0.1 + 5.0 * rng.uniform01();
        const double scaled =
            standardized_advantage(c * mu, c * c * sigma, f, c * eta);
        CHECK(scaled == Catch::Approx(base).margin(1e-12));
    }
}

TEST_CASE("degenerate advantage variance is rejected", "[policy]") {
    Vec mu = Vec::Zero(5);
    Mat sigma = Mat::Zero(5, 5);
    Vec f = (Vec(5) << 1, 0, 0, 0, 0).finished();
    CHECK_THROWS_AS(standardized_advantage(mu, sigma, f, 0.0), numeric_error);
}

TEST_CASE("sample_action consumes exactly one draw and matches bernoulli",
          "[policy]") {
    RngStream a = make_stream(4, StreamPurpose::scratch, 1, 2);
    RngStream b = make_stream(4, StreamPurpose::scratch, 1, 2);
    for (int i = 0; i < 100; ++i) {
        const double p = (i % 10) / 10.0 + 0.05;
        const int act = sample_action(p, a);
        const int ref = b.bernoulli(p) ? 1 : 0;
        CHECK(act == ref);
    }
    CHECK(a.next_u64() == b.next_u64());
}
