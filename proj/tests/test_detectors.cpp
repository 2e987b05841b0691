#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "homsim/detectors.hpp"

using namespace homsim;

namespace {

// Brute force over all 2^n absorb/miss outcomes of n independent photons.
double enumerate_threshold(int n, double eta)
{
    double p = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        double weight = 1.0;
        for (int k = 0; k < n; ++k) weight *= (mask >> k) & 1u ? eta : 1.0 - eta;
        if (mask != 0) p += weight;
    }
    return p;
}

}  // namespace

TEST_CASE("click_prob: threshold examples")
{
    CHECK(click_prob(ClickModel::Threshold, 2, 1.0) == 1.0);
    CHECK(click_prob(ClickModel::Threshold, 2, 0.084) == doctest::Approx(0.160944).epsilon(1e-9));
    CHECK(click_prob(ClickModel::Threshold, 0, 0.5) == 0.0);
    for (double eta : {0.0, 0.1, 0.5, 0.9, 1.0}) {
        CHECK(click_prob(ClickModel::Threshold, 2, eta) == doctest::Approx(2 * eta - eta * eta).epsilon(1e-15));
    }
}

TEST_CASE("click_prob: threshold equals 2^n enumeration")
{
    for (int n = 0; n <= 6; ++n) {
        for (int i = 0; i <= 10; ++i) {
            const double eta = i / 10.0;
            CHECK(std::abs(click_prob(ClickModel::Threshold, n, eta) - enumerate_threshold(n, eta)) <= 1e-12);
        }
    }
}

TEST_CASE("click_prob: threshold is nondecreasing in n and eta")
{
    for (int n = 0; n < 8; ++n) {
        for (int i = 0; i < 20; ++i) {
            const double eta = i / 20.0;
            CHECK(click_prob(ClickModel::Threshold, n + 1, eta) >= click_prob(ClickModel::Threshold, n, eta));
            CHECK(click_prob(ClickModel::Threshold, n, eta + 0.05) >= click_prob(ClickModel::Threshold, n, eta));
        }
    }
}

TEST_CASE("click_prob: saturation, two photons click less than twice one")
{
    for (int i = 1; i <= 100; ++i) {
        const double eta = i / 100.0;
        CHECK(click_prob(ClickModel::Threshold, 2, eta) < 2.0 * click_prob(ClickModel::Threshold, 1, eta));
    }
}

TEST_CASE("click_prob: linear and Taylor models")
{
    CHECK(click_prob(ClickModel::LinearGlauber, 2, 0.3) == doctest::Approx(0.6));
    CHECK(click_prob(ClickModel::LinearGlauber, 5, 0.3) == 1.0);
    for (int n = 0; n <= 2; ++n) {
        for (double eta : {0.0, 0.084, 0.5, 1.0}) {
            CHECK(click_prob(ClickModel::TaylorOrder2, n, eta) ==
                  doctest::Approx(click_prob(ClickModel::Threshold, n, eta)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(click_prob(ClickModel::TaylorOrder2, 3, 0.5), std::domain_error);
    CHECK_THROWS_AS(click_prob(ClickModel::Threshold, 1, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(click_prob(ClickModel::Threshold, -1, 0.5), std::invalid_argument);
}

TEST_CASE("two_photon_click_prob")
{
    CHECK(two_photon_click_prob(1.0) == 1.0);
    CHECK(two_photon_click_prob(0.0) == 0.0);
    // {miss,hit}^2 at eta = 0.5: three of four equally likely outcomes click.
    CHECK(two_photon_click_prob(0.5) == 0.75);
    for (int i = 0; i <= 10; ++i) {
        const double eta = i / 10.0;
        CHECK(std::abs(two_photon_click_prob(eta) - click_prob(ClickModel::Threshold, 2, eta)) <= 1e-15);
    }
}

TEST_CASE("response_expectation: pair-routing distribution")
{
    const PhotonNumberDistribution routed({0.25, 0.5, 0.25});
    CHECK(response_expectation(ClickModel::Threshold, routed, 1.0) == doctest::Approx(0.75));
    CHECK(routed.mean() == doctest::Approx(1.0));
    CHECK(routed.second_moment() == doctest::Approx(1.5));
    CHECK(response_expectation(ClickModel::TaylorOrder2, routed, 1.0) == doctest::Approx(0.75));

    const PhotonNumberDistribution vacuum({1.0});
    for (auto m : {ClickModel::Threshold, ClickModel::LinearGlauber, ClickModel::TaylorOrder2}) {
        CHECK(response_expectation(m, vacuum, 0.7) == 0.0);
    }
}

TEST_CASE("response_expectation: Taylor form equals threshold on n <= 2")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        double a = u(rng), b = u(rng), c = u(rng);
        const double s = a + b + c;
        const PhotonNumberDistribution d({a / s, b / s, 1.0 - a / s - b / s});
        const double threshold = response_expectation(ClickModel::Threshold, d, 1.0);
        CHECK(std::abs(response_expectation(ClickModel::TaylorOrder2, d, 1.0) - threshold) <= 1e-12);
        CHECK(std::abs(threshold - (1.0 - d.probs()[0])) <= 1e-12);
        // Loss composes before the Taylor functional.
        CHECK(response_expectation(ClickModel::TaylorOrder2, d, 0.3) ==
              doctest::Approx(response_expectation(ClickModel::Threshold, d, 0.3)).epsilon(1e-12));
    }
}

TEST_CASE("PhotonNumberDistribution validation and thinning")
{
    CHECK_THROWS(PhotonNumberDistribution({0.5, 0.4}));
    CHECK_THROWS(PhotonNumberDistribution({1.2, -0.2}));
    CHECK_THROWS(PhotonNumberDistribution(std::vector<double>{}));

    const auto lossy = PhotonNumberDistribution({0.0, 0.0, 1.0}).thinned(0.5);
    CHECK(lossy.probs()[0] == doctest::Approx(0.25));
    CHECK(lossy.probs()[1] == doctest::Approx(0.5));
    CHECK(lossy.probs()[2] == doctest::Approx(0.25));

    const PhotonNumberDistribution wide({0.5, 0.0, 0.0, 0.5});
    CHECK_THROWS_AS(response_expectation(ClickModel::TaylorOrder2, wide, 1.0), std::domain_error);
    CHECK(response_expectation(ClickModel::Threshold, wide, 1.0) == doctest::Approx(0.5));
}
