#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "homsim/analysis.hpp"
#include "synthetic.hpp"

using namespace homsim;
using homsim::testing::DipTruth;

namespace {

void check_recovered(const FitResult& fit, const DipTruth& t, double rel)
{
    auto close = [rel](double got, double want, double scale) { CHECK(std::abs(got - want) <= rel * scale); };
    close(fit.params.c0, t.c0, std::abs(t.c0));
    close(fit.params.c1, t.c1, std::max(std::abs(t.c1), std::abs(t.c0) / 100.0));
    close(fit.params.amplitude, t.amplitude, std::abs(t.amplitude));
    close(fit.params.center_fs, t.center, t.width);
    close(fit.params.width_fs, t.width, t.width);
}

}  // namespace

TEST_CASE("fit_gaussian_line: noiseless parameter recovery")
{
    const DipTruth truth{1000.0, 0.0, -400.0, 0.0, 8.5};
    const auto fit = fit_gaussian_line(testing::noiseless(truth));
    CHECK(fit.converged);
    check_recovered(fit, truth, 1e-6);
    CHECK(fit.chi2 < 1e-10);
    CHECK(fit.visibility == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(fit.dof == 275);
}

TEST_CASE("fit_gaussian_line: noiseless recovery with slope, offset centre and shallow dip")
{
    const DipTruth cases[] = {
        {340000.0, -25.0, -2600.0, 4.0, 8.5},   // singles-like 0.8% dip on a drifting baseline
        {13000.0, 3.0, -5100.0, -7.5, 6.0},     // coincidence-like
        {500.0, 0.0, 250.0, 10.0, 12.0},        // peak instead of dip
    };
    for (const auto& t : cases) {
        const auto fit = fit_gaussian_line(testing::noiseless(t));
        CHECK(fit.converged);
        check_recovered(fit, t, 1e-6);
        CHECK(fit.visibility == doctest::Approx(t.visibility()).epsilon(1e-6));
    }
}

TEST_CASE("fit_gaussian_line: model with pair averaging recovers the underlying dip")
{
    const DipTruth t{20000.0, 0.0, -8000.0, 0.0, 8.5};
    auto raw = testing::noiseless(t);
    const auto averaged = remove_fringes(raw, 2.67);
    CHECK(averaged.pair_offset_fs == doctest::Approx(1.335).epsilon(1e-9));
    const auto fit = fit_gaussian_line(averaged);
    check_recovered(fit, t, 1e-6);

    // A plain Gaussian fit of the averaged series sees a broader, shallower dip.
    auto plain = averaged;
    plain.pair_offset_fs = 0.0;
    const auto naive = fit_gaussian_line(plain);
    CHECK(naive.visibility < t.visibility());
    CHECK(naive.params.width_fs > t.width);
}

TEST_CASE("fit_gaussian_line: visibility error from covariance is calibrated")
{
    const DipTruth truth{40000.0, 0.0, -400.0, 0.0, 8.5};
    std::mt19937_64 rng(2718);
    int covered = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i) {
        const auto fit = fit_gaussian_line(testing::poisson_noisy(truth, rng));
        if (std::abs(fit.visibility - truth.visibility()) <= fit.visibility_error) ++covered;
    }
    const double coverage = double(covered) / trials;
    CHECK(coverage == doctest::Approx(0.6827).epsilon(0.12));
}

TEST_CASE("fit_gaussian_line: error stays calibrated on pair-averaged series")
{
    const DipTruth truth{40000.0, 0.0, -400.0, 0.0, 8.5};
    std::mt19937_64 rng(3141);
    int covered = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i) {
        const auto fit = fit_gaussian_line(remove_fringes(testing::poisson_noisy(truth, rng), 2.67));
        if (std::abs(fit.visibility - truth.visibility()) <= fit.visibility_error) ++covered;
    }
    CHECK(double(covered) / trials == doctest::Approx(0.6827).epsilon(0.12));
}

TEST_CASE("fit_gaussian_line: degenerate inputs")
{
    CHECK_THROWS_AS(fit_gaussian_line(testing::noiseless(DipTruth{}, 8)), FitError);

    auto flat = testing::noiseless(DipTruth{1000.0, 0.0, 0.0, 0.0, 8.5});
    CHECK_THROWS_AS(fit_gaussian_line(flat), FitError);

    auto bad = testing::noiseless(DipTruth{});
    bad.counts.pop_back();
    CHECK_THROWS_AS(fit_gaussian_line(bad), std::invalid_argument);
}

TEST_CASE("fit_gaussian_line: iteration cap reports non-convergence")
{
    const DipTruth truth{1000.0, 0.0, -400.0, 20.0, 8.5};
    FitOptions opts;
    opts.max_iterations = 1;
    const auto fit = fit_gaussian_line(testing::noiseless(truth), opts);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 1);
}

TEST_CASE("initial_guess follows the deterministic recipe")
{
    const DipTruth truth{1000.0, 0.0, -400.0, 12.0, 8.5};
    const auto s = testing::noiseless(truth);
    const auto p = initial_guess(s);
    CHECK(p.c0 == doctest::Approx(1000.0).epsilon(1e-3));
    CHECK(p.c1 == 0.0);
    CHECK(std::abs(p.center_fs - 12.0) < 1.0);
    CHECK(p.amplitude < -350.0);
    CHECK(p.width_fs == doctest::Approx(124.155 / 10.0));
}

TEST_CASE("FitResult helpers")
{
    const auto fit = fit_gaussian_line(testing::noiseless(DipTruth{}));
    CHECK(fit.fwhm_fs() == doctest::Approx(8.5 * 2.0 * std::sqrt(2.0 * std::numbers::ln2)).epsilon(1e-6));
    CHECK(fit.evaluate(0.0) == doctest::Approx(600.0).epsilon(1e-8));
    for (int i = 0; i < kFitParams; ++i) CHECK(fit.error(i) >= 0.0);
}

TEST_CASE("residual_fringe_visibility measures an injected fringe")
{
    const DipTruth truth{100000.0, 0.0, -30000.0, 0.0, 8.5};
    auto s = testing::noiseless(truth);
    const auto clean_fit = fit_gaussian_line(s);
    CHECK(residual_fringe_visibility(s, clean_fit, 2.67) < 1e-9);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s.counts[i] = truth.c0 * (1.0 + 0.01 * std::cos(2.0 * std::numbers::pi * s.delay_fs[i] / 2.67)) +
                      (truth.at(s.delay_fs[i]) - truth.c0);
    }
    const auto fit = fit_gaussian_line(s);
    double level = 0.0;
    for (double t : s.delay_fs) level += truth.at(t);
    level /= static_cast<double>(s.size());
    CHECK(residual_fringe_visibility(s, fit, 2.67) == doctest::Approx(0.01 * truth.c0 / level).epsilon(0.03));
}
