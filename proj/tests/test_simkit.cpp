#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "homsim/simkit.hpp"

using namespace homsim;

namespace {

struct Moments {
    double mean_a = 0, mean_b = 0, mean_c = 0;
    double var_a = 0, var_b = 0, var_c = 0;
};

template <class Kernel>
Moments draw_moments(const CampaignSetup& setup, const DwellConditions& at, int n, std::uint64_t seed, Kernel kernel)
{
    std::mt19937_64 rng(seed);
    double sa = 0, sb = 0, sc = 0, qa = 0, qb = 0, qc = 0;
    for (int i = 0; i < n; ++i) {
        const auto c = kernel(setup, at, rng);
        sa += c.singles_a;
        sb += c.singles_b;
        sc += c.coincidences;
        qa += double(c.singles_a) * c.singles_a;
        qb += double(c.singles_b) * c.singles_b;
        qc += double(c.coincidences) * c.coincidences;
    }
    Moments m;
    m.mean_a = sa / n;
    m.mean_b = sb / n;
    m.mean_c = sc / n;
    m.var_a = qa / n - m.mean_a * m.mean_a;
    m.var_b = qb / n - m.mean_b * m.mean_b;
    m.var_c = qc / n - m.mean_c * m.mean_c;
    return m;
}

// Counts are Poisson (thinned Poisson), so the standard error of a mean over n
// dwells is sqrt(mean / n).
void check_within(double sample_mean, double expected, int n, double sigmas)
{
    const double se = std::sqrt(std::max(expected, 1e-12) / n);
    CHECK(std::abs(sample_mean - expected) <= sigmas * se);
}

CampaignSetup quiet_setup()
{
    CampaignSetup s;
    s.source.drift = 0.0;
    s.source.fringes.visibility = 0.0;
    s.det_a.background_rate = 0.0;
    s.det_b.background_rate = 0.0;
    return s;
}

}  // namespace

TEST_CASE("simulate_dwell: blind detectors and no background give zero counts")
{
    auto s = quiet_setup();
    s.det_a.eta = 0.0;
    s.det_b.eta = 0.0;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto c = simulate_dwell(s, {0.0, 1.0, 1.0}, rng);
        CHECK(c.singles_a == 0);
        CHECK(c.singles_b == 0);
        CHECK(c.coincidences == 0);
    }
}

TEST_CASE("simulate_dwell: perfect interference and efficiency give a coincidence null")
{
    auto s = quiet_setup();
    s.overlap.v_max = 1.0;
    s.det_a.eta = 1.0;
    s.det_b.eta = 1.0;
    s.source.pair_rate = 5000.0;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto c = simulate_dwell(s, {s.overlap.tau0_fs, 1.0, 1.0}, rng);
        CHECK(c.coincidences == 0);
        CHECK(c.singles_a + c.singles_b > 0);
    }
}

TEST_CASE("simulate_dwell: reported operating point means within 3 sigma")
{
    // Singles ~13600/s and ~13800/s, coincidences ~510/s, backgrounds 1415/s and 2006/s.
    auto s = quiet_setup();
    s.source.pair_rate = 147000.0;
    s.det_a = {"Alice", 0.0846, 1415.0};
    s.det_b = {"Bob", 0.0819, 2006.0};
    const DwellConditions far{200.0, 1.0, 1.0};

    const double pa = s.det_a.eta - s.det_a.eta * s.det_a.eta / 4.0;
    const double pb = s.det_b.eta - s.det_b.eta * s.det_b.eta / 4.0;
    const double exp_a = s.source.pair_rate * pa + 1415.0;
    const double exp_b = s.source.pair_rate * pb + 2006.0;
    const double exp_c = s.source.pair_rate * s.det_a.eta * s.det_b.eta / 2.0;
    CHECK(exp_a == doctest::Approx(13600).epsilon(0.01));
    CHECK(exp_b == doctest::Approx(13800).epsilon(0.01));
    CHECK(exp_c == doctest::Approx(510).epsilon(0.01));

    const int n = 1000;
    const auto m = draw_moments(s, far, n, 2024, simulate_dwell);
    check_within(m.mean_a, exp_a, n, 3.0);
    check_within(m.mean_b, exp_b, n, 3.0);
    check_within(m.mean_c, exp_c, n, 3.0);
}

TEST_CASE("simulate_dwell: sample means match analytic expectation across delays")
{
    CampaignSetup s;
    s.source.pair_rate = 20000.0;
    s.source.fringes.visibility = 0.05;
    s.det_a = {"Alice", 0.3, 150.0};
    s.det_b = {"Bob", 0.2, 90.0};
    s.overlap.v_max = 0.8;
    const int n = 10000;
    std::uint64_t seed = 1;
    for (double tau : {-30.0, -5.0, 0.0, 1.3, 8.5, 40.0}) {
        const DwellConditions at{tau, 0.5, 0.93};
        const auto e = expected_dwell(s, at);
        const auto m = draw_moments(s, at, n, seed++, simulate_dwell);
        check_within(m.mean_a, e.singles_a, n, 4.0);
        check_within(m.mean_b, e.singles_b, n, 4.0);
        check_within(m.mean_c, e.coincidences, n, 4.0);
    }
}

TEST_CASE("simulate_dwell matches the per-pair reference kernel in distribution")
{
    CampaignSetup s;
    s.source.pair_rate = 2000.0;
    s.source.fringes.visibility = 0.0;
    s.det_a = {"Alice", 0.35, 20.0};
    s.det_b = {"Bob", 0.25, 10.0};
    s.overlap.v_max = 0.9;
    const DwellConditions at{1.0, 1.0, 1.0};
    const int n = 4000;
    const auto fast = draw_moments(s, at, n, 5, simulate_dwell);
    const auto slow = draw_moments(s, at, n, 6, simulate_dwell_per_pair);

    auto close = [n](double a, double b, double var) { CHECK(std::abs(a - b) <= 4.0 * std::sqrt(2.0 * var / n)); };
    close(fast.mean_a, slow.mean_a, fast.var_a);
    close(fast.mean_b, slow.mean_b, fast.var_b);
    close(fast.mean_c, slow.mean_c, fast.var_c);
    // Thinned Poisson counts: variance equals mean.
    CHECK(fast.var_a == doctest::Approx(fast.mean_a).epsilon(0.1));
    CHECK(slow.var_a == doctest::Approx(slow.mean_a).epsilon(0.1));
    CHECK(fast.var_c == doctest::Approx(fast.mean_c).epsilon(0.1));
}

TEST_CASE("simulate_dwell: with no pairs, singles are background Poisson and coincidences vanish")
{
    CampaignSetup s;
    s.source.pair_rate = 0.0;
    s.det_a.background_rate = 300.0;
    s.det_b.background_rate = 50.0;
    const int n = 5000;
    const auto m = draw_moments(s, {0.0, 1.0, 1.0}, n, 9, simulate_dwell);
    CHECK(m.mean_c == 0.0);
    check_within(m.mean_a, 300.0, n, 4.0);
    check_within(m.mean_b, 50.0, n, 4.0);
    CHECK(m.var_a == doctest::Approx(300.0).epsilon(0.1));
}

TEST_CASE("simulate_dwell: accidentals raise coincidences but respect the singles bound")
{
    CampaignSetup s;
    s.source.accidentals = {true, 1e-6};
    s.source.fringes.visibility = 0.0;
    const DwellConditions at{200.0, 1.0, 1.0};
    const auto e = expected_dwell(s, at);
    CampaignSetup off = s;
    off.source.accidentals.enabled = false;
    const auto e_off = expected_dwell(off, at);
    CHECK(e.coincidences - e_off.coincidences == doctest::Approx(e.singles_a * e.singles_b * 1e-6));
    const int n = 2000;
    const auto m = draw_moments(s, at, n, 4, simulate_dwell);
    check_within(m.mean_c, e.coincidences, n, 4.0);
}

TEST_CASE("run_campaign: alternating scan directions")
{
    CampaignSetup s;
    s.plan.n_points = 280;
    s.plan.n_scans = 2;
    const auto records = run_campaign(s, SeedPolicy{1});
    REQUIRE(records.size() == 560);
    for (int j = 1; j < 280; ++j) {
        CHECK(records[j].delay_fs > records[j - 1].delay_fs);
        CHECK(records[280 + j].delay_fs < records[280 + j - 1].delay_fs);
    }
    CHECK(records[0].direction == 1);
    CHECK(records[280].direction == -1);
    CHECK(records[0].delay_fs == records[559].delay_fs);

    s.plan.alternate_directions = false;
    const auto same = run_campaign(s, SeedPolicy{1});
    CHECK(same[280].delay_fs == same[0].delay_fs);
}

TEST_CASE("run_campaign: coincidences never exceed singles")
{
    CampaignSetup s;
    s.plan.n_scans = 3;
    s.source.accidentals = {true, 2e-5};
    for (const auto& r : run_campaign(s, SeedPolicy{77})) {
        CHECK(r.coincidences <= std::min(r.singles_a, r.singles_b));
        CHECK(r.coincidences >= 0);
    }
}

TEST_CASE("drift: 10% loss of pair flux over 15 hours")
{
    SourceParams src;
    CHECK(src.drift_factor(0.0) == 1.0);
    CHECK(src.drift_factor(15 * 3600.0) == doctest::Approx(0.90));

    auto s = quiet_setup();
    s.source.drift = 0.10;
    s.overlap.v_max = 0.0;
    s.plan.n_points = 2;
    s.plan.dwell_s = 27000.0;
    s.plan.n_scans = 1;
    const auto e = expected_campaign(s);
    // Dwell midpoints at 3.75 h and 11.25 h.
    CHECK(e[1].singles_a / e[0].singles_a == doctest::Approx(src.drift_factor(40500.0) / src.drift_factor(13500.0)));
    const DwellConditions start{0.0, 1.0, src.drift_factor(0.0)};
    const DwellConditions end{0.0, 1.0, src.drift_factor(54000.0)};
    CHECK(expected_dwell(s, end).singles_a / expected_dwell(s, start).singles_a == doctest::Approx(0.90));
}

TEST_CASE("run_campaign: deterministic across runs and thread counts")
{
    CampaignSetup s;
    s.plan.n_scans = 6;
    const auto serial = run_campaign(s, SeedPolicy{42}, Execution::Serial);
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
#endif
    const auto parallel = run_campaign(s, SeedPolicy{42}, Execution::Parallel);
#ifdef _OPENMP
    omp_set_num_threads(saved);
#endif
    CHECK(serial == parallel);
    CHECK(serial == run_campaign(s, SeedPolicy{42}, Execution::Serial));
    CHECK_FALSE(serial == run_campaign(s, SeedPolicy{43}, Execution::Serial));
}

TEST_CASE("SeedPolicy: substreams differ per cell and per master seed")
{
    const SeedPolicy a{1};
    CHECK(a.substream_seed(0, 0) != a.substream_seed(0, 1));
    CHECK(a.substream_seed(0, 1) != a.substream_seed(1, 0));
    CHECK(a.substream_seed(3, 4) != SeedPolicy{2}.substream_seed(3, 4));
    CHECK(a.substream_seed(3, 4) == SeedPolicy{1}.substream_seed(3, 4));
}

TEST_CASE("apply_nd_filter")
{
    const DetectorParams d{"Bob", 0.10, 2000.0};
    CHECK(apply_nd_filter({"Alice", 0.084, 0.0}, 1.0).eta == 0.084);
    CHECK(apply_nd_filter(d, 0.27).eta == doctest::Approx(0.027));
    CHECK(apply_nd_filter(d, 0.57).eta == doctest::Approx(0.057));
    CHECK(apply_nd_filter(d, 0.57).background_rate == doctest::Approx(1140.0));
    CHECK_THROWS_AS(apply_nd_filter(d, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(apply_nd_filter(d, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(apply_nd_filter(d, 1.5), std::invalid_argument);
}

TEST_CASE("validation rejects bad plans and sources")
{
    CampaignSetup s;
    s.plan.n_points = 1;
    CHECK_THROWS_AS(run_campaign(s, SeedPolicy{}), std::invalid_argument);
    s = {};
    s.source.drift = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.plan.dwell_s = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.plan.n_scans = 0;
    CHECK(run_campaign(s, SeedPolicy{}).empty());
}

TEST_CASE("simulate_calibration: totals near expectation")
{
    CampaignSetup s;
    CalibrationPlan plan;
    const auto c = simulate_calibration(s, plan, Detector::A, SeedPolicy{5});
    const double eta_herald = s.det_b.eta * plan.iris_transmission;
    const double exp_c = s.source.pair_rate * s.det_a.eta * eta_herald / 2.0 * plan.duration_s;
    const double exp_s = (s.source.pair_rate * (eta_herald - eta_herald * eta_herald / 4.0) + s.det_b.background_rate) * plan.duration_s;
    CHECK(std::abs(c.coincidences - exp_c) < 4.0 * std::sqrt(exp_c));
    CHECK(std::abs(c.herald_singles - exp_s) < 4.0 * std::sqrt(exp_s));
    const double exp_bg = s.det_b.background_rate * plan.background_duration_s;
    CHECK(std::abs(c.herald_background - exp_bg) < 4.0 * std::sqrt(exp_bg));
}
