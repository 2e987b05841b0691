#include "homsim/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace homsim {

namespace {

using Rng = std::mt19937_64;

std::int64_t poisson(double mean, Rng& rng)
{
    if (!(mean > 0.0)) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(rng);
}

std::int64_t binomial(std::int64_t n, double p, Rng& rng)
{
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<std::int64_t>(n, p)(rng);
}

// Probability of drawing the next category given that earlier ones were not
// drawn; clamps rounding so the result stays a probability.
double conditional(double p, double remaining)
{
    if (remaining <= 0.0) return 0.0;
    return std::clamp(p / remaining, 0.0, 1.0);
}

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double mean_pairs(const CampaignSetup& setup, const DwellConditions& at)
{
    return setup.source.pair_rate * at.dwell_s * at.flux_scale * fringe_factor(setup.source.fringes, at.tau_fs);
}

double true_background(const CampaignSetup& setup, const DetectorParams& det)
{
    return det.background_rate * setup.source.hidden_background_factor;
}

DwellCounts add_backgrounds(const CampaignSetup& setup, const DwellConditions& at, DwellCounts c, Rng& rng)
{
    c.singles_a += poisson(true_background(setup, setup.det_a) * at.dwell_s, rng);
    c.singles_b += poisson(true_background(setup, setup.det_b) * at.dwell_s, rng);
    if (setup.source.accidentals.enabled) {
        const auto e = expected_dwell(setup, at);
        const double rate_a = e.singles_a / at.dwell_s;
        const double rate_b = e.singles_b / at.dwell_s;
        c.coincidences += poisson(rate_a * rate_b * setup.source.accidentals.window_s * at.dwell_s, rng);
        c.coincidences = std::min({c.coincidences, c.singles_a, c.singles_b});
    }
    return c;
}

}  // namespace

void SourceParams::validate() const
{
    if (!(pair_rate >= 0.0) || !std::isfinite(pair_rate)) throw std::invalid_argument("source.pair_rate must be >= 0");
    if (!(drift >= 0.0 && drift < 1.0)) throw std::invalid_argument("source.drift must lie in [0, 1)");
    if (!(drift_duration_s > 0.0)) throw std::invalid_argument("source.drift_duration_s must be > 0");
    if (!(hidden_background_factor >= 0.0)) throw std::invalid_argument("source.hidden_background_factor must be >= 0");
    if (accidentals.enabled && !(accidentals.window_s > 0.0)) {
        throw std::invalid_argument("source.accidentals.window_s must be > 0");
    }
    fringes.validate();
}

double SourceParams::drift_factor(double elapsed_s) const
{
    return std::max(0.0, 1.0 - drift * elapsed_s / drift_duration_s);
}

void ScanPlan::validate() const
{
    if (n_points < 2) throw std::invalid_argument("scan.n_points must be >= 2");
    if (!(dwell_s > 0.0)) throw std::invalid_argument("scan.dwell_s must be > 0");
    if (!(delay_max_fs > delay_min_fs)) throw std::invalid_argument("scan.delay_max_fs must exceed scan.delay_min_fs");
    if (n_scans < 0) throw std::invalid_argument("scan.n_scans must be >= 0");
}

int ScanPlan::grid_index(int scan_id, int step) const
{
    return direction(scan_id) > 0 ? step : n_points - 1 - step;
}

std::uint64_t SeedPolicy::substream_seed(std::uint64_t scan_id, std::uint64_t point_index) const
{
    return splitmix64(splitmix64(splitmix64(master_seed) ^ scan_id) ^ point_index);
}

std::mt19937_64 SeedPolicy::substream(std::uint64_t scan_id, std::uint64_t point_index) const
{
    return std::mt19937_64(substream_seed(scan_id, point_index));
}

void CampaignSetup::validate() const
{
    source.validate();
    overlap.validate();
    det_a.validate();
    det_b.validate();
    plan.validate();
}

ExpectedCounts expected_dwell(const CampaignSetup& setup, const DwellConditions& at)
{
    const double pairs = mean_pairs(setup, at);
    const auto rates = predict_rates(overlap_at(setup.overlap, at.tau_fs), setup.det_a.eta, setup.det_b.eta);
    ExpectedCounts e;
    e.singles_a = pairs * rates.singles_a_per_pair + true_background(setup, setup.det_a) * at.dwell_s;
    e.singles_b = pairs * rates.singles_b_per_pair + true_background(setup, setup.det_b) * at.dwell_s;
    e.coincidences = pairs * rates.coincidence_per_pair;
    if (setup.source.accidentals.enabled) {
        e.coincidences += e.singles_a * e.singles_b / at.dwell_s * setup.source.accidentals.window_s;
    }
    return e;
}

DwellCounts simulate_dwell(const CampaignSetup& setup, const DwellConditions& at, Rng& rng)
{
    const double eta_a = setup.det_a.eta;
    const double eta_b = setup.det_b.eta;
    const auto route = routing(overlap_at(setup.overlap, at.tau_fs));

    const std::int64_t pairs = poisson(mean_pairs(setup, at), rng);

    // Multinomial over beamsplitter outputs.
    const std::int64_t both_a = binomial(pairs, route.p_both_a, rng);
    const std::int64_t both_b = binomial(pairs - both_a, conditional(route.p_both_b, 1.0 - route.p_both_a), rng);
    const std::int64_t split = pairs - both_a - both_b;

    // Multinomial over split-pair outcomes: both click, only A, only B, none.
    const double p_ab = eta_a * eta_b;
    const double p_a_only = eta_a * (1.0 - eta_b);
    const double p_b_only = (1.0 - eta_a) * eta_b;
    const std::int64_t ab = binomial(split, p_ab, rng);
    const std::int64_t a_only = binomial(split - ab, conditional(p_a_only, 1.0 - p_ab), rng);
    const std::int64_t b_only = binomial(split - ab - a_only, conditional(p_b_only, 1.0 - p_ab - p_a_only), rng);

    DwellCounts c;
    c.singles_a = binomial(both_a, two_photon_click_prob(eta_a), rng) + ab + a_only;
    c.singles_b = binomial(both_b, two_photon_click_prob(eta_b), rng) + ab + b_only;
    c.coincidences = ab;
    return add_backgrounds(setup, at, c, rng);
}

DwellCounts simulate_dwell_per_pair(const CampaignSetup& setup, const DwellConditions& at, Rng& rng)
{
    const double eta_a = setup.det_a.eta;
    const double eta_b = setup.det_b.eta;
    const auto route = routing(overlap_at(setup.overlap, at.tau_fs));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto absorbed = [&](double eta) { return u(rng) < eta; };

    DwellCounts c;
    const std::int64_t pairs = poisson(mean_pairs(setup, at), rng);
    for (std::int64_t i = 0; i < pairs; ++i) {
        const double r = u(rng);
        if (r < route.p_both_a) {
            const bool first = absorbed(eta_a);
            const bool second = absorbed(eta_a);
            c.singles_a += (first || second) ? 1 : 0;
        } else if (r < route.p_both_a + route.p_split) {
            const bool a = absorbed(eta_a);
            const bool b = absorbed(eta_b);
            c.singles_a += a ? 1 : 0;
            c.singles_b += b ? 1 : 0;
            c.coincidences += (a && b) ? 1 : 0;
        } else {
            const bool first = absorbed(eta_b);
            const bool second = absorbed(eta_b);
            c.singles_b += (first || second) ? 1 : 0;
        }
    }
    return add_backgrounds(setup, at, c, rng);
}

namespace kernels {

namespace {

DwellConditions cell_conditions(const CampaignSetup& setup, int scan_id, int step)
{
    const auto& plan = setup.plan;
    const double elapsed = (static_cast<double>(scan_id) * plan.n_points + step + 0.5) * plan.dwell_s;
    return {plan.delay_at(plan.grid_index(scan_id, step)), plan.dwell_s, setup.source.drift_factor(elapsed)};
}

ScanRecord simulate_cell(const CampaignSetup& setup, const SeedPolicy& seed, std::size_t cell)
{
    const int n = setup.plan.n_points;
    const int scan_id = static_cast<int>(cell / n);
    const int step = static_cast<int>(cell % n);
    const auto at = cell_conditions(setup, scan_id, step);
    auto rng = seed.substream(scan_id, step);
    const auto counts = simulate_dwell(setup, at, rng);
    return {scan_id, setup.plan.direction(scan_id), step, at.tau_fs, at.dwell_s,
            counts.singles_a, counts.singles_b, counts.coincidences};
}

void check_size(const CampaignSetup& setup, std::span<ScanRecord> out)
{
    const auto cells = static_cast<std::size_t>(setup.plan.n_scans) * setup.plan.n_points;
    if (out.size() != cells) throw std::invalid_argument("output span does not match n_scans * n_points");
}

}  // namespace

void simulate_cells_serial(const CampaignSetup& setup, const SeedPolicy& seed, std::span<ScanRecord> out)
{
    check_size(setup, out);
    for (std::size_t cell = 0; cell < out.size(); ++cell) out[cell] = simulate_cell(setup, seed, cell);
}

void simulate_cells_parallel(const CampaignSetup& setup, const SeedPolicy& seed, std::span<ScanRecord> out)
{
    check_size(setup, out);
    const auto cells = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        out[cell] = simulate_cell(setup, seed, static_cast<std::size_t>(cell));
    }
}

}  // namespace kernels

std::vector<ScanRecord> run_campaign(const CampaignSetup& setup, const SeedPolicy& seed, Execution exec)
{
    setup.validate();
    std::vector<ScanRecord> records(static_cast<std::size_t>(setup.plan.n_scans) * setup.plan.n_points);
    if (exec == Execution::Serial) {
        kernels::simulate_cells_serial(setup, seed, records);
    } else {
        kernels::simulate_cells_parallel(setup, seed, records);
    }
    return records;
}

std::vector<ExpectedCounts> expected_campaign(const CampaignSetup& setup)
{
    setup.validate();
    const auto& plan = setup.plan;
    std::vector<ExpectedCounts> out;
    out.reserve(static_cast<std::size_t>(plan.n_scans) * plan.n_points);
    for (int s = 0; s < plan.n_scans; ++s) {
        for (int j = 0; j < plan.n_points; ++j) out.push_back(expected_dwell(setup, kernels::cell_conditions(setup, s, j)));
    }
    return out;
}

DetectorParams apply_nd_filter(const DetectorParams& det, double transmission)
{
    if (!(transmission > 0.0 && transmission <= 1.0)) {
        throw std::invalid_argument("ND transmission must lie in (0, 1], got " + std::to_string(transmission));
    }
    DetectorParams out = det;
    out.eta = det.eta * transmission;
    out.background_rate = det.background_rate * transmission;
    return out;
}

void CalibrationPlan::validate() const
{
    if (!(iris_transmission > 0.0 && iris_transmission <= 1.0)) {
        throw std::invalid_argument("calibration.iris_transmission must lie in (0, 1]");
    }
    if (!(duration_s > 0.0)) throw std::invalid_argument("calibration.duration_s must be > 0");
    if (!(background_duration_s > 0.0)) throw std::invalid_argument("calibration.background_duration_s must be > 0");
}

CalibrationCounts simulate_calibration(const CampaignSetup& setup, const CalibrationPlan& plan, Detector target,
                                       const SeedPolicy& seed)
{
    setup.validate();
    plan.validate();

    // Substream ids well away from campaign scan ids.
    constexpr std::uint64_t kCalibrationStream = 0xCA1B000000000000ULL;
    const std::uint64_t stream = kCalibrationStream + (target == Detector::A ? 0 : 2);

    CampaignSetup closed = setup;
    closed.source.fringes.visibility = 0.0;
    closed.source.accidentals.enabled = false;
    DetectorParams& herald = target == Detector::A ? closed.det_b : closed.det_a;
    herald.eta *= plan.iris_transmission;

    auto rng = seed.substream(stream, 0);
    const auto run = simulate_dwell(closed, {plan.delay_fs, plan.duration_s, 1.0}, rng);

    // Source removed: only the background visible without the crystal.
    auto bg_rng = seed.substream(stream + 1, 0);
    const std::int64_t herald_bg = poisson(herald.background_rate * plan.background_duration_s, bg_rng);

    CalibrationCounts c;
    c.target = target;
    c.coincidences = run.coincidences;
    c.herald_singles = target == Detector::A ? run.singles_b : run.singles_a;
    c.herald_background = herald_bg;
    c.duration_s = plan.duration_s;
    c.background_duration_s = plan.background_duration_s;
    return c;
}

}  // namespace homsim
