#include "homsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "homsim/pairstats.hpp"

namespace homsim {

namespace {

constexpr double kGridTolerance = 1e-6;  // fs

BinnedSeries empty_like(const std::vector<double>& grid)
{
    BinnedSeries s;
    s.delay_fs = grid;
    s.counts.assign(grid.size(), 0.0);
    s.variance.assign(grid.size(), 0.0);
    s.exposure_s.assign(grid.size(), 0.0);
    return s;
}

std::vector<double> sorted_delays(std::span<const ScanRecord> records, int scan_id)
{
    std::vector<double> d;
    for (const auto& r : records) {
        if (r.scan_id == scan_id) d.push_back(r.delay_fs);
    }
    std::sort(d.begin(), d.end());
    return d;
}

bool same_grid(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > kGridTolerance) return false;
    }
    return true;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Measured fraction_of(double background_rate, double singles_rate, double systematic, const char* which)
{
    if (!(singles_rate > 0.0)) throw std::invalid_argument(std::string("nonpositive singles rate at detector ") + which);
    const double f = background_rate / singles_rate;
    if (!(f >= 0.0 && f < 1.0)) {
        throw std::invalid_argument(std::string("background fraction at detector ") + which + " outside [0, 1): " +
                                    std::to_string(f));
    }
    return {f, 0.0, systematic * f};
}

}  // namespace

double Measured::total() const { return std::hypot(stat, syst); }

void BinnedSeries::validate() const
{
    const auto n = delay_fs.size();
    if (counts.size() != n || variance.size() != n || exposure_s.size() != n) {
        throw std::invalid_argument("binned series arrays differ in length");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(delay_fs[i] > delay_fs[i - 1])) throw std::invalid_argument("binned series delays must be strictly increasing");
    }
    if (std::any_of(counts.begin(), counts.end(), [](double c) { return !(c >= 0.0); })) {
        throw std::invalid_argument("binned series counts must be >= 0");
    }
}

BinnedCampaign bin_and_sum(std::span<const ScanRecord> records)
{
    if (records.empty()) throw std::invalid_argument("no scan records to bin");

    std::map<int, bool> scans;
    for (const auto& r : records) scans[r.scan_id] = true;
    const auto grid = sorted_delays(records, scans.begin()->first);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] - grid[i - 1] <= kGridTolerance) {
            throw std::invalid_argument("scan " + std::to_string(scans.begin()->first) + " visits a delay twice");
        }
    }
    for (const auto& [scan_id, unused] : scans) {
        if (!same_grid(grid, sorted_delays(records, scan_id))) {
            throw std::invalid_argument("scan " + std::to_string(scan_id) + " does not share the delay grid of scan " +
                                        std::to_string(scans.begin()->first));
        }
    }

    BinnedCampaign out{empty_like(grid), empty_like(grid), empty_like(grid)};
    for (const auto& r : records) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), r.delay_fs - kGridTolerance);
        const auto i = static_cast<std::size_t>(it - grid.begin());
        out.coincidences.counts[i] += static_cast<double>(r.coincidences);
        out.singles_a.counts[i] += static_cast<double>(r.singles_a);
        out.singles_b.counts[i] += static_cast<double>(r.singles_b);
        for (auto* s : {&out.coincidences, &out.singles_a, &out.singles_b}) s->exposure_s[i] += r.dwell_s;
    }
    for (auto* s : {&out.coincidences, &out.singles_a, &out.singles_b}) {
        for (std::size_t i = 0; i < grid.size(); ++i) s->variance[i] = std::max(s->counts[i], 1.0);
    }
    return out;
}

int fringe_pair_offset(double spacing_fs, double fringe_period_fs)
{
    if (!(fringe_period_fs > 0.0)) throw std::invalid_argument("fringe period must be > 0");
    const double half = fringe_period_fs / 2.0;
    if (!(spacing_fs > 0.0) || spacing_fs > half * (1.0 + 1e-9)) {
        throw std::invalid_argument("grid spacing " + std::to_string(spacing_fs) + " fs is too coarse to pair points half a " +
                                    std::to_string(fringe_period_fs) + " fs fringe apart; need spacing <= " +
                                    std::to_string(half) + " fs");
    }
    return static_cast<int>(std::lround(half / spacing_fs));
}

BinnedSeries remove_fringes(const BinnedSeries& series, double fringe_period_fs)
{
    series.validate();
    if (series.pair_offset_fs != 0.0) throw std::invalid_argument("series has already been fringe-averaged");
    const std::size_t n = series.size();
    if (n < 2) throw std::invalid_argument("fringe removal needs at least 2 points");
    const double spacing = (series.delay_fs.back() - series.delay_fs.front()) / static_cast<double>(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(series.delay_fs[i] - series.delay_fs[i - 1] - spacing) > 1e-6 * spacing + kGridTolerance) {
            throw std::invalid_argument("fringe removal requires an evenly spaced delay grid");
        }
    }
    const auto k = static_cast<std::size_t>(fringe_pair_offset(spacing, fringe_period_fs));
    if (k >= n) throw std::invalid_argument("series too short for a half-period pairing offset");

    BinnedSeries out;
    out.pair_offset_fs = series.delay_fs[k] - series.delay_fs[0];
    for (std::size_t i = 0; i + k < n; ++i) {
        out.delay_fs.push_back((series.delay_fs[i] + series.delay_fs[i + k]) / 2.0);
        out.counts.push_back((series.counts[i] + series.counts[i + k]) / 2.0);
        out.variance.push_back((series.variance[i] + series.variance[i + k]) / 4.0);
        out.exposure_s.push_back((series.exposure_s[i] + series.exposure_s[i + k]) / 2.0);
    }
    return out;
}

double correct_background(double v_raw, double background_fraction)
{
    if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
        throw std::invalid_argument("background fraction must lie in [0, 1), got " + std::to_string(background_fraction));
    }
    return v_raw / (1.0 - background_fraction);
}

Measured correct_background(const Measured& v_raw, const Measured& background_fraction)
{
    const double b = background_fraction.value;
    const double value = correct_background(v_raw.value, b);
    const double dv_db = v_raw.value / ((1.0 - b) * (1.0 - b));
    return {value, std::hypot(v_raw.stat / (1.0 - b), dv_db * background_fraction.stat),
            std::hypot(v_raw.syst / (1.0 - b), dv_db * background_fraction.syst)};
}

double estimate_efficiency(double c_ab, double s_other, double b_other)
{
    const double signal = s_other - b_other;
    if (!(signal > 0.0)) {
        throw std::invalid_argument("heralding singles do not exceed background (S - B = " + std::to_string(signal) + ")");
    }
    return 2.0 * c_ab / signal;
}

Measured estimate_efficiency(const CalibrationCounts& counts, double background_systematic)
{
    const double c = static_cast<double>(counts.coincidences) / counts.duration_s;
    const double s = static_cast<double>(counts.herald_singles) / counts.duration_s;
    const double b = static_cast<double>(counts.herald_background) / counts.background_duration_s;
    const double eta = estimate_efficiency(c, s, b);
    const double signal = s - b;
    const double var_c = c / counts.duration_s;
    const double var_s = s / counts.duration_s;
    const double var_b = b / counts.background_duration_s;
    const double stat = std::sqrt(4.0 * var_c / (signal * signal) + eta * eta * (var_s + var_b) / (signal * signal));
    const double syst = eta * background_systematic * b / signal;
    return {eta, stat, syst};
}

RatioPoint make_ratio_point(std::string label, const Measured& efficiency, const Measured& corrected_singles,
                            const FitResult& coincidence_fit)
{
    const double vc = coincidence_fit.visibility;
    if (!(vc > 0.0)) throw std::invalid_argument("coincidence visibility must be positive to form a ratio");
    RatioPoint p;
    p.label = std::move(label);
    p.efficiency = efficiency;
    const double ratio = corrected_singles.value / vc;
    const double rel_vc = coincidence_fit.visibility_error / vc;
    p.ratio = {ratio, std::hypot(corrected_singles.stat / vc, ratio * rel_vc), corrected_singles.syst / vc};
    const double eta = std::clamp(efficiency.value, 0.0, 1.0);
    p.model_ratio = singles_visibility(eta, 1.0);
    return p;
}

RatioCurve ratio_curve(std::span<const RatioPoint> points)
{
    if (points.empty()) throw std::invalid_argument("ratio curve needs at least one point");
    const bool weighted = std::all_of(points.begin(), points.end(), [](const RatioPoint& p) { return p.ratio.stat > 0.0; });

    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : points) {
        const double w = weighted ? 1.0 / (p.ratio.stat * p.ratio.stat) : 1.0;
        sxx += w * p.efficiency.value * p.efficiency.value;
        sxy += w * p.efficiency.value * p.ratio.value;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("ratio curve needs a point with nonzero efficiency");

    RatioCurve curve;
    curve.slope = sxy / sxx;
    curve.slope_error = 1.0 / std::sqrt(sxx);
    curve.dof = static_cast<int>(points.size()) - 1;
    double max_eta = 0.0;
    for (const auto& p : points) {
        const double w = weighted ? 1.0 / (p.ratio.stat * p.ratio.stat) : 1.0;
        const double r = p.ratio.value - curve.slope * p.efficiency.value;
        curve.chi2 += w * r * r;
        curve.model_at_points.push_back(singles_visibility(std::clamp(p.efficiency.value, 0.0, 1.0), 1.0));
        max_eta = std::max(max_eta, p.efficiency.value);
    }
    const double top = std::min(1.0, 1.2 * max_eta);
    constexpr int kSamples = 101;
    for (int i = 0; i < kSamples; ++i) {
        const double eta = top * i / (kSamples - 1);
        curve.model_curve.emplace_back(eta, singles_visibility(eta, 1.0));
    }
    return curve;
}

CampaignAnalysis analyze_campaign(std::span<const ScanRecord> records, double fringe_period_fs,
                                  const BackgroundInputs& backgrounds, std::optional<Measured> eta_a,
                                  std::optional<Measured> eta_b)
{
    CampaignAnalysis a;
    a.raw = bin_and_sum(records);
    if (fringe_period_fs > 0.0) {
        a.cleaned = {remove_fringes(a.raw.coincidences, fringe_period_fs), remove_fringes(a.raw.singles_a, fringe_period_fs),
                     remove_fringes(a.raw.singles_b, fringe_period_fs)};
    } else {
        a.cleaned = a.raw;
    }
    a.coincidence_fit = fit_gaussian_line(a.cleaned.coincidences);
    a.singles_a_fit = fit_gaussian_line(a.cleaned.singles_a);
    a.singles_b_fit = fit_gaussian_line(a.cleaned.singles_b);

    auto& s = a.summary;
    s.coincidences = a.coincidence_fit.baseline_at_center() / mean(a.cleaned.coincidences.exposure_s);
    s.singles_a = a.singles_a_fit.baseline_at_center() / mean(a.cleaned.singles_a.exposure_s);
    s.singles_b = a.singles_b_fit.baseline_at_center() / mean(a.cleaned.singles_b.exposure_s);
    s.background_a = backgrounds.rate_a;
    s.background_b = backgrounds.rate_b;
    const auto frac_a = fraction_of(backgrounds.rate_a, s.singles_a, backgrounds.systematic, "A");
    const auto frac_b = fraction_of(backgrounds.rate_b, s.singles_b, backgrounds.systematic, "B");
    s.background_fraction_a = frac_a.value;
    s.background_fraction_b = frac_b.value;

    a.singles_a_corrected = correct_background({a.singles_a_fit.visibility, a.singles_a_fit.visibility_error, 0.0}, frac_a);
    a.singles_b_corrected = correct_background({a.singles_b_fit.visibility, a.singles_b_fit.visibility_error, 0.0}, frac_b);

    if (eta_a) a.ratio_a = make_ratio_point("A", *eta_a, a.singles_a_corrected, a.coincidence_fit);
    if (eta_b) a.ratio_b = make_ratio_point("B", *eta_b, a.singles_b_corrected, a.coincidence_fit);
    return a;
}

}  // namespace homsim
