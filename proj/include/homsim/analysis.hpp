#pragma once

// Reduction of scan records: delay binning, optical-fringe removal,
// Gaussian-plus-line fitting, background and efficiency corrections, and the
// visibility-ratio vs. efficiency curve.

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "homsim/simkit.hpp"

namespace homsim {

/// Raised when a fit cannot produce a usable result (degenerate data).
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Counts summed per delay. `pair_offset_fs` is nonzero once fringe removal
/// has averaged points that far apart; the fit model applies the same
/// average to its Gaussian term.
struct BinnedSeries {
    std::vector<double> delay_fs;
    std::vector<double> counts;
    std::vector<double> variance;
    std::vector<double> exposure_s;
    double pair_offset_fs = 0.0;

    std::size_t size() const { return delay_fs.size(); }
    void validate() const;
};

struct BinnedCampaign {
    BinnedSeries coincidences;
    BinnedSeries singles_a;
    BinnedSeries singles_b;
};

BinnedCampaign bin_and_sum(std::span<const ScanRecord> records);

/// Offset (in grid steps) that pairs points half a fringe period apart.
int fringe_pair_offset(double spacing_fs, double fringe_period_fs);

BinnedSeries remove_fringes(const BinnedSeries& series, double fringe_period_fs);

inline constexpr int kFitParams = 5;
using Covariance = std::array<std::array<double, kFitParams>, kFitParams>;

struct FitParams {
    double c0 = 0.0;         // baseline offset, counts
    double c1 = 0.0;         // baseline slope, counts/fs
    double amplitude = 0.0;  // negative for a dip
    double center_fs = 0.0;
    double width_fs = 1.0;   // Gaussian RMS

    std::array<double, kFitParams> as_array() const { return {c0, c1, amplitude, center_fs, width_fs}; }
    static FitParams from_array(const std::array<double, kFitParams>& p) { return {p[0], p[1], p[2], p[3], p[4]}; }
};

struct FitResult {
    FitParams params;
    Covariance covariance{};
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
    double pair_offset_fs = 0.0;
    double visibility = 0.0;
    double visibility_error = 0.0;

    double baseline_at_center() const { return params.c0 + params.c1 * params.center_fs; }
    double error(int i) const;
    double fwhm_fs() const;
    double evaluate(double tau_fs) const;
};

struct FitOptions {
    int max_iterations = 500;
    double step_tolerance = 1e-10;
};

/// f(t) = c0 + c1 t + A * exp(-(t - center)^2 / (2 width^2)), with the
/// Gaussian term averaged over t +- pair_offset/2 when the series carries one.
double gaussian_line(const FitParams& p, double tau_fs, double pair_offset_fs = 0.0);

FitParams initial_guess(const BinnedSeries& series);

FitResult fit_gaussian_line(const BinnedSeries& series, const FitOptions& options = {});

/// Amplitude of the residual at the fringe frequency, relative to the mean
/// fitted level (a fringe visibility).
double residual_fringe_visibility(const BinnedSeries& series, const FitResult& fit, double fringe_period_fs);

struct Measured {
    double value = 0.0;
    double stat = 0.0;
    double syst = 0.0;

    double total() const;
};

double correct_background(double v_raw, double background_fraction);

/// Background-corrected visibility; the fraction's syst error maps to syst.
Measured correct_background(const Measured& v_raw, const Measured& background_fraction);

double estimate_efficiency(double c_ab, double s_other, double b_other);

/// Efficiency from closed-iris calibration totals with Poisson statistical
/// error and a relative background systematic.
Measured estimate_efficiency(const CalibrationCounts& counts, double background_systematic);

struct CountSummary {
    double singles_a = 0.0;
    double singles_b = 0.0;
    double coincidences = 0.0;
    double background_a = 0.0;
    double background_b = 0.0;
    double background_fraction_a = 0.0;
    double background_fraction_b = 0.0;
};

struct RatioPoint {
    std::string label;
    Measured efficiency;
    Measured ratio;
    double model_ratio = 0.0;
};

struct RatioCurve {
    double slope = 0.0;
    double slope_error = 0.0;
    double chi2 = 0.0;
    int dof = 0;
    std::vector<double> model_at_points;
    std::vector<std::pair<double, double>> model_curve;
};

/// Weighted line through the origin (statistical errors only) plus the
/// eta / (4 - eta) model sampled for plotting.
RatioCurve ratio_curve(std::span<const RatioPoint> points);

/// Per-detector background inputs for campaign analysis.
struct BackgroundInputs {
    double rate_a = 0.0;  // measured counts/s
    double rate_b = 0.0;
    double systematic = 0.20;  // relative uncertainty of the measured rates
};

struct CampaignAnalysis {
    BinnedCampaign raw;
    BinnedCampaign cleaned;
    FitResult coincidence_fit;
    FitResult singles_a_fit;
    FitResult singles_b_fit;
    CountSummary summary;
    Measured singles_a_corrected;
    Measured singles_b_corrected;
    std::optional<RatioPoint> ratio_a;
    std::optional<RatioPoint> ratio_b;
};

/// Full pipeline on one campaign. Ratio points are filled for detectors whose
/// efficiency estimate is supplied.
CampaignAnalysis analyze_campaign(std::span<const ScanRecord> records, double fringe_period_fs,
                                  const BackgroundInputs& backgrounds, std::optional<Measured> eta_a = std::nullopt,
                                  std::optional<Measured> eta_b = std::nullopt);

RatioPoint make_ratio_point(std::string label, const Measured& efficiency, const Measured& corrected_singles,
                            const FitResult& coincidence_fit);

}  // namespace homsim
