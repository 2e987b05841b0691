#pragma once

// Closed-form two-photon statistics of a polarization HOM interferometer
// read out by two saturating photon counters.

#include <string_view>

namespace homsim {

enum class DipShape { Gaussian, Triangular };

DipShape parse_dip_shape(std::string_view name);
std::string_view to_string(DipShape shape);

/// Delay-dependent two-photon indistinguishability.
///
/// `v_max` is the peak overlap and equals the ideal coincidence visibility.
/// `width_fs` is the Gaussian RMS width; a triangular dip reaches zero at
/// `tau0 ± 2 * width_fs`.
struct OverlapModel {
    double v_max = 0.394;
    double tau0_fs = 0.0;
    double width_fs = 8.5;
    DipShape shape = DipShape::Gaussian;

    void validate() const;
};

double overlap_at(const OverlapModel& model, double tau_fs);

/// Probabilities for a pair to leave the beamsplitter as (both at A, one at
/// each detector, both at B).
struct RoutingDistribution {
    double p_both_a = 0.25;
    double p_split = 0.5;
    double p_both_b = 0.25;
};

RoutingDistribution routing(double v);

/// Classical interference riding on the pair flux (optical-period fringes).
struct FringeModel {
    double period_fs = 2.67;
    double visibility = 0.01;
    double phase_rad = 0.0;

    void validate() const;
};

double fringe_factor(const FringeModel& model, double tau_fs);

struct RatePrediction {
    double singles_a_per_pair = 0.0;
    double singles_b_per_pair = 0.0;
    double coincidence_per_pair = 0.0;
    double predicted_singles_visibility_a = 0.0;
    double predicted_singles_visibility_b = 0.0;
    double predicted_coincidence_visibility = 0.0;
};

/// Per-pair click probabilities at overlap `v` under the threshold model.
RatePrediction predict_rates(double v, double eta_a, double eta_b);

/// V_c * eta / (4 - eta); zero when eta == 0.
double singles_visibility(double eta, double v_c);

/// d/d(eta) of singles_visibility, used for error propagation.
double singles_visibility_slope(double eta, double v_c);

}  // namespace homsim
