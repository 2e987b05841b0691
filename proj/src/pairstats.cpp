#include "homsim/pairstats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace homsim {

namespace {

void require_unit(double x, const char* what)
{
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument(std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
    }
}

double two_photon(double eta) { return 2.0 * eta - eta * eta; }

double singles_per_pair(double v, double eta)
{
    return eta * (1.0 - v) / 2.0 + two_photon(eta) * (1.0 + v) / 4.0;
}

double relative_drop(double at_zero, double at_v) { return at_zero > 0.0 ? (at_zero - at_v) / at_zero : 0.0; }

}  // namespace

DipShape parse_dip_shape(std::string_view name)
{
    if (name == "gaussian") return DipShape::Gaussian;
    if (name == "triangular") return DipShape::Triangular;
    throw std::invalid_argument("unknown dip shape '" + std::string(name) + "' (expected gaussian|triangular)");
}

std::string_view to_string(DipShape shape) { return shape == DipShape::Gaussian ? "gaussian" : "triangular"; }

void OverlapModel::validate() const
{
    require_unit(v_max, "overlap.v_max");
    if (!(width_fs > 0.0) || !std::isfinite(width_fs)) throw std::invalid_argument("overlap.width_fs must be > 0");
    if (!std::isfinite(tau0_fs)) throw std::invalid_argument("overlap.tau0_fs must be finite");
}

double overlap_at(const OverlapModel& model, double tau_fs)
{
    const double dt = tau_fs - model.tau0_fs;
    switch (model.shape) {
    case DipShape::Gaussian:
        return model.v_max * std::exp(-dt * dt / (2.0 * model.width_fs * model.width_fs));
    case DipShape::Triangular:
        return model.v_max * std::max(0.0, 1.0 - std::abs(dt) / (2.0 * model.width_fs));
    }
    return 0.0;
}

RoutingDistribution routing(double v)
{
    require_unit(v, "overlap");
    const double bunched = (1.0 + v) / 4.0;
    return {bunched, (1.0 - v) / 2.0, bunched};
}

void FringeModel::validate() const
{
    if (!(period_fs > 0.0)) throw std::invalid_argument("fringes.period_fs must be > 0");
    if (!(visibility >= 0.0 && visibility < 1.0)) throw std::invalid_argument("fringes.visibility must lie in [0, 1)");
    if (!std::isfinite(phase_rad)) throw std::invalid_argument("fringes.phase_rad must be finite");
}

double fringe_factor(const FringeModel& model, double tau_fs)
{
    return 1.0 + model.visibility * std::cos(2.0 * std::numbers::pi * tau_fs / model.period_fs + model.phase_rad);
}

RatePrediction predict_rates(double v, double eta_a, double eta_b)
{
    require_unit(v, "overlap");
    require_unit(eta_a, "eta_a");
    require_unit(eta_b, "eta_b");

    RatePrediction r;
    r.singles_a_per_pair = singles_per_pair(v, eta_a);
    r.singles_b_per_pair = singles_per_pair(v, eta_b);
    r.coincidence_per_pair = eta_a * eta_b * (1.0 - v) / 2.0;

    r.predicted_singles_visibility_a = relative_drop(singles_per_pair(0.0, eta_a), r.singles_a_per_pair);
    r.predicted_singles_visibility_b = relative_drop(singles_per_pair(0.0, eta_b), r.singles_b_per_pair);
    r.predicted_coincidence_visibility = relative_drop(eta_a * eta_b / 2.0, r.coincidence_per_pair);
    return r;
}

double singles_visibility(double eta, double v_c)
{
    require_unit(eta, "eta");
    require_unit(v_c, "v_c");
    if (eta == 0.0) return 0.0;
    return v_c * eta / (4.0 - eta);
}

double singles_visibility_slope(double eta, double v_c)
{
    require_unit(eta, "eta");
    return v_c * 4.0 / ((4.0 - eta) * (4.0 - eta));
}

}  // namespace homsim
