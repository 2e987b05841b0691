#include "homsim/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace homsim {

namespace {

void require_eta(double eta)
{
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1], got " + std::to_string(eta));
}

double binomial_pmf(int n, int k, double p)
{
    double coeff = 1.0;
    for (int i = 1; i <= k; ++i) coeff = coeff * (n - k + i) / i;
    return coeff * std::pow(p, k) * std::pow(1.0 - p, n - k);
}

// The order-2 truncation of Theta(n - 0.5): exact on n in {0, 1, 2}.
double taylor2(int n) { return 1.5 * n - 0.5 * n * n; }

}  // namespace

void DetectorParams::validate() const
{
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("detector " + label + ": eta must lie in [0, 1]");
    if (!(background_rate >= 0.0) || !std::isfinite(background_rate)) {
        throw std::invalid_argument("detector " + label + ": background_rate must be >= 0");
    }
}

ClickModel parse_click_model(std::string_view name)
{
    if (name == "threshold") return ClickModel::Threshold;
    if (name == "linear") return ClickModel::LinearGlauber;
    if (name == "taylor2") return ClickModel::TaylorOrder2;
    throw std::invalid_argument("unknown click model '" + std::string(name) + "'");
}

PhotonNumberDistribution::PhotonNumberDistribution(std::vector<double> probs) : probs_(std::move(probs))
{
    if (probs_.empty()) throw std::invalid_argument("photon-number distribution is empty");
    if (std::any_of(probs_.begin(), probs_.end(), [](double p) { return !(p >= 0.0); })) {
        throw std::invalid_argument("photon-number probabilities must be nonnegative");
    }
    const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("photon-number probabilities must sum to 1");
}

double PhotonNumberDistribution::mean() const
{
    double m = 0.0;
    for (std::size_t n = 0; n < probs_.size(); ++n) m += static_cast<double>(n) * probs_[n];
    return m;
}

double PhotonNumberDistribution::second_moment() const
{
    double m = 0.0;
    for (std::size_t n = 0; n < probs_.size(); ++n) m += static_cast<double>(n * n) * probs_[n];
    return m;
}

PhotonNumberDistribution PhotonNumberDistribution::thinned(double eta) const
{
    require_eta(eta);
    std::vector<double> out(probs_.size(), 0.0);
    for (int n = 0; n <= max_n(); ++n) {
        if (probs_[n] == 0.0) continue;
        for (int k = 0; k <= n; ++k) out[k] += probs_[n] * binomial_pmf(n, k, eta);
    }
    // Renormalize away rounding so the invariant holds to 1e-12.
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& p : out) p /= total;
    return PhotonNumberDistribution(std::move(out));
}

double click_prob(ClickModel model, int n, double eta)
{
    require_eta(eta);
    if (n < 0) throw std::invalid_argument("photon number must be >= 0");
    switch (model) {
    case ClickModel::Threshold:
        return 1.0 - std::pow(1.0 - eta, n);
    case ClickModel::LinearGlauber:
        return std::min(1.0, eta * n);
    case ClickModel::TaylorOrder2: {
        if (n > 2) throw std::domain_error("TaylorOrder2 click model is defined only for n <= 2");
        double p = 0.0;
        for (int k = 0; k <= n; ++k) p += binomial_pmf(n, k, eta) * taylor2(k);
        return p;
    }
    }
    return 0.0;
}

double response_expectation(ClickModel model, const PhotonNumberDistribution& dist, double eta)
{
    if (model == ClickModel::TaylorOrder2) {
        for (int n = 3; n <= dist.max_n(); ++n) {
            if (dist.probs()[n] != 0.0) throw std::domain_error("TaylorOrder2 requires a distribution supported on n <= 2");
        }
        const auto lossy = dist.thinned(eta);
        return 1.5 * lossy.mean() - 0.5 * lossy.second_moment();
    }
    double p = 0.0;
    for (int n = 0; n <= dist.max_n(); ++n) {
        if (dist.probs()[n] != 0.0) p += dist.probs()[n] * click_prob(model, n, eta);
    }
    return p;
}

double two_photon_click_prob(double eta)
{
    require_eta(eta);
    return 2.0 * eta - eta * eta;
}

}  // namespace homsim
