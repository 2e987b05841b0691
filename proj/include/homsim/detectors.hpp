#pragma once

// Click models for photon counters that cannot resolve photon number.

#include <string>
#include <string_view>
#include <vector>

namespace homsim {

struct DetectorParams {
    std::string label = "Alice";
    double eta = 0.084;
    double background_rate = 0.0;  // counts/s

    void validate() const;
};

enum class ClickModel {
    Threshold,      // clicks iff at least one photon is absorbed
    LinearGlauber,  // min(1, eta * n); comparison only, not a real counter
    TaylorOrder2,   // 3/2 <n> - 1/2 <n^2> after loss, n <= 2 only
};

ClickModel parse_click_model(std::string_view name);

/// Photon-number probabilities for n = 0 .. probs.size() - 1.
class PhotonNumberDistribution {
public:
    explicit PhotonNumberDistribution(std::vector<double> probs);

    const std::vector<double>& probs() const { return probs_; }
    int max_n() const { return static_cast<int>(probs_.size()) - 1; }
    double mean() const;
    double second_moment() const;

    /// Binomial loss: each photon survives independently with probability eta.
    PhotonNumberDistribution thinned(double eta) const;

private:
    std::vector<double> probs_;
};

double click_prob(ClickModel model, int n, double eta);

double response_expectation(ClickModel model, const PhotonNumberDistribution& dist, double eta);

/// eta + (1 - eta) * eta.
double two_photon_click_prob(double eta);

}  // namespace homsim
