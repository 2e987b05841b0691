#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homsim/simkit.hpp"

namespace homsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct NdSeries {
    Detector detector = Detector::B;
    std::vector<double> transmissions;  // empty: a single unfiltered campaign
};

struct CampaignConfig {
    int schema_version = kSchemaVersion;
    std::uint64_t seed = 1;
    CampaignSetup setup;
    double eta_a_uncertainty = 0.011;
    double eta_b_uncertainty = 0.011;
    NdSeries nd;
    CalibrationPlan calibration;
    double background_systematic = 0.20;
    std::string output_dir = "out";

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// One campaign of a config: the filter applied and its output file stem.
struct CampaignSpec {
    std::string stem;
    double transmission = 1.0;
    bool filtered = false;
    CampaignSetup setup;
};

std::vector<CampaignSpec> expand_campaigns(const CampaignConfig& config);

CampaignConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const CampaignConfig& config);
CampaignConfig load_config(const std::filesystem::path& path);

std::string to_string(Detector d);
Detector parse_detector(const std::string& name);

}  // namespace homsim
