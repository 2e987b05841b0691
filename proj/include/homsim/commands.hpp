#pragma once

// CLI workflows: predict, simulate, calibrate, analyze, report.

#include <filesystem>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "homsim/config.hpp"

namespace homsim {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfigInvalid = 2,
    kExitParseError = 3,
    kExitFitNonConvergence = 4,
};

/// Raised after outputs are written when at least one fit did not converge.
class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json cmd_predict(const CampaignConfig& config, const std::filesystem::path& out_dir);

/// Writes <stem>.csv and <stem>.config.json per campaign; returns CSV paths.
std::vector<std::filesystem::path> cmd_simulate(const CampaignConfig& config, const std::filesystem::path& out_dir);

/// Writes <stem>.calibration.json per campaign.
nlohmann::json cmd_calibrate(const CampaignConfig& config, const std::filesystem::path& out_dir);

/// Per-campaign reports and plot files, plus the ratio curve over campaigns.
nlohmann::json cmd_analyze(const std::vector<std::filesystem::path>& csv_paths, const std::filesystem::path& out_dir);

/// cmd_analyze plus summary.md.
nlohmann::json cmd_report(const std::vector<std::filesystem::path>& csv_paths, const std::filesystem::path& out_dir);

/// Serializes JSON deterministically (sorted keys, fixed indentation).
std::string dump_json(const nlohmann::json& j);

}  // namespace homsim
