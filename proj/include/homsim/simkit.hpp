#pragma once

// Monte Carlo scan campaigns: pair source, beamsplitter routing, two
// threshold detectors with backgrounds, classical fringes and slow drift.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "homsim/detectors.hpp"
#include "homsim/pairstats.hpp"

namespace homsim {

struct AccidentalModel {
    bool enabled = false;
    double window_s = 5e-9;
};

struct SourceParams {
    double pair_rate = 149800.0;       // pairs/s at campaign start
    double drift = 0.10;               // fractional flux loss over drift_duration_s
    double drift_duration_s = 54000.0;
    FringeModel fringes;
    AccidentalModel accidentals;
    // True background = measured background_rate * hidden_background_factor.
    double hidden_background_factor = 1.0;

    void validate() const;
    double drift_factor(double elapsed_s) const;
};

struct ScanPlan {
    int n_points = 280;
    double dwell_s = 1.0;
    double delay_min_fs = -62.0775;
    double delay_max_fs = 62.0775;
    int n_scans = 25;
    bool alternate_directions = true;

    void validate() const;
    double spacing_fs() const { return (delay_max_fs - delay_min_fs) / (n_points - 1); }
    double delay_at(int grid_index) const { return delay_min_fs + grid_index * spacing_fs(); }
    /// Grid index visited at acquisition step `step` of scan `scan_id`.
    int grid_index(int scan_id, int step) const;
    int direction(int scan_id) const { return alternate_directions && scan_id % 2 == 1 ? -1 : +1; }
    double scan_duration_s() const { return n_points * dwell_s; }
};

/// One dwell of one scan. `point_index` is the acquisition step within the
/// scan, so a descending scan lists decreasing delays.
struct ScanRecord {
    int scan_id = 0;
    int direction = +1;
    int point_index = 0;
    double delay_fs = 0.0;
    double dwell_s = 0.0;
    std::int64_t singles_a = 0;
    std::int64_t singles_b = 0;
    std::int64_t coincidences = 0;

    bool operator==(const ScanRecord&) const = default;
};

struct SeedPolicy {
    std::uint64_t master_seed = 1;

    std::uint64_t substream_seed(std::uint64_t scan_id, std::uint64_t point_index) const;
    std::mt19937_64 substream(std::uint64_t scan_id, std::uint64_t point_index) const;
};

struct CampaignSetup {
    SourceParams source;
    OverlapModel overlap;
    DetectorParams det_a{"Alice", 0.084, 1278.0};
    DetectorParams det_b{"Bob", 0.0827, 1656.0};
    ScanPlan plan;

    void validate() const;
};

struct DwellCounts {
    std::int64_t singles_a = 0;
    std::int64_t singles_b = 0;
    std::int64_t coincidences = 0;
};

struct ExpectedCounts {
    double singles_a = 0.0;
    double singles_b = 0.0;
    double coincidences = 0.0;
};

/// Conditions of one dwell: delay, length, and the multiplicative flux scale
/// (drift) in effect.
struct DwellConditions {
    double tau_fs = 0.0;
    double dwell_s = 1.0;
    double flux_scale = 1.0;
};

DwellCounts simulate_dwell(const CampaignSetup& setup, const DwellConditions& at, std::mt19937_64& rng);

/// Literal per-pair simulation of one dwell; slow, kept as a reference for
/// the binomial-chain kernel above.
DwellCounts simulate_dwell_per_pair(const CampaignSetup& setup, const DwellConditions& at, std::mt19937_64& rng);

ExpectedCounts expected_dwell(const CampaignSetup& setup, const DwellConditions& at);

enum class Execution { Serial, Parallel };

std::vector<ScanRecord> run_campaign(const CampaignSetup& setup, const SeedPolicy& seed,
                                     Execution exec = Execution::Parallel);

/// Noise-free per-cell expectations, in the same cell order as run_campaign.
std::vector<ExpectedCounts> expected_campaign(const CampaignSetup& setup);

/// Scales efficiency and background by the filter transmission.
DetectorParams apply_nd_filter(const DetectorParams& det, double transmission);

namespace kernels {

/// Fills out[cell] for cell = scan_id * n_points + step.
void simulate_cells_serial(const CampaignSetup& setup, const SeedPolicy& seed, std::span<ScanRecord> out);
void simulate_cells_parallel(const CampaignSetup& setup, const SeedPolicy& seed, std::span<ScanRecord> out);

}  // namespace kernels

enum class Detector { A, B };

struct CalibrationPlan {
    double iris_transmission = 0.2;  // closed iris on the heralding detector
    double duration_s = 3600.0;
    double background_duration_s = 3600.0;
    double delay_fs = 150.0;         // far outside the dip

    void validate() const;
};

/// Raw totals from a closed-iris calibration of `target`. The other detector
/// heralds; its background is measured in a separate source-off run.
struct CalibrationCounts {
    Detector target = Detector::A;
    std::int64_t coincidences = 0;
    std::int64_t herald_singles = 0;
    std::int64_t herald_background = 0;
    double duration_s = 0.0;
    double background_duration_s = 0.0;
};

CalibrationCounts simulate_calibration(const CampaignSetup& setup, const CalibrationPlan& plan, Detector target,
                                       const SeedPolicy& seed);

}  // namespace homsim
