#include "homsim/commands.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "homsim/analysis.hpp"
#include "homsim/io.hpp"
#include "homsim/pairstats.hpp"

namespace homsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kCampaignStream = 0x5CA0000000000000ULL;

std::uint64_t campaign_seed(const CampaignConfig& config, std::size_t index)
{
    return SeedPolicy{config.seed}.substream_seed(kCampaignStream, index);
}

json measured_json(const Measured& m) { return {{"value", m.value}, {"stat", m.stat}, {"syst", m.syst}}; }

Measured measured_from(const json& j)
{
    return {j.at("value").get<double>(), j.at("stat").get<double>(), j.at("syst").get<double>()};
}

json fit_json(const FitResult& f)
{
    json cov = json::array();
    for (const auto& row : f.covariance) cov.push_back(row);
    return {
        {"c0", f.params.c0},
        {"c1", f.params.c1},
        {"amplitude", f.params.amplitude},
        {"center_fs", f.params.center_fs},
        {"width_rms_fs", f.params.width_fs},
        {"width_fwhm_fs", f.fwhm_fs()},
        {"errors",
         {{"c0", f.error(0)}, {"c1", f.error(1)}, {"amplitude", f.error(2)}, {"center_fs", f.error(3)}, {"width_rms_fs", f.error(4)}}},
        {"covariance", cov},
        {"chi2", f.chi2},
        {"dof", f.dof},
        {"iterations", f.iterations},
        {"converged", f.converged},
        {"pair_offset_fs", f.pair_offset_fs},
        {"visibility", f.visibility},
        {"visibility_error", f.visibility_error},
    };
}

json detector_state(const DetectorParams& d)
{
    return {{"label", d.label}, {"eta", d.eta}, {"background_rate", d.background_rate}};
}

std::string plot_data(const BinnedSeries& s, const FitResult& fit)
{
    std::string out = "# delay_fs counts fit\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += fmt::format("{} {} {}\n", s.delay_fs[i], s.counts[i], fit.evaluate(s.delay_fs[i]));
    }
    return out;
}

fs::path sibling(const fs::path& csv, const std::string& suffix)
{
    return csv.parent_path() / (csv.stem().string() + suffix);
}

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": invalid JSON: " + e.what());
    }
}

json predict_detector(const DetectorParams& d, double uncertainty, double v_max, double pair_rate, json& warnings)
{
    const double vs = singles_visibility(d.eta, v_max);
    const double vs_err = singles_visibility_slope(d.eta, v_max) * uncertainty;
    if (d.eta == 0.0) {
        warnings.push_back("detector " + d.label + " has eta = 0: no singles dip");
        spdlog::warn("detector {} has eta = 0; predicted singles visibility is 0", d.label);
    }
    const auto off = predict_rates(0.0, d.eta, d.eta);
    const auto on = predict_rates(v_max, d.eta, d.eta);
    return {
        {"label", d.label},
        {"eta", d.eta},
        {"eta_uncertainty", uncertainty},
        {"singles_visibility", vs},
        {"singles_visibility_error", vs_err},
        {"singles_per_pair_off_dip", off.singles_a_per_pair},
        {"singles_per_pair_on_dip", on.singles_a_per_pair},
        {"singles_rate_off_dip", pair_rate * off.singles_a_per_pair + d.background_rate},
        {"singles_rate_on_dip", pair_rate * on.singles_a_per_pair + d.background_rate},
    };
}

}  // namespace

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json cmd_predict(const CampaignConfig& config, const fs::path& out_dir)
{
    config.validate();
    const auto& s = config.setup;
    const double v_max = s.overlap.v_max;
    json warnings = json::array();

    const auto off = predict_rates(0.0, s.det_a.eta, s.det_b.eta);
    const auto on = predict_rates(v_max, s.det_a.eta, s.det_b.eta);
    json report = {
        {"coincidence_visibility", on.predicted_coincidence_visibility},
        {"v_max", v_max},
        {"pair_rate", s.source.pair_rate},
        {"coincidence_per_pair_off_dip", off.coincidence_per_pair},
        {"coincidence_per_pair_on_dip", on.coincidence_per_pair},
        {"coincidence_rate_off_dip", s.source.pair_rate * off.coincidence_per_pair},
        {"detectors",
         {{"a", predict_detector(s.det_a, config.eta_a_uncertainty, v_max, s.source.pair_rate, warnings)},
          {"b", predict_detector(s.det_b, config.eta_b_uncertainty, v_max, s.source.pair_rate, warnings)}}},
    };
    json series = json::array();
    for (const auto& c : expand_campaigns(config)) {
        const auto& det = config.nd.detector == Detector::A ? c.setup.det_a : c.setup.det_b;
        series.push_back({{"stem", c.stem},
                          {"transmission", c.transmission},
                          {"detector", to_string(config.nd.detector)},
                          {"eta", det.eta},
                          {"singles_visibility", singles_visibility(det.eta, v_max)},
                          {"ratio", singles_visibility(det.eta, 1.0)}});
    }
    report["campaigns"] = series;
    report["warnings"] = warnings;
    write_file_atomic(out_dir / "predict.json", dump_json(report));
    return report;
}

std::vector<fs::path> cmd_simulate(const CampaignConfig& config, const fs::path& out_dir)
{
    config.validate();
    if (config.setup.plan.n_scans == 0) spdlog::warn("scan.n_scans is 0: writing empty campaign files");

    std::vector<fs::path> written;
    const auto campaigns = expand_campaigns(config);
    for (std::size_t i = 0; i < campaigns.size(); ++i) {
        const auto& c = campaigns[i];
        const std::uint64_t seed = campaign_seed(config, i);
        spdlog::info("simulating {} ({} scans x {} points)", c.stem, c.setup.plan.n_scans, c.setup.plan.n_points);
        const auto records = run_campaign(c.setup, SeedPolicy{seed});

        std::ostringstream csv;
        write_records_csv(csv, records);
        const fs::path csv_path = out_dir / (c.stem + ".csv");
        write_file_atomic(csv_path, csv.str());

        json inputs = config_to_json(config);
        inputs.erase("output_dir");
        const json echo = {
            {"config", inputs},
            {"campaign",
             {{"stem", c.stem},
              {"index", i},
              {"transmission", c.transmission},
              {"filtered", c.filtered},
              {"nd_detector", to_string(config.nd.detector)},
              {"seed", seed},
              {"detectors", {{"a", detector_state(c.setup.det_a)}, {"b", detector_state(c.setup.det_b)}}}}},
        };
        write_file_atomic(out_dir / (c.stem + ".config.json"), dump_json(echo));
        written.push_back(csv_path);
    }
    return written;
}

json cmd_calibrate(const CampaignConfig& config, const fs::path& out_dir)
{
    config.validate();
    json all = json::array();
    const auto campaigns = expand_campaigns(config);
    for (std::size_t i = 0; i < campaigns.size(); ++i) {
        const auto& c = campaigns[i];
        const SeedPolicy seed{campaign_seed(config, i)};
        json entry = {{"stem", c.stem}, {"transmission", c.transmission}};
        for (const Detector target : {Detector::A, Detector::B}) {
            const auto counts = simulate_calibration(c.setup, config.calibration, target, seed);
            const auto eta = estimate_efficiency(counts, config.background_systematic);
            const auto& det = target == Detector::A ? c.setup.det_a : c.setup.det_b;
            entry["eta_" + to_string(target)] = {
                {"configured", det.eta},
                {"estimate", measured_json(eta)},
                {"counts",
                 {{"coincidences", counts.coincidences},
                  {"herald_singles", counts.herald_singles},
                  {"herald_background", counts.herald_background},
                  {"duration_s", counts.duration_s},
                  {"background_duration_s", counts.background_duration_s}}},
            };
            spdlog::info("{}: eta_{} = {:.5f} +- {:.5f} (stat) +- {:.5f} (syst)", c.stem, to_string(target), eta.value,
                         eta.stat, eta.syst);
        }
        write_file_atomic(out_dir / (c.stem + ".calibration.json"), dump_json(entry));
        all.push_back(entry);
    }
    return {{"campaigns", all}};
}

json cmd_analyze(const std::vector<fs::path>& csv_paths, const fs::path& out_dir)
{
    if (csv_paths.empty()) throw ConfigError("analyze needs at least one campaign CSV");

    json campaigns = json::array();
    std::vector<RatioPoint> curve_points;
    std::vector<std::string> unconverged;

    for (const auto& path : csv_paths) {
        const auto records = read_records_csv(path);
        if (records.empty()) throw ParseError(path.string() + ": no scan records");

        const json echo = read_json_file(sibling(path, ".config.json"));
        const auto config = config_from_json(echo.at("config"));
        const auto& campaign = echo.at("campaign");
        const auto& dets = campaign.at("detectors");
        const double transmission = campaign.at("transmission").get<double>();
        const Detector nd_detector = parse_detector(campaign.at("nd_detector").get<std::string>());

        // Efficiencies: calibration run when available, otherwise the configured values.
        std::optional<Measured> eta_a;
        std::optional<Measured> eta_b;
        std::string eta_source = "config";
        const auto cal_path = sibling(path, ".calibration.json");
        if (fs::exists(cal_path)) {
            const json cal = read_json_file(cal_path);
            eta_a = measured_from(cal.at("eta_a").at("estimate"));
            eta_b = measured_from(cal.at("eta_b").at("estimate"));
            eta_source = "calibration";
        } else {
            const double scale_a = nd_detector == Detector::A ? transmission : 1.0;
            const double scale_b = nd_detector == Detector::B ? transmission : 1.0;
            eta_a = Measured{dets.at("a").at("eta").get<double>(), config.eta_a_uncertainty * scale_a, 0.0};
            eta_b = Measured{dets.at("b").at("eta").get<double>(), config.eta_b_uncertainty * scale_b, 0.0};
        }

        const BackgroundInputs bg{dets.at("a").at("background_rate").get<double>(),
                                  dets.at("b").at("background_rate").get<double>(), config.background_systematic};
        const auto a = analyze_campaign(records, config.setup.source.fringes.period_fs, bg, eta_a, eta_b);

        const std::string stem = path.stem().string();
        for (const auto* fit : {&a.coincidence_fit, &a.singles_a_fit, &a.singles_b_fit}) {
            if (!fit->converged) unconverged.push_back(stem);
        }

        auto ratio_json = [](const RatioPoint& p) {
            return json{{"label", p.label},
                        {"efficiency", measured_json(p.efficiency)},
                        {"ratio", measured_json(p.ratio)},
                        {"model_ratio", p.model_ratio}};
        };
        const auto& s = a.summary;
        json report = {
            {"campaign", stem},
            {"transmission", transmission},
            {"nd_detector", to_string(nd_detector)},
            {"n_records", records.size()},
            {"coincidence", fit_json(a.coincidence_fit)},
            {"singles_a", {{"fit", fit_json(a.singles_a_fit)}, {"corrected_visibility", measured_json(a.singles_a_corrected)}}},
            {"singles_b", {{"fit", fit_json(a.singles_b_fit)}, {"corrected_visibility", measured_json(a.singles_b_corrected)}}},
            {"summary",
             {{"singles_a_rate", s.singles_a},
              {"singles_b_rate", s.singles_b},
              {"coincidence_rate", s.coincidences},
              {"background_a_rate", s.background_a},
              {"background_b_rate", s.background_b},
              {"background_fraction_a", s.background_fraction_a},
              {"background_fraction_b", s.background_fraction_b}}},
            {"efficiency", {{"source", eta_source}, {"a", measured_json(*eta_a)}, {"b", measured_json(*eta_b)}}},
            {"ratio_points", {{"a", ratio_json(*a.ratio_a)}, {"b", ratio_json(*a.ratio_b)}}},
        };
        write_file_atomic(out_dir / (stem + ".report.json"), dump_json(report));
        write_file_atomic(out_dir / (stem + ".coincidences.dat"), plot_data(a.cleaned.coincidences, a.coincidence_fit));
        write_file_atomic(out_dir / (stem + ".singles_a.dat"), plot_data(a.cleaned.singles_a, a.singles_a_fit));
        write_file_atomic(out_dir / (stem + ".singles_b.dat"), plot_data(a.cleaned.singles_b, a.singles_b_fit));
        spdlog::info("{}: V_c = {:.4f}%, V_s(A) raw {:.4f}% corrected {:.4f}%", stem, 100 * a.coincidence_fit.visibility,
                     100 * a.singles_a_fit.visibility, 100 * a.singles_a_corrected.value);

        curve_points.push_back(nd_detector == Detector::A ? *a.ratio_a : *a.ratio_b);
        curve_points.back().label = stem;
        campaigns.push_back(report);
    }

    const auto curve = ratio_curve(curve_points);
    json points = json::array();
    std::string table = "# label efficiency eff_stat eff_syst ratio ratio_stat ratio_syst model_ratio\n";
    for (std::size_t i = 0; i < curve_points.size(); ++i) {
        const auto& p = curve_points[i];
        points.push_back({{"label", p.label},
                          {"efficiency", measured_json(p.efficiency)},
                          {"ratio", measured_json(p.ratio)},
                          {"model_ratio", curve.model_at_points[i]}});
        table += fmt::format("{} {} {} {} {} {} {} {}\n", p.label, p.efficiency.value, p.efficiency.stat, p.efficiency.syst,
                             p.ratio.value, p.ratio.stat, p.ratio.syst, curve.model_at_points[i]);
    }
    std::string model = "# efficiency model_ratio\n";
    for (const auto& [eta, r] : curve.model_curve) model += fmt::format("{} {}\n", eta, r);
    const json curve_json = {{"slope", curve.slope},
                             {"slope_error", curve.slope_error},
                             {"chi2", curve.chi2},
                             {"dof", curve.dof},
                             {"points", points}};
    write_file_atomic(out_dir / "ratio_curve.json", dump_json(curve_json));
    write_file_atomic(out_dir / "ratio_table.dat", table);
    write_file_atomic(out_dir / "ratio_model.dat", model);

    const json result = {{"campaigns", campaigns}, {"ratio_curve", curve_json}};
    if (!unconverged.empty()) {
        throw NonConvergenceError("fit did not converge for campaign " + unconverged.front() +
                                  " (outputs written, flagged converged=false)");
    }
    return result;
}

json cmd_report(const std::vector<fs::path>& csv_paths, const fs::path& out_dir)
{
    const json result = cmd_analyze(csv_paths, out_dir);

    std::string md = "# HOM singles-dip analysis\n\n";
    md += "| campaign | T | V_c (%) | V_s A raw (%) | V_s A corr (%) | V_s B raw (%) | V_s B corr (%) | eta A | eta B |\n";
    md += "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : result.at("campaigns")) {
        const auto pct = [](const json& v) { return 100.0 * v.get<double>(); };
        md += fmt::format("| {} | {:.2f} | {:.3f} ± {:.3f} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | "
                          "{:.4f} | {:.4f} |\n",
                          c.at("campaign").get<std::string>(), c.at("transmission").get<double>(),
                          pct(c["coincidence"]["visibility"]), pct(c["coincidence"]["visibility_error"]),
                          pct(c["singles_a"]["fit"]["visibility"]), pct(c["singles_a"]["fit"]["visibility_error"]),
                          pct(c["singles_a"]["corrected_visibility"]["value"]),
                          pct(c["singles_a"]["corrected_visibility"]["stat"]), pct(c["singles_b"]["fit"]["visibility"]),
                          pct(c["singles_b"]["fit"]["visibility_error"]),
                          pct(c["singles_b"]["corrected_visibility"]["value"]),
                          pct(c["singles_b"]["corrected_visibility"]["stat"]), c["efficiency"]["a"]["value"].get<double>(),
                          c["efficiency"]["b"]["value"].get<double>());
    }
    const auto& curve = result.at("ratio_curve");
    md += fmt::format("\nThrough-origin fit of V_s/V_c vs efficiency: slope {:.4f} ± {:.4f}, chi2 {:.3f} for {} dof "
                      "(model slope at small eta: 0.25).\n",
                      curve["slope"].get<double>(), curve["slope_error"].get<double>(), curve["chi2"].get<double>(),
                      curve["dof"].get<int>());
    write_file_atomic(out_dir / "summary.md", md);
    return result;
}

}  // namespace homsim
