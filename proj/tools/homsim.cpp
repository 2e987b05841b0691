// homsim: predict, simulate, calibrate and analyze HOM singles-dip campaigns.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "homsim/analysis.hpp"
#include "homsim/commands.hpp"
#include "homsim/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<double> nd;
    int threads = 0;
    std::vector<std::string> inputs;
};

homsim::CampaignConfig load(const Options& o)
{
    homsim::CampaignConfig c = o.config_path.empty() ? homsim::CampaignConfig{} : homsim::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.nd.empty()) c.nd.transmissions = o.nd;
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

std::vector<fs::path> paths(const Options& o)
{
    return {o.inputs.begin(), o.inputs.end()};
}

fs::path analysis_dir(const Options& o)
{
    if (!o.out.empty()) return o.out;
    const fs::path first(o.inputs.front());
    return first.has_parent_path() ? first.parent_path() : fs::path(".");
}

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("homsim"));
    spdlog::cfg::load_env_levels();  // SPDLOG_LEVEL=debug|info|warn|...

    CLI::App app{"Hong-Ou-Mandel singles-dip simulator and analysis pipeline"};
    app.require_subcommand(1);
    Options o;

    auto add_config_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config_path, "JSON campaign config (defaults mirror the no-ND run)");
        cmd->add_option("--seed", o.seed, "Master seed override");
        cmd->add_option("--out", o.out, "Output directory override");
        cmd->add_option("--nd", o.nd, "ND-filter transmissions, e.g. --nd 1.0 0.8 0.57 0.27")->delimiter(',');
    };

    auto* predict = app.add_subcommand("predict", "Closed-form rates and visibilities");
    add_config_flags(predict);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo scan campaign(s) to CSV");
    add_config_flags(simulate);
    simulate->add_option("--threads", o.threads, "OpenMP threads (0: runtime default)");
    auto* calibrate = app.add_subcommand("calibrate", "Closed-iris efficiency calibration");
    add_config_flags(calibrate);
    auto* analyze = app.add_subcommand("analyze", "Fit campaign CSVs and build the ratio curve");
    analyze->add_option("csv", o.inputs, "Campaign CSV files")->required();
    analyze->add_option("--out", o.out, "Output directory (default: directory of the first CSV)");
    auto* report = app.add_subcommand("report", "analyze plus a markdown summary");
    report->add_option("csv", o.inputs, "Campaign CSV files")->required();
    report->add_option("--out", o.out, "Output directory (default: directory of the first CSV)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (predict->parsed()) {
            const auto c = load(o);
            std::cout << homsim::dump_json(homsim::cmd_predict(c, c.output_dir));
        } else if (simulate->parsed()) {
#ifdef _OPENMP
            if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
            const auto c = load(o);
            for (const auto& p : homsim::cmd_simulate(c, c.output_dir)) std::cout << p.string() << '\n';
        } else if (calibrate->parsed()) {
            const auto c = load(o);
            std::cout << homsim::dump_json(homsim::cmd_calibrate(c, c.output_dir));
        } else if (analyze->parsed()) {
            const auto r = homsim::cmd_analyze(paths(o), analysis_dir(o));
            std::cout << homsim::dump_json(r.at("ratio_curve"));
        } else if (report->parsed()) {
            const auto dir = analysis_dir(o);
            homsim::cmd_report(paths(o), dir);
            std::cout << (dir / "summary.md").string() << '\n';
        }
    } catch (const homsim::ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return homsim::kExitConfigInvalid;
    } catch (const homsim::ParseError& e) {
        spdlog::error("parse: {}", e.what());
        return homsim::kExitParseError;
    } catch (const homsim::NonConvergenceError& e) {
        spdlog::error("fit: {}", e.what());
        return homsim::kExitFitNonConvergence;
    } catch (const homsim::FitError& e) {
        spdlog::error("fit: {}", e.what());
        return homsim::kExitFitNonConvergence;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return homsim::kExitFailure;
    }
    return homsim::kExitOk;
}
