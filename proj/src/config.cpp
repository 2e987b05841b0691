#include "homsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace homsim {

using nlohmann::json;

namespace {

// Reads an optional member with a type check; the dotted path makes error
// messages point at the offending field.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
        }
    }

    Reader child(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        static const json empty = json::object();
        return Reader(it == j_.end() ? empty : *it, field(key));
    }

    bool has(const char* key) const { return j_.contains(key); }

    void reject_unknown() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(field(key.c_str()) + ": unknown field");
        }
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_detector(Reader r, DetectorParams& d, double& uncertainty)
{
    r.get("label", d.label);
    r.get("eta", d.eta);
    r.get("eta_uncertainty", uncertainty);
    r.get("background_rate", d.background_rate);
    r.reject_unknown();
}

json detector_json(const DetectorParams& d, double uncertainty)
{
    return {{"label", d.label}, {"eta", d.eta}, {"eta_uncertainty", uncertainty}, {"background_rate", d.background_rate}};
}

// Rethrows validation failures as ConfigError with the section prefixed.
template <class F>
void check(const char* section, F&& f)
{
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(section) + ": " + e.what());
    }
}

}  // namespace

std::string to_string(Detector d) { return d == Detector::A ? "a" : "b"; }

Detector parse_detector(const std::string& name)
{
    if (name == "a" || name == "A") return Detector::A;
    if (name == "b" || name == "B") return Detector::B;
    throw ConfigError("unknown detector '" + name + "' (expected a|b)");
}

void CampaignConfig::validate() const
{
    if (schema_version != kSchemaVersion) {
        throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                          std::to_string(schema_version));
    }
    check("source", [&] { setup.source.validate(); });
    check("overlap", [&] { setup.overlap.validate(); });
    check("detectors.a", [&] { setup.det_a.validate(); });
    check("detectors.b", [&] { setup.det_b.validate(); });
    check("scan", [&] { setup.plan.validate(); });
    check("calibration", [&] { calibration.validate(); });
    if (!(eta_a_uncertainty >= 0.0)) throw ConfigError("detectors.a.eta_uncertainty must be >= 0");
    if (!(eta_b_uncertainty >= 0.0)) throw ConfigError("detectors.b.eta_uncertainty must be >= 0");
    for (double t : nd.transmissions) {
        if (!(t > 0.0 && t <= 1.0)) throw ConfigError("nd_filter.transmissions: each must lie in (0, 1], got " + std::to_string(t));
    }
    if (!(background_systematic >= 0.0 && background_systematic < 1.0)) {
        throw ConfigError("analysis.background_systematic must lie in [0, 1)");
    }
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::vector<CampaignSpec> expand_campaigns(const CampaignConfig& config)
{
    if (config.nd.transmissions.empty()) return {{"scan", 1.0, false, config.setup}};
    std::vector<CampaignSpec> out;
    for (double t : config.nd.transmissions) {
        CampaignSpec c{"", t, true, config.setup};
        char buf[32];
        std::snprintf(buf, sizeof buf, "scan_T%.2f", t);
        c.stem = buf;
        auto& det = config.nd.detector == Detector::A ? c.setup.det_a : c.setup.det_b;
        det = apply_nd_filter(det, t);
        out.push_back(std::move(c));
    }
    return out;
}

CampaignConfig config_from_json(const json& j)
{
    CampaignConfig c;
    Reader root(j, "");
    root.get("schema_version", c.schema_version);
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);

    auto& src = c.setup.source;
    {
        Reader r = root.child("source");
        r.get("pair_rate", src.pair_rate);
        r.get("drift", src.drift);
        r.get("drift_duration_s", src.drift_duration_s);
        r.get("hidden_background_factor", src.hidden_background_factor);
        Reader acc = r.child("accidentals");
        acc.get("enabled", src.accidentals.enabled);
        acc.get("window_s", src.accidentals.window_s);
        acc.reject_unknown();
        r.reject_unknown();
    }
    {
        Reader r = root.child("overlap");
        r.get("v_max", c.setup.overlap.v_max);
        r.get("tau0_fs", c.setup.overlap.tau0_fs);
        r.get("width_fs", c.setup.overlap.width_fs);
        std::string shape(to_string(c.setup.overlap.shape));
        r.get("shape", shape);
        check("overlap.shape", [&] { c.setup.overlap.shape = parse_dip_shape(shape); });
        r.reject_unknown();
    }
    {
        Reader r = root.child("fringes");
        r.get("period_fs", src.fringes.period_fs);
        r.get("visibility", src.fringes.visibility);
        r.get("phase_rad", src.fringes.phase_rad);
        r.reject_unknown();
    }
    {
        Reader r = root.child("detectors");
        read_detector(r.child("a"), c.setup.det_a, c.eta_a_uncertainty);
        read_detector(r.child("b"), c.setup.det_b, c.eta_b_uncertainty);
        r.reject_unknown();
    }
    {
        Reader r = root.child("scan");
        auto& p = c.setup.plan;
        r.get("n_points", p.n_points);
        r.get("dwell_s", p.dwell_s);
        r.get("delay_min_fs", p.delay_min_fs);
        r.get("delay_max_fs", p.delay_max_fs);
        r.get("n_scans", p.n_scans);
        r.get("alternate_directions", p.alternate_directions);
        r.reject_unknown();
    }
    {
        Reader r = root.child("nd_filter");
        std::string det = to_string(c.nd.detector);
        r.get("detector", det);
        c.nd.detector = parse_detector(det);
        r.get("transmissions", c.nd.transmissions);
        r.reject_unknown();
    }
    {
        Reader r = root.child("calibration");
        r.get("iris_transmission", c.calibration.iris_transmission);
        r.get("duration_s", c.calibration.duration_s);
        r.get("background_duration_s", c.calibration.background_duration_s);
        r.get("delay_fs", c.calibration.delay_fs);
        r.reject_unknown();
    }
    {
        Reader r = root.child("analysis");
        r.get("background_systematic", c.background_systematic);
        r.reject_unknown();
    }
    root.reject_unknown();
    c.validate();
    return c;
}

json config_to_json(const CampaignConfig& c)
{
    const auto& s = c.setup;
    return {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"source",
         {{"pair_rate", s.source.pair_rate},
          {"drift", s.source.drift},
          {"drift_duration_s", s.source.drift_duration_s},
          {"hidden_background_factor", s.source.hidden_background_factor},
          {"accidentals", {{"enabled", s.source.accidentals.enabled}, {"window_s", s.source.accidentals.window_s}}}}},
        {"overlap",
         {{"v_max", s.overlap.v_max},
          {"tau0_fs", s.overlap.tau0_fs},
          {"width_fs", s.overlap.width_fs},
          {"shape", std::string(to_string(s.overlap.shape))}}},
        {"fringes",
         {{"period_fs", s.source.fringes.period_fs},
          {"visibility", s.source.fringes.visibility},
          {"phase_rad", s.source.fringes.phase_rad}}},
        {"detectors", {{"a", detector_json(s.det_a, c.eta_a_uncertainty)}, {"b", detector_json(s.det_b, c.eta_b_uncertainty)}}},
        {"scan",
         {{"n_points", s.plan.n_points},
          {"dwell_s", s.plan.dwell_s},
          {"delay_min_fs", s.plan.delay_min_fs},
          {"delay_max_fs", s.plan.delay_max_fs},
          {"n_scans", s.plan.n_scans},
          {"alternate_directions", s.plan.alternate_directions}}},
        {"nd_filter", {{"detector", to_string(c.nd.detector)}, {"transmissions", c.nd.transmissions}}},
        {"calibration",
         {{"iris_transmission", c.calibration.iris_transmission},
          {"duration_s", c.calibration.duration_s},
          {"background_duration_s", c.calibration.background_duration_s},
          {"delay_fs", c.calibration.delay_fs}}},
        {"analysis", {{"background_systematic", c.background_systematic}}},
    };
}

CampaignConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace homsim
