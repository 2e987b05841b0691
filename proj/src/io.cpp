#include "homsim/io.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include <fmt/format.h>

namespace homsim {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_field(std::string_view text, const std::string& where, const char* name)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(where + ": cannot parse " + name + " from '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ScanRecord>& records)
{
    out << kScanCsvHeader << '\n';
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{},{},{},{}\n", r.scan_id, r.direction, r.point_index, r.delay_fs, r.dwell_s,
                           r.singles_a, r.singles_b, r.coincidences);
    }
}

std::vector<ScanRecord> read_records_csv(std::istream& in, const std::string& source)
{
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ":1: empty file (expected CSV header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kScanCsvHeader) throw ParseError(source + ":1: unexpected header '" + line + "'");

    std::vector<ScanRecord> records;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        const auto f = split(line, ',');
        if (f.size() != 8) throw ParseError(where + ": expected 8 fields, got " + std::to_string(f.size()));
        ScanRecord r;
        r.scan_id = parse_field<int>(f[0], where, "scan_id");
        r.direction = parse_field<int>(f[1], where, "direction");
        r.point_index = parse_field<int>(f[2], where, "point_index");
        r.delay_fs = parse_field<double>(f[3], where, "delay_fs");
        r.dwell_s = parse_field<double>(f[4], where, "dwell_s");
        r.singles_a = parse_field<std::int64_t>(f[5], where, "singles_a");
        r.singles_b = parse_field<std::int64_t>(f[6], where, "singles_b");
        r.coincidences = parse_field<std::int64_t>(f[7], where, "coincidences");
        if (r.direction != 1 && r.direction != -1) throw ParseError(where + ": direction must be 1 or -1");
        if (r.singles_a < 0 || r.singles_b < 0 || r.coincidences < 0) throw ParseError(where + ": negative count");
        if (!(r.dwell_s > 0.0)) throw ParseError(where + ": dwell_s must be > 0");
        records.push_back(r);
    }
    return records;
}

std::vector<ScanRecord> read_records_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_records_csv(in, path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace homsim
