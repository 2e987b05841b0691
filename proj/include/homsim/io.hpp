#pragma once

// ScanRecord CSV streams and atomic file output.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "homsim/simkit.hpp"

namespace homsim {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kScanCsvHeader = "scan_id,direction,point_index,delay_fs,dwell_s,singles_a,singles_b,coincidences";

void write_records_csv(std::ostream& out, const std::vector<ScanRecord>& records);

/// `source` names the stream in line-numbered error messages.
std::vector<ScanRecord> read_records_csv(std::istream& in, const std::string& source);
std::vector<ScanRecord> read_records_csv(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace homsim
