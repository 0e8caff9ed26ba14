#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vidinfer/types.hpp"

namespace vidinfer {

std::string record_to_json(const RunRecord& record);
RunRecord record_from_json(const std::string& line);

// Line-delimited records, one JSON object per line, UTF-8.
std::vector<RunRecord> read_records(const std::string& path);

// Field equality with the timing block ignored (used for determinism checks).
bool records_equal_ignoring_timing(const RunRecord& a, const RunRecord& b);

}  // namespace vidinfer
