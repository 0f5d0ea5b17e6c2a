#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedmap::metrics {

struct RoundMetrics {
    std::size_t round = 0;
    double global_test_accuracy = 0.0;
    double mean_client_accuracy = 0.0;
    std::size_t remaining_params = 0;
    double remaining_fraction = 0.0;
    std::uint64_t uplink_bytes_per_client = 0;
    std::uint64_t downlink_bytes = 0;
    std::uint64_t cumulative_bytes = 0;
    bool prune_event = false;
};

// Header plus one row per round. Accuracies and fractions print at full
// double precision so identical runs yield identical bytes.
std::string to_csv(const std::vector<RoundMetrics>& rows);

// Same content, one JSON object per line.
std::string to_jsonl(const std::vector<RoundMetrics>& rows);

// Write via a temp file in the same directory, then rename into place, so a
// crash never leaves a half-written file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace fedmap::metrics
