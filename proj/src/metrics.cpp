#include "fedmap/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedmap/errors.hpp"

namespace fedmap::metrics {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string to_csv(const std::vector<RoundMetrics>& rows) {
    std::string out =
        "round,global_test_accuracy,mean_client_accuracy,remaining_params,remaining_fraction,"
        "uplink_bytes_per_client,downlink_bytes,cumulative_bytes,prune_event\n";
    for (const RoundMetrics& r : rows) {
        out += std::to_string(r.round);
        out += ",";
        out += fmt_double(r.global_test_accuracy);
        out += ",";
        out += fmt_double(r.mean_client_accuracy);
        out += ",";
        out += std::to_string(r.remaining_params);
        out += ",";
        out += fmt_double(r.remaining_fraction);
        out += ",";
        out += std::to_string(r.uplink_bytes_per_client);
        out += ",";
        out += std::to_string(r.downlink_bytes);
        out += ",";
        out += std::to_string(r.cumulative_bytes);
        out += ",";
        out += r.prune_event ? "1" : "0";
        out += "\n";
    }
    return out;
}

std::string to_jsonl(const std::vector<RoundMetrics>& rows) {
    std::string out;
    for (const RoundMetrics& r : rows) {
        out += "{\"round\":" + std::to_string(r.round);
        out += ",\"global_test_accuracy\":" + fmt_double(r.global_test_accuracy);
        out += ",\"mean_client_accuracy\":" + fmt_double(r.mean_client_accuracy);
        out += ",\"remaining_params\":" + std::to_string(r.remaining_params);
        out += ",\"remaining_fraction\":" + fmt_double(r.remaining_fraction);
        out += ",\"uplink_bytes_per_client\":" + std::to_string(r.uplink_bytes_per_client);
        out += ",\"downlink_bytes\":" + std::to_string(r.downlink_bytes);
        out += ",\"cumulative_bytes\":" + std::to_string(r.cumulative_bytes);
        out += std::string(",\"prune_event\":") + (r.prune_event ? "true" : "false");
        out += "}\n";
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp);
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

} // namespace fedmap::metrics
