#include "fedmap/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "fedmap/data.hpp"
#include "fedmap/errors.hpp"
#include "fedmap/federation.hpp"
#include "fedmap/metrics.hpp"
#include "fedmap/rng.hpp"
#include "fedmap/schedule.hpp"

namespace fs = std::filesystem;

namespace fedmap::runner {

namespace {

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string event_mask_name(std::size_t round) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "event_%06zu.mask", round);
    return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["version"] = m.version;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["out_dir"] = m.out_dir;
    j["outputs"] = m.outputs;
    j["ok"] = m.ok;
    if (!m.ok) j["error"] = m.error;
    j["final_accuracy"] = m.final_accuracy;
    j["reached_floor"] = m.reached_floor;
    if (m.reached_floor) j["bytes_to_floor"] = m.bytes_to_floor;
    metrics::write_file_atomic(path, j.dump(2) + "\n");
}

std::size_t floor_allowance(const config::ExperimentConfig& cfg, std::size_t d) {
    const double f =
        cfg.method == config::Method::FedAvgDense ? 1.0 : cfg.schedule_floor;
    return static_cast<std::size_t>(std::round(static_cast<double>(d) * f));
}

// Replace `key`'s line in a canonical dump. The dump holds every key exactly
// once, so this doubles as existence validation.
std::string override_key(const std::string& dump, const std::string& key,
                         const std::string& value) {
    std::stringstream in(dump);
    std::string line;
    std::string out;
    bool found = false;
    while (std::getline(in, line)) {
        if (line.rfind(key + "=", 0) == 0) {
            out += key + "=" + value + "\n";
            found = true;
        } else {
            out += line + "\n";
        }
    }
    if (!found) throw ConfigError("sweep grid: unknown key '" + key + "'");
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace

RunManifest run(const config::ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "masks");

    RunManifest m;
    m.config_hash = config::config_hash(cfg);
    m.seed = cfg.seed;
    m.out_dir = out_dir;
    m.started_at = utc_now();

    const federation::RunResult result = federation::run(cfg);

    const fs::path base(out_dir);
    const std::string metrics_csv = (base / "metrics.csv").string();
    const std::string metrics_jsonl = (base / "metrics.jsonl").string();
    const std::string config_txt = (base / "config.txt").string();
    const std::string checkpoint = (base / "final.ckpt").string();
    const std::string chain_csv = (base / "mask_chain.csv").string();

    metrics::write_file_atomic(metrics_csv, metrics::to_csv(result.rounds));
    metrics::write_file_atomic(metrics_jsonl, metrics::to_jsonl(result.rounds));
    metrics::write_file_atomic(config_txt, config::dump_config(cfg));
    save_checkpoint(result.final_global, checkpoint);

    std::string chain = "round,remaining_params,subset_of_previous\n";
    const PruneMask* prev = nullptr;
    for (const auto& [round, mask] : result.event_masks) {
        const std::string name = event_mask_name(round);
        save_mask(mask, (base / "masks" / name).string());
        chain += std::to_string(round) + "," + std::to_string(mask.nonzero_count()) + "," +
                 (prev ? (is_subset(mask, *prev) ? "1" : "0") : "") + "\n";
        prev = &mask;
    }
    metrics::write_file_atomic(chain_csv, chain);

    m.outputs["metrics_csv"] = metrics_csv;
    m.outputs["metrics_jsonl"] = metrics_jsonl;
    m.outputs["config"] = config_txt;
    m.outputs["checkpoint"] = checkpoint;
    m.outputs["mask_chain"] = chain_csv;

    if (cfg.data.export_csv) {
        const data::DataSplit split =
            data::synth_blobs(cfg.data.classes, cfg.data.dim, cfg.data.examples, cfg.data.spread,
                              rng::derive(cfg.seed, "data"));
        data::PartitionSpec ps;
        ps.mode = cfg.partition_mode;
        ps.beta = cfg.partition_beta;
        ps.skew_factor = cfg.partition_skew;
        ps.clients = cfg.clients;
        ps.seed = rng::derive(cfg.seed, "partition");
        const std::vector<Dataset> shards = data::partition(split.train, ps);
        for (std::size_t k = 0; k < shards.size(); ++k) {
            const std::string path = (base / ("client_" + std::to_string(k) + ".csv")).string();
            data::export_csv(shards[k], path);
            m.outputs["client_" + std::to_string(k)] = path;
        }
    }

    if (!result.rounds.empty()) {
        m.final_accuracy = result.rounds.back().global_test_accuracy;
        const std::size_t target = floor_allowance(cfg, result.total_weights);
        for (const metrics::RoundMetrics& r : result.rounds) {
            if (r.remaining_params <= target) {
                m.reached_floor = true;
                m.bytes_to_floor = r.cumulative_bytes;
                break;
            }
        }
        // A dense run trivially sits at its "floor" from round one; that is
        // not a sparsity milestone worth reporting.
        if (target == result.total_weights) m.reached_floor = false;
    }

    m.finished_at = utc_now();
    write_manifest(m, (base / "manifest.json").string());
    return m;
}

std::vector<RunManifest> sweep(const config::ExperimentConfig& base, const std::string& grid_text,
                               const std::string& out_dir) {
    // Parse the grid: ordered keys, each with an ordered list of values.
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    {
        std::stringstream in(grid_text);
        std::string raw;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = raw;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto notspace = [](unsigned char c) { return !std::isspace(c); };
            line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
            line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("grid:" + std::to_string(lineno) + ": expected key=v1,v2,...");
            const std::string key = line.substr(0, eq);
            if (key == "model.hidden")
                throw ConfigError("grid: model.hidden cannot be swept (its value is a list)");
            std::vector<std::string> values;
            std::stringstream vs(line.substr(eq + 1));
            std::string v;
            while (std::getline(vs, v, ',')) {
                if (!v.empty()) values.push_back(v);
            }
            if (values.empty())
                throw ConfigError("grid:" + std::to_string(lineno) + ": no values for '" + key +
                                  "'");
            axes.emplace_back(key, values);
        }
    }
    if (axes.empty()) throw ConfigError("grid: empty");

    const std::string base_dump = config::dump_config(base);
    // Validate keys up front so a typo aborts before any cell runs.
    for (const auto& [key, values] : axes) override_key(base_dump, key, values.front());

    std::size_t cells = 1;
    for (const auto& [key, values] : axes) cells *= values.size();

    fs::create_directories(out_dir);
    std::vector<RunManifest> manifests;
    std::string summary = "cell";
    for (const auto& [key, values] : axes) summary += "," + key;
    summary += ",status,final_accuracy,bytes_to_floor\n";

    for (std::size_t i = 0; i < cells; ++i) {
        // Mixed-radix digits of i select one value per axis.
        std::size_t rem = i;
        std::vector<std::string> chosen(axes.size());
        std::string text = base_dump;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& [key, values] = axes[a];
            chosen[a] = values[rem % values.size()];
            rem /= values.size();
            text = override_key(text, key, chosen[a]);
        }
        char cell_name[32];
        std::snprintf(cell_name, sizeof(cell_name), "cell_%03zu", i);
        const std::string cell_dir = (fs::path(out_dir) / cell_name).string();

        RunManifest m;
        m.out_dir = cell_dir;
        try {
            const config::ExperimentConfig cfg = config::parse_config(text, cell_name);
            m = run(cfg, cell_dir);
        } catch (const std::exception& e) {
            m.ok = false;
            m.error = e.what();
            m.started_at = m.started_at.empty() ? utc_now() : m.started_at;
            m.finished_at = utc_now();
            fs::create_directories(cell_dir);
            write_manifest(m, (fs::path(cell_dir) / "manifest.json").string());
        }
        manifests.push_back(m);

        summary += cell_name;
        for (const std::string& v : chosen) summary += "," + csv_escape(v);
        if (m.ok) {
            char acc[64];
            std::snprintf(acc, sizeof(acc), "%.17g", m.final_accuracy);
            summary += ",ok,";
            summary += acc;
            summary += ",";
            if (m.reached_floor) summary += std::to_string(m.bytes_to_floor);
        } else {
            summary += "," + csv_escape("error: " + m.error) + ",,";
        }
        summary += "\n";
    }
    metrics::write_file_atomic((fs::path(out_dir) / "summary.csv").string(), summary);
    return manifests;
}

std::string schedule_preview_csv(const config::ExperimentConfig& cfg) {
    const Model probe = make_mlp(cfg.data.dim, cfg.model.hidden, cfg.data.classes,
                                 rng::derive(cfg.seed, "init"), cfg.model.bias);
    const schedule::ScheduleSpec spec = config::make_schedule(cfg, probe.weight_count());
    std::string out = "round,remaining_params\n";
    for (std::size_t t = 1; t <= cfg.rounds; ++t)
        out += std::to_string(t) + "," + std::to_string(schedule::remaining_params(spec, t)) +
               "\n";
    return out;
}

} // namespace fedmap::runner
