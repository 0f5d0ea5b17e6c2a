#include "fedmap/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fedmap/errors.hpp"
#include "fedmap/rng.hpp"

namespace fedmap::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Parser {
    std::string origin;
    int line = 0;
    std::string key;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "': " + msg);
    }

    std::uint64_t uint(const std::string& v) const {
        if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) {
                return std::isdigit(static_cast<unsigned char>(c));
            }))
            fail("expected a non-negative integer, got '" + v + "'");
        try {
            return std::stoull(v);
        } catch (const std::exception&) {
            fail("integer out of range: '" + v + "'");
        }
    }

    double real(const std::string& v) const {
        std::size_t used = 0;
        double r = 0.0;
        try {
            r = std::stod(v, &used);
        } catch (const std::exception&) {
            fail("expected a number, got '" + v + "'");
        }
        if (used != v.size()) fail("expected a number, got '" + v + "'");
        return r;
    }

    bool boolean(const std::string& v) const {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail("expected true or false, got '" + v + "'");
    }

    std::vector<std::size_t> uint_list(const std::string& v) const {
        std::vector<std::size_t> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail("empty list element");
            out.push_back(uint(item));
        }
        return out;
    }
};

[[noreturn]] void bad_value(const std::string& key, const std::string& msg) {
    throw ConfigError("key '" + key + "': " + msg);
}

void validate(const ExperimentConfig& c) {
    if (c.clients < 1) bad_value("N", "must be at least 1");
    if (c.rounds < 1) bad_value("T", "must be at least 1");
    if (!(c.lr > 0.0)) bad_value("lr", "must be positive");
    if (c.weight_decay < 0.0) bad_value("weight_decay", "must be non-negative");
    if (c.batch_size < 1) bad_value("batch_size", "must be at least 1");
    if (c.bits_per_param != 32 && c.bits_per_param != 64)
        bad_value("bits_per_param", "must be 32 or 64");
    if (c.schedule_s < 1) bad_value("schedule.s", "must be at least 1");
    if (!(c.schedule_p_g > 0.0 && c.schedule_p_g < 1.0))
        bad_value("schedule.p_G", "must lie in (0, 1)");
    if (!(c.schedule_floor > 0.0 && c.schedule_floor <= 1.0))
        bad_value("schedule.floor_fraction", "must lie in (0, 1]");
    if (!(c.feddr.alpha > 0.0)) bad_value("feddr.alpha", "must be positive");
    if (!(c.feddr.eta > 0.0)) bad_value("feddr.eta", "must be positive");
    if (!(c.feddr.post_alpha > 0.0)) bad_value("feddr.post_alpha", "must be positive");
    if (!(c.feddr.post_eta > 0.0)) bad_value("feddr.post_eta", "must be positive");
    if (c.feddr.switch_event < 1) bad_value("feddr.switch_event", "must be at least 1");
    if (c.data.classes < 2) bad_value("data.classes", "must be at least 2");
    if (c.data.dim < 1) bad_value("data.dim", "must be at least 1");
    if (c.data.examples < c.data.classes)
        bad_value("data.examples", "must cover every class at least once");
    if (c.data.spread < 0.0) bad_value("data.spread", "must be non-negative");
    if (!(c.partition_beta > 0.0)) bad_value("partition.beta", "must be positive");
    if (!(c.partition_skew > 0.0)) bad_value("partition.skew_factor", "must be positive");
    for (std::size_t h : c.model.hidden)
        if (h < 1) bad_value("model.hidden", "layer widths must be at least 1");
}

} // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    ExperimentConfig c;
    bool saw_method = false;
    bool saw_n = false;
    bool saw_t = false;

    Parser p;
    p.origin = origin;

    std::stringstream ss(text);
    std::string raw;
    while (std::getline(ss, raw)) {
        ++p.line;
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(p.line) +
                              ": expected key=value, got '" + trim(raw) + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(p.line) + ": empty key");
        p.key = key;

        if (key == "method") {
            if (val == "fedmap")
                c.method = Method::FedMap;
            else if (val == "fedavg_dense")
                c.method = Method::FedAvgDense;
            else if (val == "federated_pruning")
                c.method = Method::FederatedPruning;
            else
                p.fail("expected fedmap, fedavg_dense or federated_pruning");
            saw_method = true;
        } else if (key == "N") {
            c.clients = p.uint(val);
            saw_n = true;
        } else if (key == "T") {
            c.rounds = p.uint(val);
            saw_t = true;
        } else if (key == "L") {
            c.local_epochs = p.uint(val);
        } else if (key == "lr") {
            c.lr = p.real(val);
        } else if (key == "weight_decay") {
            c.weight_decay = p.real(val);
        } else if (key == "batch_size") {
            c.batch_size = p.uint(val);
        } else if (key == "seed") {
            c.seed = p.uint(val);
        } else if (key == "bits_per_param") {
            c.bits_per_param = static_cast<unsigned>(p.uint(val));
        } else if (key == "schedule.kind") {
            if (val == "stepwise")
                c.schedule_kind = schedule::Kind::Stepwise;
            else if (val == "continuous")
                c.schedule_kind = schedule::Kind::Continuous;
            else
                p.fail("expected stepwise or continuous");
        } else if (key == "schedule.s") {
            c.schedule_s = p.uint(val);
        } else if (key == "schedule.p_G") {
            c.schedule_p_g = p.real(val);
        } else if (key == "schedule.floor_fraction") {
            c.schedule_floor = p.real(val);
        } else if (key == "feddr.enabled") {
            c.feddr.enabled = p.boolean(val);
        } else if (key == "feddr.alpha") {
            c.feddr.alpha = p.real(val);
        } else if (key == "feddr.eta") {
            c.feddr.eta = p.real(val);
        } else if (key == "feddr.config") {
            if (val == "none")
                c.feddr.switch_mode = FedDRSwitch::None;
            else if (val == "to_fedavg")
                c.feddr.switch_mode = FedDRSwitch::ToFedAvg;
            else if (val == "swap_params")
                c.feddr.switch_mode = FedDRSwitch::SwapParams;
            else if (val == "swap_params_weighted")
                c.feddr.switch_mode = FedDRSwitch::SwapParamsWeighted;
            else
                p.fail("expected none, to_fedavg, swap_params or swap_params_weighted");
        } else if (key == "feddr.switch_event") {
            c.feddr.switch_event = p.uint(val);
        } else if (key == "feddr.post_alpha") {
            c.feddr.post_alpha = p.real(val);
        } else if (key == "feddr.post_eta") {
            c.feddr.post_eta = p.real(val);
        } else if (key == "data.classes") {
            c.data.classes = p.uint(val);
        } else if (key == "data.dim") {
            c.data.dim = p.uint(val);
        } else if (key == "data.examples") {
            c.data.examples = p.uint(val);
        } else if (key == "data.spread") {
            c.data.spread = p.real(val);
        } else if (key == "data.export_csv") {
            c.data.export_csv = p.boolean(val);
        } else if (key == "partition.mode") {
            if (val == "iid")
                c.partition_mode = data::PartitionMode::Iid;
            else if (val == "dirichlet_label_skew")
                c.partition_mode = data::PartitionMode::DirichletLabelSkew;
            else if (val == "size_skew")
                c.partition_mode = data::PartitionMode::SizeSkew;
            else
                p.fail("expected iid, dirichlet_label_skew or size_skew");
        } else if (key == "partition.beta") {
            c.partition_beta = p.real(val);
        } else if (key == "partition.skew_factor") {
            c.partition_skew = p.real(val);
        } else if (key == "model.hidden") {
            c.model.hidden = p.uint_list(val);
        } else if (key == "model.bias") {
            c.model.bias = p.boolean(val);
        } else {
            throw ConfigError(origin + ":" + std::to_string(p.line) + ": unknown key '" + key +
                              "'");
        }
    }

    if (!saw_method) throw ConfigError("key 'method': required");
    if (!saw_n) throw ConfigError("key 'N': required");
    if (!saw_t) throw ConfigError("key 'T': required");
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

std::string dump_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["method"] = c.method == Method::FedMap         ? "fedmap"
                   : c.method == Method::FedAvgDense ? "fedavg_dense"
                                                      : "federated_pruning";
    kv["N"] = std::to_string(c.clients);
    kv["T"] = std::to_string(c.rounds);
    kv["L"] = std::to_string(c.local_epochs);
    kv["lr"] = fmt_double(c.lr);
    kv["weight_decay"] = fmt_double(c.weight_decay);
    kv["batch_size"] = std::to_string(c.batch_size);
    kv["seed"] = std::to_string(c.seed);
    kv["bits_per_param"] = std::to_string(c.bits_per_param);
    kv["schedule.kind"] =
        c.schedule_kind == schedule::Kind::Stepwise ? "stepwise" : "continuous";
    kv["schedule.s"] = std::to_string(c.schedule_s);
    kv["schedule.p_G"] = fmt_double(c.schedule_p_g);
    kv["schedule.floor_fraction"] = fmt_double(c.schedule_floor);
    kv["feddr.enabled"] = c.feddr.enabled ? "true" : "false";
    kv["feddr.alpha"] = fmt_double(c.feddr.alpha);
    kv["feddr.eta"] = fmt_double(c.feddr.eta);
    switch (c.feddr.switch_mode) {
    case FedDRSwitch::None: kv["feddr.config"] = "none"; break;
    case FedDRSwitch::ToFedAvg: kv["feddr.config"] = "to_fedavg"; break;
    case FedDRSwitch::SwapParams: kv["feddr.config"] = "swap_params"; break;
    case FedDRSwitch::SwapParamsWeighted: kv["feddr.config"] = "swap_params_weighted"; break;
    }
    kv["feddr.switch_event"] = std::to_string(c.feddr.switch_event);
    kv["feddr.post_alpha"] = fmt_double(c.feddr.post_alpha);
    kv["feddr.post_eta"] = fmt_double(c.feddr.post_eta);
    kv["data.classes"] = std::to_string(c.data.classes);
    kv["data.dim"] = std::to_string(c.data.dim);
    kv["data.examples"] = std::to_string(c.data.examples);
    kv["data.spread"] = fmt_double(c.data.spread);
    kv["data.export_csv"] = c.data.export_csv ? "true" : "false";
    switch (c.partition_mode) {
    case data::PartitionMode::Iid: kv["partition.mode"] = "iid"; break;
    case data::PartitionMode::DirichletLabelSkew:
        kv["partition.mode"] = "dirichlet_label_skew";
        break;
    case data::PartitionMode::SizeSkew: kv["partition.mode"] = "size_skew"; break;
    }
    kv["partition.beta"] = fmt_double(c.partition_beta);
    kv["partition.skew_factor"] = fmt_double(c.partition_skew);
    std::string hidden;
    for (std::size_t i = 0; i < c.model.hidden.size(); ++i) {
        if (i) hidden += ",";
        hidden += std::to_string(c.model.hidden[i]);
    }
    kv["model.hidden"] = hidden;
    kv["model.bias"] = c.model.bias ? "true" : "false";

    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += "=";
        out += v;
        out += "\n";
    }
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::uint64_t h = rng::fnv1a64(dump_config(cfg));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

schedule::ScheduleSpec make_schedule(const ExperimentConfig& cfg, std::size_t d) {
    schedule::ScheduleSpec s;
    s.kind = cfg.schedule_kind;
    s.interval = cfg.schedule_s;
    s.rate = cfg.schedule_p_g;
    s.floor_fraction = cfg.method == Method::FedAvgDense ? 1.0 : cfg.schedule_floor;
    s.total_weights = d;
    s.total_rounds = cfg.rounds;
    return s;
}

} // namespace fedmap::config
