#include "fedmap/federation.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "fedmap/aggregation.hpp"
#include "fedmap/codec.hpp"
#include "fedmap/data.hpp"
#include "fedmap/errors.hpp"
#include "fedmap/feddr.hpp"
#include "fedmap/nn.hpp"
#include "fedmap/pruning.hpp"
#include "fedmap/rng.hpp"
#include "fedmap/schedule.hpp"

namespace fedmap::federation {

namespace {

constexpr std::uint32_t kServerId = 0xffffffffu;

struct Setup {
    data::DataSplit split;
    std::vector<Dataset> shards;
    Model init;
    schedule::ScheduleSpec sched;
    std::size_t d = 0;
};

Setup prepare(const config::ExperimentConfig& cfg) {
    Setup su;
    su.split = data::synth_blobs(cfg.data.classes, cfg.data.dim, cfg.data.examples,
                                 cfg.data.spread, rng::derive(cfg.seed, "data"));
    data::PartitionSpec ps;
    ps.mode = cfg.partition_mode;
    ps.beta = cfg.partition_beta;
    ps.skew_factor = cfg.partition_skew;
    ps.clients = cfg.clients;
    ps.seed = rng::derive(cfg.seed, "partition");
    su.shards = data::partition(su.split.train, ps);
    su.init = make_mlp(cfg.data.dim, cfg.model.hidden, cfg.data.classes,
                       rng::derive(cfg.seed, "init"), cfg.model.bias);
    su.d = su.init.weight_count();
    su.sched = config::make_schedule(cfg, su.d);
    return su;
}

std::vector<double> flat_biases(const Model& m) {
    std::vector<double> out;
    out.reserve(m.bias_count());
    for (const Layer& l : m.layers)
        out.insert(out.end(), l.bias.values.begin(), l.bias.values.end());
    return out;
}

void add_biases(Model& m, const std::vector<double>& flat, double sign) {
    std::size_t pos = 0;
    for (Layer& l : m.layers)
        for (double& b : l.bias.values) b += sign * flat[pos++];
}

void add_weights(Model& m, const LayerValues& delta, double sign) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& w = m.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += sign * delta[l][i];
    }
}

bool models_equal(const Model& a, const Model& b) {
    if (!a.congruent(b)) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.values != b.layers[l].weight.values) return false;
        if (a.layers[l].bias.values != b.layers[l].bias.values) return false;
    }
    return true;
}

// Difference a - b over weights and biases.
Model model_minus(const Model& a, const Model& b) {
    Model out = a;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        auto& w = out.layers[l].weight.values;
        const auto& wb = b.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= wb[i];
        auto& bi = out.layers[l].bias.values;
        const auto& bb = b.layers[l].bias.values;
        for (std::size_t i = 0; i < bi.size(); ++i) bi[i] -= bb[i];
    }
    return out;
}

struct ClientCtx {
    Model global;               // this client's copy of the global model
    feddr::ClientState dr;
    PruneMask mask;             // mask the client derived this round
    std::vector<std::uint8_t> upload;
    double local_accuracy = 0.0;
};

void run_clients_parallel(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static)
    for (long long k = 0; k < static_cast<long long>(n); ++k) {
        try {
            body(static_cast<std::size_t>(k));
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

RunResult fedmap_loop(const config::ExperimentConfig& cfg) {
    const Setup su = prepare(cfg);
    const std::size_t N = cfg.clients;
    const std::size_t T = cfg.rounds;

    // Round (if any) at which the hybrid behaviour changes: the configured
    // 1-based ordinal into the schedule's prune events.
    std::size_t switch_round = std::numeric_limits<std::size_t>::max();
    if (cfg.feddr.enabled && cfg.feddr.switch_mode != config::FedDRSwitch::None) {
        const std::vector<std::size_t> events = schedule::prune_events(su.sched);
        if (cfg.feddr.switch_event <= events.size())
            switch_round = events[cfg.feddr.switch_event - 1];
    }
    const auto round_reflected = [&](std::size_t t) {
        if (!cfg.feddr.enabled) return false;
        if (cfg.feddr.switch_mode == config::FedDRSwitch::ToFedAvg && t >= switch_round)
            return false;
        return true;
    };
    const auto round_params = [&](std::size_t t) {
        feddr::Params p{cfg.feddr.alpha, cfg.feddr.eta};
        if ((cfg.feddr.switch_mode == config::FedDRSwitch::SwapParams ||
             cfg.feddr.switch_mode == config::FedDRSwitch::SwapParamsWeighted) &&
            t >= switch_round) {
            p.alpha = cfg.feddr.post_alpha;
            p.eta = cfg.feddr.post_eta;
        }
        return p;
    };
    const auto round_weighted = [&](std::size_t t) {
        return cfg.feddr.enabled &&
               cfg.feddr.switch_mode == config::FedDRSwitch::SwapParamsWeighted &&
               t >= switch_round;
    };

    std::vector<ClientCtx> clients(N);
    for (ClientCtx& c : clients) {
        c.global = su.init;
        c.mask = PruneMask::ones_like(su.init);
    }
    Model server_global = su.init;

    codec::ByteLedger ledger;
    ledger.bits_per_param = cfg.bits_per_param;

    PruneMask prev_mask = PruneMask::ones_like(su.init); // mask the broadcast was packed with
    std::size_t prev_k = su.d;
    std::vector<std::uint8_t> broadcast;
    bool have_broadcast = false;
    bool broadcast_reflected = false; // semantics of the pending broadcast

    RunResult result;
    result.final_global = su.init;
    result.total_weights = su.d;

    for (std::size_t t = 1; t <= T; ++t) {
        ledger.begin_round();
        const std::size_t k_t = schedule::remaining_params(su.sched, t);
        const bool reflected = round_reflected(t);
        const feddr::Params params = round_params(t);
        const double apply_sign = broadcast_reflected ? 1.0 : -1.0;

        run_clients_parallel(N, [&](std::size_t k) {
            ClientCtx& c = clients[k];
            if (have_broadcast) {
                const codec::SparsePayload p = codec::decode_payload(broadcast, cfg.bits_per_param);
                const LayerValues dw = codec::rfm(p.values, prev_mask);
                add_weights(c.global, dw, apply_sign);
                add_biases(c.global, p.biases, apply_sign);
            }
            pruning::PruneResult pr = pruning::prune(c.global, k_t);
            c.mask = std::move(pr.mask);
            c.global = std::move(pr.model);

            nn::Hyper hyper;
            hyper.lr = cfg.lr;
            hyper.weight_decay = cfg.weight_decay;
            hyper.batch_size = cfg.batch_size;
            hyper.shuffle_seed = rng::shuffle_seed(cfg.seed, k, t);

            Model delta;
            Model local;
            if (reflected) {
                if (!c.dr.initialized) {
                    c.dr.theta_y = c.global;
                    c.dr.theta_local_prev = c.global;
                    c.dr.theta_x_prev = c.global;
                    c.dr.initialized = true;
                }
                const Model theta_y = feddr::update_intermediate(
                    c.dr.theta_y, c.dr.theta_local_prev, c.global, c.mask, params.alpha);
                nn::Proximal prox;
                prox.center = &theta_y;
                prox.eta = params.eta;
                local = nn::train_local(theta_y, c.mask, su.shards[k], cfg.local_epochs, hyper,
                                        prox);
                const Model theta_x = feddr::reflect(local, theta_y);
                delta = feddr::delta(theta_x, c.dr.theta_x_prev, c.mask);
                c.dr.theta_y = theta_y;
                c.dr.theta_local_prev = local;
                c.dr.theta_x_prev = theta_x;
            } else {
                c.dr.initialized = false; // a later switch back would re-anchor
                local = nn::train_local(c.global, c.mask, su.shards[k], cfg.local_epochs, hyper,
                                        std::nullopt);
                delta = model_minus(c.global, local);
            }
            c.local_accuracy = nn::evaluate(local, su.split.test).accuracy;

            codec::SparsePayload up;
            up.round = static_cast<std::uint32_t>(t);
            up.client_id = static_cast<std::uint32_t>(k);
            up.values = codec::rwz(weight_values(delta), c.mask);
            up.biases = flat_biases(delta);
            c.upload = codec::encode_payload(up, cfg.bits_per_param);
        });

        // The server walks the same reconstruction path and must land on the
        // same model and mask as every client.
        if (have_broadcast) {
            const codec::SparsePayload p = codec::decode_payload(broadcast, cfg.bits_per_param);
            const LayerValues dw = codec::rfm(p.values, prev_mask);
            add_weights(server_global, dw, apply_sign);
            add_biases(server_global, p.biases, apply_sign);
        }
        pruning::PruneResult server_pr = pruning::prune(server_global, k_t);
        const PruneMask mask_t = std::move(server_pr.mask);
        server_global = std::move(server_pr.model);
        for (const ClientCtx& c : clients) {
            if (!(c.mask == mask_t) || !models_equal(c.global, server_global))
                throw StructuralError("round " + std::to_string(t) +
                                      ": client/server reconstructions diverged");
        }

        // Aggregate uploads in client id order.
        std::vector<std::vector<double>> value_rows(N);
        std::vector<std::vector<double>> bias_rows(N);
        for (std::size_t k = 0; k < N; ++k) {
            const codec::SparsePayload p =
                codec::decode_payload(clients[k].upload, cfg.bits_per_param);
            if (p.client_id != k || p.round != t)
                throw StructuralError("round " + std::to_string(t) + ": misrouted payload");
            value_rows[k] = p.values;
            bias_rows[k] = p.biases;
        }
        std::optional<std::vector<double>> weights;
        if (round_weighted(t)) {
            weights.emplace(N);
            double total = 0.0;
            for (std::size_t k = 0; k < N; ++k) total += static_cast<double>(su.shards[k].labels.size());
            for (std::size_t k = 0; k < N; ++k)
                (*weights)[k] = static_cast<double>(su.shards[k].labels.size()) / total;
        }
        const std::vector<double> mean_values =
            aggregation::average_values(value_rows, weights ? &*weights : nullptr);
        const std::vector<double> mean_biases =
            aggregation::average_values(bias_rows, weights ? &*weights : nullptr);

        codec::SparsePayload down;
        down.round = static_cast<std::uint32_t>(t);
        down.client_id = kServerId;
        down.values = mean_values;
        down.biases = mean_biases;
        broadcast = codec::encode_payload(down, cfg.bits_per_param);
        have_broadcast = true;
        broadcast_reflected = reflected;

        ledger = codec::account(ledger, k_t, codec::Direction::Up, false, su.d);
        ledger = codec::account(ledger, k_t, codec::Direction::Down, false, su.d);

        // Post-aggregation global model, exactly what each client will
        // reconstruct at the start of the next round.
        Model eval_model = server_global;
        {
            const codec::SparsePayload p = codec::decode_payload(broadcast, cfg.bits_per_param);
            const LayerValues dw = codec::rfm(p.values, mask_t);
            add_weights(eval_model, dw, reflected ? 1.0 : -1.0);
            add_biases(eval_model, p.biases, reflected ? 1.0 : -1.0);
        }

        metrics::RoundMetrics row;
        row.round = t;
        row.global_test_accuracy = nn::evaluate(eval_model, su.split.test).accuracy;
        double acc_sum = 0.0;
        for (const ClientCtx& c : clients) acc_sum += c.local_accuracy;
        row.mean_client_accuracy = acc_sum / static_cast<double>(N);
        row.remaining_params = k_t;
        row.remaining_fraction = static_cast<double>(k_t) / static_cast<double>(su.d);
        row.uplink_bytes_per_client = ledger.uplink_bytes_per_client;
        row.downlink_bytes = ledger.downlink_bytes;
        row.cumulative_bytes = ledger.cumulative_bytes;
        row.prune_event = k_t < prev_k;
        result.rounds.push_back(row);

        if (row.prune_event) result.event_masks.emplace_back(t, mask_t);
        result.final_global = eval_model;
        prev_mask = mask_t;
        prev_k = k_t;
    }
    return result;
}

RunResult federated_pruning_loop(const config::ExperimentConfig& cfg) {
    const Setup su = prepare(cfg);
    const std::size_t N = cfg.clients;
    const std::size_t T = cfg.rounds;

    Model shadow = su.init; // dense; pruned positions keep their frozen values
    PruneMask mask = PruneMask::ones_like(su.init);
    std::size_t prev_count = su.d;

    codec::ByteLedger ledger;
    ledger.bits_per_param = cfg.bits_per_param;

    RunResult result;
    result.final_global = su.init;
    result.total_weights = su.d;

    struct BaselineCtx {
        std::vector<std::uint8_t> upload;
        double local_accuracy = 0.0;
    };
    std::vector<BaselineCtx> ctx(N);

    for (std::size_t t = 1; t <= T; ++t) {
        ledger.begin_round();
        const std::size_t k_t = schedule::remaining_params(su.sched, t);
        if (t % su.sched.interval == 0) {
            // Rerank over every position of the dense shadow; frozen weights
            // compete again, so previously pruned positions may return.
            mask = pruning::prune(shadow, k_t).mask;
            result.event_masks.emplace_back(t, mask);
        }
        const std::size_t sent = mask.nonzero_count();

        codec::SparsePayload down;
        down.round = static_cast<std::uint32_t>(t);
        down.client_id = kServerId;
        down.values = codec::rwz(weight_values(shadow), mask);
        down.biases = flat_biases(shadow);
        const std::vector<std::uint8_t> broadcast =
            codec::encode_payload(down, cfg.bits_per_param);
        ledger = codec::account(ledger, sent, codec::Direction::Down, true, su.d);

        run_clients_parallel(N, [&](std::size_t k) {
            const codec::SparsePayload p = codec::decode_payload(broadcast, cfg.bits_per_param);
            Model start = su.init.zeros_like();
            set_weight_values(start, codec::rfm(p.values, mask));
            std::size_t pos = 0;
            for (Layer& l : start.layers)
                for (double& b : l.bias.values) b = p.biases[pos++];

            nn::Hyper hyper;
            hyper.lr = cfg.lr;
            hyper.weight_decay = cfg.weight_decay;
            hyper.batch_size = cfg.batch_size;
            hyper.shuffle_seed = rng::shuffle_seed(cfg.seed, k, t);
            const Model local =
                nn::train_local(start, mask, su.shards[k], cfg.local_epochs, hyper, std::nullopt);
            ctx[k].local_accuracy = nn::evaluate(local, su.split.test).accuracy;

            const Model delta = model_minus(local, start);
            codec::SparsePayload up;
            up.round = static_cast<std::uint32_t>(t);
            up.client_id = static_cast<std::uint32_t>(k);
            up.values = codec::rwz(weight_values(delta), mask);
            up.biases = flat_biases(delta);
            ctx[k].upload = codec::encode_payload(up, cfg.bits_per_param);
        });
        ledger = codec::account(ledger, sent, codec::Direction::Up, false, su.d);

        std::vector<std::vector<double>> value_rows(N);
        std::vector<std::vector<double>> bias_rows(N);
        for (std::size_t k = 0; k < N; ++k) {
            const codec::SparsePayload p = codec::decode_payload(ctx[k].upload, cfg.bits_per_param);
            value_rows[k] = p.values;
            bias_rows[k] = p.biases;
        }
        const std::vector<double> mean_values = aggregation::average_values(value_rows);
        const std::vector<double> mean_biases = aggregation::average_values(bias_rows);

        // Updates land only where the mask is set; frozen positions stay put.
        const LayerValues dw = codec::rfm(mean_values, mask);
        add_weights(shadow, dw, 1.0);
        add_biases(shadow, mean_biases, 1.0);

        const Model eval_model = pruning::apply_mask(shadow, mask);

        metrics::RoundMetrics row;
        row.round = t;
        row.global_test_accuracy = nn::evaluate(eval_model, su.split.test).accuracy;
        double acc_sum = 0.0;
        for (const BaselineCtx& c : ctx) acc_sum += c.local_accuracy;
        row.mean_client_accuracy = acc_sum / static_cast<double>(N);
        row.remaining_params = sent;
        row.remaining_fraction = static_cast<double>(sent) / static_cast<double>(su.d);
        row.uplink_bytes_per_client = ledger.uplink_bytes_per_client;
        row.downlink_bytes = ledger.downlink_bytes;
        row.cumulative_bytes = ledger.cumulative_bytes;
        row.prune_event = sent < prev_count;
        result.rounds.push_back(row);
        result.final_global = eval_model;
        prev_count = sent;
    }
    return result;
}

} // namespace

RunResult run_fedmap(const config::ExperimentConfig& cfg) { return fedmap_loop(cfg); }

RunResult run_fedavg_dense(const config::ExperimentConfig& cfg) {
    // make_schedule pins the floor at 1 for this method, so the loop never
    // drops a weight.
    return fedmap_loop(cfg);
}

RunResult run_federated_pruning(const config::ExperimentConfig& cfg) {
    return federated_pruning_loop(cfg);
}

RunResult run(const config::ExperimentConfig& cfg) {
    switch (cfg.method) {
    case config::Method::FedMap: return run_fedmap(cfg);
    case config::Method::FedAvgDense: return run_fedavg_dense(cfg);
    case config::Method::FederatedPruning: return run_federated_pruning(cfg);
    }
    throw StructuralError("run: unknown method");
}

} // namespace fedmap::federation
