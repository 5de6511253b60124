#include "fourcast/collection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "fourcast/error.hpp"
#include "fourcast/kv_config.hpp"
#include "text_format.hpp"

namespace fourcast {

void CollectionConfig::validate() const {
    if (n < 2 || n % 2 != 0) throw InvalidInput("batch length n must be even and at least 2");
    if (n > std::numeric_limits<std::uint16_t>::max()) throw InvalidInput("batch length n does not fit the wire format");
    if (p < 1) throw InvalidInput("at least one node is required");
    if (!(tau > 0.0)) throw InvalidInput("slot duration tau must be positive");
    fourcast::validate(criterion);
}

CollectionConfig CollectionConfig::from(const KeyValueConfig& kv) {
    CollectionConfig config;
    config.n = kv.get_uint("n", config.n);
    config.tau = kv.get_double("tau", config.tau);
    config.p = kv.get_uint("p", config.p);
    config.seed = kv.get_uint("seed", config.seed);
    const auto kind = kv.get_string("criterion", "energy");
    if (kind == "energy")
        config.criterion = EnergyThreshold{kv.get_double("e", 0.9)};
    else if (kind == "rmse")
        config.criterion = RmseBound{kv.get_double("eps", 0.01)};
    else
        throw InvalidInput("criterion must be 'energy' or 'rmse', got '" + kind + "'");
    config.validate();
    return config;
}

std::optional<UpdateMessage> node_observe(NodeState& state, double value, const CollectionConfig& config) {
    if (!std::isfinite(value)) throw InvalidInput("non-finite observation at node " + std::to_string(state.node_id));
    if (value < 0.0 || value > 1.0)
        throw InvalidInput("observation outside [0, 1] at node " + std::to_string(state.node_id));
    state.buffer.push_back(value);
    ++state.steps_since_update;
    if (state.buffer.size() < config.n) return std::nullopt;

    const TimeSeriesBatch batch(std::move(state.buffer));
    state.buffer.clear();
    state.steps_since_update = 0;
    const auto truncated = truncate(dft(batch.values()), config.criterion);

    UpdateMessage msg;
    msg.node_id = state.node_id;
    msg.batch_index = state.batch_index++;
    msg.n = static_cast<std::uint16_t>(config.n);
    msg.coefficients.assign(truncated.coefficients().begin(), truncated.coefficients().end());
    return msg;
}

void ControllerState::ingest(const UpdateMessage& msg) {
    const auto spectrum = msg.spectrum();
    auto it = nodes_.find(msg.node_id);
    if (it == nodes_.end()) {
        if (msg.batch_index != 0)
            throw ProtocolError("first message from node " + std::to_string(msg.node_id) + " carries batch index " +
                                std::to_string(msg.batch_index));
        it = nodes_.emplace(msg.node_id, NodeHistory{}).first;
    } else {
        auto& history = it->second;
        if (msg.batch_index != history.spectra.size())
            throw ProtocolError("node " + std::to_string(msg.node_id) + " sent batch " +
                                std::to_string(msg.batch_index) + ", expected " +
                                std::to_string(history.spectra.size()));
        if (msg.n != history.spectra.front().n())
            throw ProtocolError("node " + std::to_string(msg.node_id) + " changed its batch length");
    }

    auto& history = it->second;
    auto values = reconstruct(spectrum);
    for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
    history.batches.push_back(std::move(values));
    history.spectra.push_back(spectrum);
    history.last_update_step = static_cast<std::uint64_t>(history.spectra.size()) * msg.n;

    ledger_.floats_sent += 2u * msg.coefficients.size();
    ledger_.floats_raw += msg.n;
    ledger_.header_bytes += kMessageHeaderBytes;
    ++ledger_.messages;
}

const ControllerState::NodeHistory& ControllerState::node(std::uint32_t node_id) const {
    const auto it = nodes_.find(node_id);
    if (it == nodes_.end()) throw NotFound("unknown node " + std::to_string(node_id));
    return it->second;
}

void ControllerState::attach_model(std::shared_ptr<const GruForecaster> model) {
    if (model && model->config().kind != ModelKind::frequency)
        throw InvalidInput("the controller forecasts from spectra and needs a frequency model");
    model_ = std::move(model);
}

double ControllerState::estimate(std::uint32_t node_id, std::uint64_t step) const {
    const auto& history = node(node_id);
    const std::uint64_t n = history.spectra.front().n();
    const std::uint64_t batch = step / n;
    if (batch < history.batches.size()) return history.batches[batch][step % n];

    if (model_) {
        const auto& window = model_->config().window;
        if (window.n != n) throw InvalidInput("attached model expects a different batch length");
        if (history.spectra.size() >= window.w) {
            WindowSample sample;
            sample.inputs.assign(history.spectra.end() - static_cast<std::ptrdiff_t>(window.w), history.spectra.end());
            const auto prediction = model_->forecast(sample);
            const std::uint64_t offset = std::min<std::uint64_t>(step - history.last_update_step, window.s - 1);
            return std::clamp(prediction[offset], 0.0, 1.0);
        }
    }
    return history.batches.back().back();
}

double CommunicationReport::overall_truncation_rmse() const {
    if (mean_truncation_rmse.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [node, rmse] : mean_truncation_rmse) sum += rmse;
    return sum / static_cast<double>(mean_truncation_rmse.size());
}

std::string CommunicationReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "fourcast.communication.v1";
    j["floats_sent"] = floats_sent;
    j["floats_raw"] = floats_raw;
    j["savings"] = savings;
    j["header_bytes"] = header_bytes;
    j["messages"] = messages;
    auto per_node = nlohmann::ordered_json::object();
    for (const auto& [node, rmse] : mean_truncation_rmse) per_node[std::to_string(node)] = rmse;
    j["mean_truncation_rmse"] = per_node;
    j["max_truncation_rmse"] = max_truncation_rmse;
    return j.dump(2) + "\n";
}

std::string CommunicationReport::csv_header() const {
    return "floats_sent,floats_raw,savings,header_bytes,messages,mean_truncation_rmse,max_truncation_rmse";
}

std::string CommunicationReport::csv_row() const {
    return std::to_string(floats_sent) + ',' + std::to_string(floats_raw) + ',' + detail::fmt_double(savings) + ',' +
           std::to_string(header_bytes) + ',' + std::to_string(messages) + ',' +
           detail::fmt_double(overall_truncation_rmse()) + ',' + detail::fmt_double(max_truncation_rmse);
}

SimulationResult run_simulation(std::span<const std::vector<double>> series, const CollectionConfig& config) {
    if (series.empty()) throw InvalidInput("trace holds no nodes");
    if (series.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("too many nodes");
    CollectionConfig cfg = config;
    cfg.p = series.size();
    cfg.validate();
    const std::size_t length = series.front().size();
    for (const auto& s : series)
        if (s.size() != length) throw InvalidInput("ragged trace: node series differ in length");
    if (length == 0 || length % cfg.n != 0)
        throw InvalidInput("trace length " + std::to_string(length) + " is not a positive multiple of n = " +
                           std::to_string(cfg.n));

    std::vector<NodeState> nodes(series.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].node_id = static_cast<std::uint32_t>(i);

    SimulationResult result;
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            auto msg = node_observe(nodes[i], series[i][t], cfg);
            if (!msg) continue;
            const std::size_t start = result.message_stream.size();
            encode_message_into(*msg, result.message_stream);
            const auto delivered = decode_message(std::span<const std::uint8_t>(result.message_stream).subspan(start));
            result.controller.ingest(delivered);
            const auto original = std::span<const double>(series[i]).subspan(t + 1 - cfg.n, cfg.n);
            result.batch_rmse[delivered.node_id].push_back(truncation_rmse(original, delivered.spectrum()));
        }
    }

    auto& report = result.report;
    const auto& ledger = result.controller.ledger();
    report.floats_sent = ledger.floats_sent;
    report.floats_raw = ledger.floats_raw;
    report.savings = 1.0 - static_cast<double>(ledger.floats_sent) / static_cast<double>(ledger.floats_raw);
    report.header_bytes = ledger.header_bytes;
    report.messages = ledger.messages;
    for (const auto& [node, errors] : result.batch_rmse) {
        double sum = 0.0;
        for (double e : errors) {
            sum += e;
            report.max_truncation_rmse = std::max(report.max_truncation_rmse, e);
        }
        report.mean_truncation_rmse[node] = sum / static_cast<double>(errors.size());
    }
    return result;
}

}  // namespace fourcast
