#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fourcast/forecaster.hpp"
#include "fourcast/spectral_codec.hpp"
#include "fourcast/wire.hpp"

namespace fourcast {

class KeyValueConfig;

struct CollectionConfig {
    std::size_t n = 72;
    double tau = 300.0;  // seconds per slot; informational only
    std::size_t p = 1;   // overwritten by the trace when simulating
    TruncationCriterion criterion = EnergyThreshold{0.9};
    std::uint64_t seed = 0;

    void validate() const;

    /// Reads keys n, tau, criterion (energy|rmse), e or eps, seed and p.
    static CollectionConfig from(const KeyValueConfig& kv);
};

/// One node running the batch-and-truncate loop.
struct NodeState {
    std::uint32_t node_id = 0;
    std::vector<double> buffer;
    std::uint32_t batch_index = 0;
    std::size_t steps_since_update = 0;
};

/// Appends one observation. Once n observations are buffered the batch is
/// transformed, truncated and returned as a message, and the buffer empties.
std::optional<UpdateMessage> node_observe(NodeState& state, double value, const CollectionConfig& config);

/// Controller-side floats accounting.
struct CommunicationLedger {
    std::uint64_t floats_sent = 0;
    std::uint64_t floats_raw = 0;
    std::uint64_t header_bytes = 0;
    std::uint64_t messages = 0;
};

class ControllerState {
public:
    struct NodeHistory {
        std::vector<TruncatedSpectrum> spectra;
        std::vector<std::vector<double>> batches;  // reconstructions clamped to [0, 1]
        std::uint64_t last_update_step = 0;        // global step just after the last batch
    };

    /// Reconstructs and records one batch. Unknown nodes are registered on
    /// first contact, which must carry batch index 0; afterwards each index
    /// must follow the previous one (ProtocolError otherwise).
    void ingest(const UpdateMessage& msg);

    /// Global-step state estimate for a node. Inside a received batch this is
    /// the reconstruction; past the last batch it is the attached model's
    /// forecast (clamped to [0, 1]) when one is attached and enough batches
    /// exist, else the last reconstructed value.
    double estimate(std::uint32_t node_id, std::uint64_t step) const;

    /// The model must be a frequency model whose window batch length matches
    /// the incoming messages.
    void attach_model(std::shared_ptr<const GruForecaster> model);

    const CommunicationLedger& ledger() const noexcept { return ledger_; }
    const std::map<std::uint32_t, NodeHistory>& nodes() const noexcept { return nodes_; }
    const NodeHistory& node(std::uint32_t node_id) const;

private:
    std::map<std::uint32_t, NodeHistory> nodes_;
    CommunicationLedger ledger_;
    std::shared_ptr<const GruForecaster> model_;
};

struct CommunicationReport {
    std::uint64_t floats_sent = 0;
    std::uint64_t floats_raw = 0;
    double savings = 0.0;  // 1 - floats_sent / floats_raw; negative when k > n/2
    std::uint64_t header_bytes = 0;
    std::uint64_t messages = 0;
    std::map<std::uint32_t, double> mean_truncation_rmse;
    double max_truncation_rmse = 0.0;

    double overall_truncation_rmse() const;

    std::string to_json() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

struct SimulationResult {
    ControllerState controller;
    CommunicationReport report;
    std::vector<std::uint8_t> message_stream;  // every encoded message in send order
    /// Per node, the unclamped truncation RMSE of each batch.
    std::map<std::uint32_t, std::vector<double>> batch_rmse;
};

/// Drives every node slot by slot in node-id order, pushing each message
/// through the wire codec to the controller. `series[i]` belongs to node i;
/// all series must share one length that is a multiple of n.
SimulationResult run_simulation(std::span<const std::vector<double>> series, const CollectionConfig& config);

}  // namespace fourcast
