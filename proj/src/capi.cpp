#include "fourcast/fourcast.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "fourcast/collection.hpp"
#include "fourcast/error.hpp"
#include "fourcast/experiment.hpp"
#include "fourcast/kv_config.hpp"
#include "fourcast/spectral_codec.hpp"
#include "fourcast/wire.hpp"

struct fc_controller {
    fourcast::ControllerState state;
};

struct fc_experiment {
    fourcast::KeyValueConfig config;
    std::string summary;
    std::vector<std::string> outputs;
};

namespace {

thread_local std::string last_error;

fc_status fail(fc_status status, const char* message) {
    last_error = message;
    return status;
}

template <typename F>
fc_status guarded(F&& body) {
    try {
        last_error.clear();
        return body();
    } catch (const fourcast::InvalidInput& e) {
        return fail(FC_INVALID_INPUT, e.what());
    } catch (const fourcast::ProtocolError& e) {
        return fail(FC_PROTOCOL_ERROR, e.what());
    } catch (const fourcast::NotFound& e) {
        return fail(FC_NOT_FOUND, e.what());
    } catch (const fourcast::IngestError& e) {
        return fail(FC_INGEST_ERROR, e.what());
    } catch (const fourcast::TrainingError& e) {
        return fail(FC_TRAINING_ERROR, e.what());
    } catch (const fourcast::Error& e) {
        return fail(FC_IO_ERROR, e.what());
    } catch (const std::bad_alloc&) {
        return fail(FC_INTERNAL_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(FC_INTERNAL_ERROR, e.what());
    } catch (...) {
        return fail(FC_INTERNAL_ERROR, "unknown error");
    }
}

fc_status need(bool ok, const char* what) {
    if (!ok) throw fourcast::InvalidInput(std::string("null or empty argument: ") + what);
    return FC_OK;
}

std::vector<fourcast::Complex> read_bins(const double* bins, std::size_t k) {
    std::vector<fourcast::Complex> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = {bins[2 * i], bins[2 * i + 1]};
    return out;
}

void write_bins(std::span<const fourcast::Complex> in, double* bins) {
    for (std::size_t i = 0; i < in.size(); ++i) {
        bins[2 * i] = in[i].real();
        bins[2 * i + 1] = in[i].imag();
    }
}

fc_status truncate_with(const double* values, std::size_t n, const fourcast::TruncationCriterion& criterion,
                        double* bins, std::size_t* k) {
    need(values && bins && k, "values, bins, k");
    const auto spectrum = fourcast::dft(std::span<const double>(values, n));
    const auto truncated = fourcast::truncate(spectrum, criterion);
    write_bins(truncated.coefficients(), bins);
    *k = truncated.k();
    return FC_OK;
}

}  // namespace

extern "C" {

const char* fc_version(void) { return "1.0.0"; }

const char* fc_status_name(fc_status status) {
    switch (status) {
    case FC_OK: return "ok";
    case FC_INVALID_INPUT: return "invalid input";
    case FC_PROTOCOL_ERROR: return "protocol error";
    case FC_NOT_FOUND: return "not found";
    case FC_INGEST_ERROR: return "ingest error";
    case FC_TRAINING_ERROR: return "training error";
    case FC_IO_ERROR: return "i/o error";
    case FC_BUFFER_TOO_SMALL: return "buffer too small";
    case FC_INTERNAL_ERROR: return "internal error";
    }
    return "unknown status";
}

const char* fc_last_error(void) { return last_error.c_str(); }

fc_status fc_dft(const double* values, size_t n, double* bins) {
    return guarded([&] {
        need(values && bins, "values, bins");
        write_bins(fourcast::dft(std::span<const double>(values, n)).coefficients, bins);
        return FC_OK;
    });
}

fc_status fc_reconstruct(const double* bins, size_t k, size_t n, double* values) {
    return guarded([&] {
        need(bins && values, "bins, values");
        const auto out = fourcast::reconstruct(fourcast::TruncatedSpectrum(read_bins(bins, k), n));
        std::memcpy(values, out.data(), n * sizeof(double));
        return FC_OK;
    });
}

fc_status fc_truncate_energy(const double* values, size_t n, double e, double* bins, size_t* k) {
    return guarded([&] { return truncate_with(values, n, fourcast::EnergyThreshold{e}, bins, k); });
}

fc_status fc_truncate_rmse(const double* values, size_t n, double eps, double* bins, size_t* k) {
    return guarded([&] { return truncate_with(values, n, fourcast::RmseBound{eps}, bins, k); });
}

fc_status fc_truncation_rmse(const double* values, size_t n, const double* bins, size_t k, double* rmse) {
    return guarded([&] {
        need(values && bins && rmse, "values, bins, rmse");
        *rmse = fourcast::truncation_rmse(std::span<const double>(values, n),
                                          fourcast::TruncatedSpectrum(read_bins(bins, k), n));
        return FC_OK;
    });
}

size_t fc_message_size(size_t k) { return fourcast::encoded_size(k); }

fc_status fc_encode_message(uint32_t node_id, uint32_t batch_index, uint16_t n, const double* bins, uint16_t k,
                            uint8_t* out, size_t capacity, size_t* written) {
    return guarded([&] {
        need(bins && out && written, "bins, out, written");
        const fourcast::UpdateMessage msg{node_id, batch_index, n, read_bins(bins, k)};
        const auto bytes = fourcast::encode_message(msg);
        *written = bytes.size();
        if (capacity < bytes.size()) return fail(FC_BUFFER_TOO_SMALL, "output buffer too small for the message");
        std::memcpy(out, bytes.data(), bytes.size());
        return FC_OK;
    });
}

fc_status fc_decode_message(const uint8_t* bytes, size_t length, uint32_t* node_id, uint32_t* batch_index,
                            uint16_t* n, uint16_t* k, double* bins, size_t capacity) {
    return guarded([&] {
        need(bytes && node_id && batch_index && n && k, "bytes and output fields");
        const auto msg = fourcast::decode_message(std::span<const uint8_t>(bytes, length));
        *node_id = msg.node_id;
        *batch_index = msg.batch_index;
        *n = msg.n;
        *k = msg.k();
        if (!bins || capacity < msg.k()) return fail(FC_BUFFER_TOO_SMALL, "coefficient buffer too small");
        write_bins(msg.coefficients, bins);
        return FC_OK;
    });
}

fc_status fc_controller_create(fc_controller** out) {
    return guarded([&] {
        need(out, "out");
        *out = new fc_controller;
        return FC_OK;
    });
}

void fc_controller_destroy(fc_controller* controller) { delete controller; }

fc_status fc_controller_ingest(fc_controller* controller, const uint8_t* bytes, size_t length) {
    return guarded([&] {
        need(controller && bytes, "controller, bytes");
        controller->state.ingest(fourcast::decode_message(std::span<const uint8_t>(bytes, length)));
        return FC_OK;
    });
}

fc_status fc_controller_estimate(const fc_controller* controller, uint32_t node_id, uint64_t step, double* value) {
    return guarded([&] {
        need(controller && value, "controller, value");
        *value = controller->state.estimate(node_id, step);
        return FC_OK;
    });
}

fc_status fc_controller_ledger(const fc_controller* controller, uint64_t* floats_sent, uint64_t* floats_raw,
                               uint64_t* messages) {
    return guarded([&] {
        need(controller, "controller");
        const auto& ledger = controller->state.ledger();
        if (floats_sent) *floats_sent = ledger.floats_sent;
        if (floats_raw) *floats_raw = ledger.floats_raw;
        if (messages) *messages = ledger.messages;
        return FC_OK;
    });
}

fc_status fc_experiment_create(fc_experiment** out) {
    return guarded([&] {
        need(out, "out");
        *out = new fc_experiment;
        return FC_OK;
    });
}

void fc_experiment_destroy(fc_experiment* experiment) { delete experiment; }

fc_status fc_experiment_load_config(fc_experiment* experiment, const char* path) {
    return guarded([&] {
        need(experiment && path, "experiment, path");
        for (const auto& [key, value] : fourcast::KeyValueConfig::load(path).entries()) experiment->config.set(key, value);
        return FC_OK;
    });
}

fc_status fc_experiment_set(fc_experiment* experiment, const char* key, const char* value) {
    return guarded([&] {
        need(experiment && key && value && *key, "experiment, key, value");
        experiment->config.set(key, value);
        return FC_OK;
    });
}

fc_status fc_experiment_run(fc_experiment* experiment, const char* command) {
    return guarded([&] {
        need(experiment && command, "experiment, command");
        const auto spec = fourcast::ExperimentSpec::from(experiment->config);
        auto outcome = fourcast::run_command(command, spec);
        experiment->summary = std::move(outcome.summary);
        experiment->outputs = std::move(outcome.files);
        return FC_OK;
    });
}

const char* fc_experiment_summary(const fc_experiment* experiment) {
    return experiment ? experiment->summary.c_str() : "";
}

size_t fc_experiment_output_count(const fc_experiment* experiment) {
    return experiment ? experiment->outputs.size() : 0;
}

const char* fc_experiment_output_path(const fc_experiment* experiment, size_t index) {
    if (!experiment || index >= experiment->outputs.size()) return nullptr;
    return experiment->outputs[index].c_str();
}

}  // extern "C"
