#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fourcast/collection.hpp"
#include "fourcast/forecaster.hpp"
#include "fourcast/kv_config.hpp"
#include "fourcast/trace.hpp"

namespace fourcast {

enum class CriterionKind { energy, rmse };

/// Everything a CLI run needs. Built from key-value text; see `from`.
struct ExperimentSpec {
    std::string trace_path;         // empty: generate from `synth`
    SynthConfig synth;
    std::int64_t resample_period = 0;  // seconds; 0 keeps the source period
    CriterionKind criterion = CriterionKind::energy;
    std::vector<double> levels{0.5, 0.7, 0.9, 0.95};  // e values, or eps values under rmse
    WindowConfig window;
    std::size_t hidden = 8;
    UpdateRule rule = UpdateRule::standard;
    TrainConfig train = [] {
        TrainConfig t;
        t.final_lr_scale = 1e-3;
        return t;
    }();
    SplitSpec split;
    std::size_t machines = 0;  // subsample size; 0 keeps every machine
    std::uint64_t seed = 1;
    std::size_t tune_trials = 0;
    std::size_t latency_repetitions = 200;
    std::size_t threads = 0;  // 0: hardware concurrency
    std::string out_dir = "out";

    void validate() const;

    /// Keys: trace, resample, criterion, e, eps, n, w, horizon, hidden, rule,
    /// epochs, batch_size, lr, decay, final_lr_scale, seed, machines, split, tune_trials,
    /// latency_reps, threads, out, plus synth.* keys.
    static ExperimentSpec from(const KeyValueConfig& kv);

    TruncationCriterion criterion_at(double level) const;
    CollectionConfig collection(double level) const;
};

/// Trace named by the spec (loaded or synthesised), resampled and subsampled.
Trace prepare_trace(const ExperimentSpec& spec);

/// CPU series cut to a whole number of batches.
std::vector<std::vector<double>> whole_batches(const Trace& trace, std::size_t n);

struct TruncationRow {
    double level;
    CommunicationReport report;
};

std::vector<TruncationRow> run_truncation_sweep(const ExperimentSpec& spec, const Trace& trace);

struct ModelRow {
    std::string model;  // "frequency" or "time"
    double level;       // NaN for the time benchmark
    double savings;     // NaN for the time benchmark
    double truncation_rmse;
    double test_rmse;
    double hold_rmse;
    std::size_t hidden;
    std::size_t parameters;
    double learning_rate;
    double decay;
    std::size_t batch_size;
    LatencyStats latency;
    std::string status;  // "ok" or a divergence note
    std::vector<EpochLog> curve;
    std::string checkpoint;  // serialised model, empty when training failed
};

struct TrainEvalReport {
    std::vector<ModelRow> rows;
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;
};

/// Trains one frequency model per level plus the time-domain benchmark and
/// scores them on the untouched test portion.
TrainEvalReport run_train_eval(const ExperimentSpec& spec, const Trace& trace);

/// Forecast that repeats the last observed batch of the raw window.
std::vector<double> hold_forecast(const WindowSample& sample, const WindowConfig& window);

/// CSV row formatting; the leading line of every file names its schema.
std::string truncation_csv(const std::vector<TruncationRow>& rows, CriterionKind criterion);
std::string train_eval_csv(const TrainEvalReport& report);
std::string train_eval_json(const TrainEvalReport& report);

struct CommandOutcome {
    std::string summary;
    std::vector<std::string> files;
};

/// Runs `synth`, `truncate`, `simulate` or `train-eval`, writing under spec.out_dir.
CommandOutcome run_command(const std::string& command, const ExperimentSpec& spec);

}  // namespace fourcast
