#include "fourcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "fourcast/error.hpp"
#include "text_format.hpp"

namespace fourcast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string level_tag(CriterionKind kind, double level) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s%g", kind == CriterionKind::energy ? "e" : "eps", level);
    return buf;
}

std::string criterion_name(CriterionKind kind) { return kind == CriterionKind::energy ? "energy" : "rmse"; }

void write_file(const std::filesystem::path& path, const std::string& content, std::ios::openmode mode = {}) {
    std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed while writing '" + path.string() + "'");
}

struct TrainJob {
    ModelConfig config;
    const std::vector<WindowSample>* train = nullptr;
    const std::vector<WindowSample>* validation = nullptr;
    std::uint64_t stream = 0;  // distinguishes the RNG streams of jobs

    // results
    std::unique_ptr<GruForecaster> model;
    TrainConfig used;
    std::vector<EpochLog> curve;
    std::string status = "ok";
};

double best_validation(const std::vector<EpochLog>& curve) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : curve) best = std::min(best, row.val_rmse);
    return best;
}

void run_job(TrainJob& job, const ExperimentSpec& spec) {
    std::vector<TrainConfig> trials;
    TrainConfig base = spec.train;
    base.restore_best = true;
    base.seed = spec.seed + job.stream;
    if (spec.tune_trials == 0) {
        trials.push_back(base);
    } else {
        std::seed_seq seq{spec.seed, job.stream, std::uint64_t{0x7475}};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> log_lr(std::log(1e-3), std::log(3e-2));
        const double decays[] = {0.9, 0.95, 0.99};
        const std::size_t batches[] = {8, 16, 32};
        std::uniform_int_distribution<std::size_t> pick(0, 2);
        for (std::size_t t = 0; t < spec.tune_trials; ++t) {
            TrainConfig trial = base;
            trial.optimizer.learning_rate = std::exp(log_lr(rng));
            trial.optimizer.decay = decays[pick(rng)];
            trial.batch_size = batches[pick(rng)];
            trials.push_back(trial);
        }
    }

    double best = std::numeric_limits<double>::infinity();
    std::string last_failure;
    for (const auto& trial : trials) {
        auto model = std::make_unique<GruForecaster>(job.config, spec.seed * 1000003 + job.stream);
        try {
            auto curve = train(*model, *job.train, trial, *job.validation);
            const double score = best_validation(curve);
            if (!job.model || score < best) {
                best = score;
                job.model = std::move(model);
                job.used = trial;
                job.curve = std::move(curve);
            }
        } catch (const TrainingError& e) {
            last_failure = "diverged at epoch " + std::to_string(e.epoch());
        }
    }
    if (!job.model) {
        job.status = last_failure;
        job.used = trials.front();
    }
}

void run_jobs(std::vector<TrainJob>& jobs, const ExperimentSpec& spec) {
    std::size_t workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                run_job(jobs[i], spec);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double hold_rmse(const std::vector<WindowSample>& samples, const WindowConfig& window) {
    std::vector<std::vector<double>> preds, targets;
    for (const auto& s : samples) {
        preds.push_back(hold_forecast(s, window));
        targets.push_back(s.target);
    }
    return prediction_rmse(preds, targets);
}

}  // namespace

void ExperimentSpec::validate() const {
    window.validate();
    if (levels.empty()) throw InvalidInput("at least one threshold level is required");
    for (double level : levels) fourcast::validate(criterion_at(level));
    if (hidden < 1) throw InvalidInput("hidden size must be positive");
    if (train.batch_size < 1) throw InvalidInput("mini-batch size must be positive");
    if (train.epochs < 1) throw InvalidInput("at least one epoch is required");
    if (!(train.optimizer.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
    if (!(train.optimizer.decay >= 0.0 && train.optimizer.decay < 1.0)) throw InvalidInput("decay must lie in [0, 1)");
    if (!(train.final_lr_scale > 0.0 && train.final_lr_scale <= 1.0))
        throw InvalidInput("final_lr_scale must lie in (0, 1]");
    if (latency_repetitions < 1) throw InvalidInput("latency repetitions must be positive");
    if (resample_period < 0) throw InvalidInput("resampling period must be non-negative");
    if (out_dir.empty()) throw InvalidInput("output directory must not be empty");
    split.validate();
}

ExperimentSpec ExperimentSpec::from(const KeyValueConfig& kv) {
    ExperimentSpec spec;
    spec.trace_path = kv.get_string("trace", "");
    spec.synth = SynthConfig::from(kv);
    spec.resample_period = static_cast<std::int64_t>(kv.get_uint("resample", 0));
    const auto kind = kv.get_string("criterion", "energy");
    if (kind == "energy") {
        spec.criterion = CriterionKind::energy;
        spec.levels = kv.get_doubles("e", spec.levels);
    } else if (kind == "rmse") {
        spec.criterion = CriterionKind::rmse;
        spec.levels = kv.get_doubles("eps", {0.01});
    } else {
        throw InvalidInput("criterion must be 'energy' or 'rmse', got '" + kind + "'");
    }
    spec.window.n = kv.get_uint("n", spec.window.n);
    spec.window.w = kv.get_uint("w", spec.window.w);
    spec.window.s = kv.get_uint("horizon", spec.window.s);
    spec.hidden = kv.get_uint("hidden", spec.hidden);
    spec.rule = parse_update_rule(kv.get_string("rule", to_string(spec.rule)));
    spec.train.epochs = kv.get_uint("epochs", spec.train.epochs);
    spec.train.batch_size = kv.get_uint("batch_size", spec.train.batch_size);
    spec.train.optimizer.learning_rate = kv.get_double("lr", spec.train.optimizer.learning_rate);
    spec.train.optimizer.decay = kv.get_double("decay", spec.train.optimizer.decay);
    spec.train.final_lr_scale = kv.get_double("final_lr_scale", spec.train.final_lr_scale);
    spec.seed = kv.get_uint("seed", spec.seed);
    spec.train.seed = spec.seed;
    spec.train.rule = spec.rule;
    spec.machines = kv.get_uint("machines", spec.machines);
    if (kv.has("split")) {
        const auto f = kv.get_doubles("split", {});
        if (f.size() != 3) throw InvalidInput("split takes three fractions");
        spec.split = {f[0], f[1], f[2]};
    }
    spec.tune_trials = kv.get_uint("tune_trials", spec.tune_trials);
    spec.latency_repetitions = kv.get_uint("latency_reps", spec.latency_repetitions);
    spec.threads = kv.get_uint("threads", spec.threads);
    spec.out_dir = kv.get_string("out", spec.out_dir);
    spec.validate();
    return spec;
}

TruncationCriterion ExperimentSpec::criterion_at(double level) const {
    if (criterion == CriterionKind::energy) return EnergyThreshold{level};
    return RmseBound{level};
}

CollectionConfig ExperimentSpec::collection(double level) const {
    CollectionConfig c;
    c.n = window.n;
    c.criterion = criterion_at(level);
    c.seed = seed;
    return c;
}

Trace prepare_trace(const ExperimentSpec& spec) {
    Trace trace = spec.trace_path.empty() ? synth_trace(spec.synth) : load_trace(spec.trace_path);
    if (spec.resample_period > 0 && spec.resample_period != trace.sampling_period)
        trace = resample(trace, spec.resample_period);
    if (spec.machines > 0 && spec.machines != trace.machines.size())
        trace = subsample_machines(trace, spec.machines, spec.seed);
    return trace;
}

std::vector<std::vector<double>> whole_batches(const Trace& trace, std::size_t n) {
    const std::size_t usable = trace.length() / n * n;
    if (usable == 0)
        throw InvalidInput("trace of " + std::to_string(trace.length()) + " steps holds no complete batch of " +
                           std::to_string(n));
    auto series = trace.cpu_series();
    for (auto& s : series) s.resize(usable);
    return series;
}

std::vector<TruncationRow> run_truncation_sweep(const ExperimentSpec& spec, const Trace& trace) {
    const auto series = whole_batches(trace, spec.window.n);
    std::vector<TruncationRow> rows;
    for (double level : spec.levels) rows.push_back({level, run_simulation(series, spec.collection(level)).report});
    return rows;
}

std::vector<double> hold_forecast(const WindowSample& sample, const WindowConfig& window) {
    if (sample.raw_inputs.size() != window.l()) throw InvalidInput("raw window has the wrong length");
    std::vector<double> out(window.s);
    const std::size_t base = window.l() - window.n;
    for (std::size_t i = 0; i < window.s; ++i) out[i] = sample.raw_inputs[base + i % window.n];
    return out;
}

TrainEvalReport run_train_eval(const ExperimentSpec& spec, const Trace& trace) {
    spec.validate();
    const auto& win = spec.window;
    const auto parts = split(trace, spec.split, win.l() + win.s);
    const auto sweep = run_truncation_sweep(spec, trace);

    struct LevelData {
        std::vector<WindowSample> train, validation, test;
    };
    std::vector<LevelData> data(spec.levels.size());
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
        const auto criterion = spec.criterion_at(spec.levels[i]);
        data[i] = {build_windows(parts.train, win, criterion), build_windows(parts.validation, win, criterion),
                   build_windows(parts.test, win, criterion)};
    }

    ModelConfig freq;
    freq.kind = ModelKind::frequency;
    freq.window = win;
    freq.hidden = spec.hidden;
    freq.rule = spec.rule;
    ModelConfig time = freq;
    time.kind = ModelKind::time;
    time.hidden = matching_time_hidden(freq);

    std::vector<TrainJob> jobs(spec.levels.size() + 1);
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
        jobs[i].config = freq;
        jobs[i].train = &data[i].train;
        jobs[i].validation = &data[i].validation;
        jobs[i].stream = i + 1;
    }
    // The benchmark reads raw windows only, so any level's windows serve.
    auto& bench = jobs.back();
    bench.config = time;
    bench.train = &data.front().train;
    bench.validation = &data.front().validation;
    bench.stream = 0;
    run_jobs(jobs, spec);

    TrainEvalReport report;
    report.train_samples = data.front().train.size();
    report.test_samples = data.front().test.size();
    const double hold = hold_rmse(data.front().test, win);

    // Latency runs after training, one model at a time on this thread.
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& job = jobs[j];
        const bool is_freq = j < spec.levels.size();
        const auto& test = is_freq ? data[j].test : data.front().test;
        ModelRow row;
        row.model = to_string(job.config.kind);
        row.level = is_freq ? spec.levels[j] : kNaN;
        row.savings = is_freq ? sweep[j].report.savings : kNaN;
        row.truncation_rmse = is_freq ? sweep[j].report.overall_truncation_rmse() : kNaN;
        row.hold_rmse = hold;
        row.hidden = job.config.hidden;
        row.parameters = GruForecaster::parameter_count(job.config);
        row.learning_rate = job.used.optimizer.learning_rate;
        row.decay = job.used.optimizer.decay;
        row.batch_size = job.used.batch_size;
        row.status = job.status;
        row.curve = job.curve;
        row.test_rmse = kNaN;
        row.latency = {kNaN, kNaN, 0};
        if (job.model) {
            row.test_rmse = evaluate_rmse(*job.model, test);
            row.latency = timed_inference(*job.model, test.front(), spec.latency_repetitions);
            std::ostringstream ckpt;
            job.model->save(ckpt);
            row.checkpoint = ckpt.str();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string truncation_csv(const std::vector<TruncationRow>& rows, CriterionKind criterion) {
    using detail::fmt_double;
    std::string out = "#schema=fourcast.truncate.v1\n";
    out += "criterion,level,savings,mean_truncation_rmse,max_truncation_rmse,floats_sent,floats_raw,header_bytes,messages\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out += criterion_name(criterion) + ',' + fmt_double(row.level) + ',' + fmt_double(r.savings) + ',' +
               fmt_double(r.overall_truncation_rmse()) + ',' + fmt_double(r.max_truncation_rmse) + ',' +
               std::to_string(r.floats_sent) + ',' + std::to_string(r.floats_raw) + ',' +
               std::to_string(r.header_bytes) + ',' + std::to_string(r.messages) + '\n';
    }
    return out;
}

std::string train_eval_csv(const TrainEvalReport& report) {
    using detail::fmt_double;
    std::string out = "#schema=fourcast.train_eval.v1\n";
    out += "model,level,savings,truncation_rmse,test_rmse,hold_rmse,hidden,parameters,learning_rate,decay,batch_size,"
           "latency_median_s,latency_mean_s,status\n";
    for (const auto& r : report.rows) {
        out += r.model + ',' + fmt_double(r.level) + ',' + fmt_double(r.savings) + ',' + fmt_double(r.truncation_rmse) +
               ',' + fmt_double(r.test_rmse) + ',' + fmt_double(r.hold_rmse) + ',' + std::to_string(r.hidden) + ',' +
               std::to_string(r.parameters) + ',' + fmt_double(r.learning_rate) + ',' + fmt_double(r.decay) + ',' +
               std::to_string(r.batch_size) + ',' + fmt_double(r.latency.median_seconds) + ',' +
               fmt_double(r.latency.mean_seconds) + ',' + r.status + '\n';
    }
    return out;
}

std::string train_eval_json(const TrainEvalReport& report) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["schema"] = "fourcast.train_eval.v1";
    j["train_samples"] = report.train_samples;
    j["test_samples"] = report.test_samples;
    j["nondeterministic_fields"] = {"latency_median_s", "latency_mean_s"};
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["model"] = r.model;
        row["level"] = num(r.level);
        row["savings"] = num(r.savings);
        row["truncation_rmse"] = num(r.truncation_rmse);
        row["test_rmse"] = num(r.test_rmse);
        row["hold_rmse"] = num(r.hold_rmse);
        row["hidden"] = r.hidden;
        row["parameters"] = r.parameters;
        row["learning_rate"] = r.learning_rate;
        row["decay"] = r.decay;
        row["batch_size"] = r.batch_size;
        row["latency_median_s"] = num(r.latency.median_seconds);
        row["latency_mean_s"] = num(r.latency.mean_seconds);
        row["latency_repetitions"] = r.latency.repetitions;
        row["status"] = r.status;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

CommandOutcome run_command(const std::string& command, const ExperimentSpec& spec) {
    spec.validate();
    const std::filesystem::path dir(spec.out_dir);
    std::filesystem::create_directories(dir);
    CommandOutcome outcome;
    auto emit = [&](const std::string& name, const std::string& content, std::ios::openmode mode = {}) {
        write_file(dir / name, content, mode);
        outcome.files.push_back((dir / name).string());
    };

    if (command == "synth") {
        const auto trace = prepare_trace(spec);
        std::ostringstream csv;
        write_trace(trace, csv);
        emit("trace.csv", csv.str());
        outcome.summary = "synth: " + std::to_string(trace.machines.size()) + " machines x " +
                          std::to_string(trace.length()) + " steps";
    } else if (command == "truncate") {
        const auto rows = run_truncation_sweep(spec, prepare_trace(spec));
        emit("truncate.csv", truncation_csv(rows, spec.criterion));
        outcome.summary = "truncate:";
        for (const auto& r : rows) {
            char buf[96];
            std::snprintf(buf, sizeof buf, " %s savings=%.4f rmse=%.5f", level_tag(spec.criterion, r.level).c_str(),
                          r.report.savings, r.report.overall_truncation_rmse());
            outcome.summary += buf;
        }
    } else if (command == "simulate") {
        const double level = spec.levels.front();
        const auto result = run_simulation(whole_batches(prepare_trace(spec), spec.window.n), spec.collection(level));
        emit("messages.bin", std::string(result.message_stream.begin(), result.message_stream.end()), std::ios::binary);
        emit("report.json", result.report.to_json());
        emit("report.csv", "#schema=fourcast.communication.v1\n" + result.report.csv_header() + "\n" +
                               result.report.csv_row() + "\n");
        char buf[128];
        std::snprintf(buf, sizeof buf, "simulate: %s messages=%llu savings=%.4f", level_tag(spec.criterion, level).c_str(),
                      static_cast<unsigned long long>(result.report.messages), result.report.savings);
        outcome.summary = buf;
    } else if (command == "train-eval") {
        const auto report = run_train_eval(spec, prepare_trace(spec));
        emit("metrics.csv", train_eval_csv(report));
        emit("metrics.json", train_eval_json(report));
        outcome.summary = "train-eval:";
        for (const auto& r : report.rows) {
            const std::string tag = std::isnan(r.level) ? r.model : r.model + "_" + level_tag(spec.criterion, r.level);
            std::ostringstream curve;
            write_loss_curve(curve, r.curve);
            emit("loss_" + tag + ".csv", curve.str());
            if (!r.checkpoint.empty()) emit(tag + ".ckpt", r.checkpoint);
            char buf[160];
            std::snprintf(buf, sizeof buf, " %s test_rmse=%.5f hold_rmse=%.5f median_latency=%.3gs [%s]", tag.c_str(),
                          r.test_rmse, r.hold_rmse, r.latency.median_seconds, r.status.c_str());
            outcome.summary += buf;
        }
    } else {
        throw InvalidInput("unknown command '" + command + "' (expected synth, truncate, simulate or train-eval)");
    }
    return outcome;
}

}  // namespace fourcast
