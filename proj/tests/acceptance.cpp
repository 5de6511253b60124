// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance <path-to-fourcast-cli> <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "fourcast/collection.hpp"
#include "fourcast/experiment.hpp"
#include "fourcast/forecaster.hpp"
#include "fourcast/spectral_codec.hpp"
#include "oracles.hpp"

using namespace fourcast;

namespace {

// Tolerances and limits.
constexpr double kParsevalRel = 1e-9;
constexpr double kParsevalSeconds = 5.0;
constexpr double kBoundSeconds = 30.0;
constexpr double kOracleSlack = 1e-12;  // disagreement allowed between two energy summations
constexpr double kLosslessAbs = 1e-9;
constexpr double kMinSavings = 0.60;
constexpr double kGradRel = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kPaddingAbs = 1e-10;
constexpr double kBaselineGain = 0.25;   // both models at least 25% below the hold baseline
constexpr double kBenchmarkSlack = 0.20; // frequency RMSE within 20% of the benchmark
constexpr std::size_t kLatencyReps = 200;

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void verdict(bool ok, int id, const char* name, const std::string& detail) {
    std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

/// 10,000 nonnegative batches of length 72: half uniform noise, half seasonal.
std::vector<std::vector<double>> corpus() {
    std::mt19937_64 rng(20240);
    std::vector<std::vector<double>> out;
    out.reserve(10000);
    for (int i = 0; i < 10000; ++i)
        out.push_back(i % 2 ? oracle::uniform_batch(rng, 72) : oracle::seasonal_batch(rng, 72));
    return out;
}

void parseval() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t n : {8u, 16u, 72u, 128u, 512u})
        for (int i = 0; i < 1000; ++i) {
            const auto u = oracle::uniform_batch(rng, n);
            const auto full = oracle::mirror(dft(u).coefficients, n);
            double spectral = 0.0;
            for (const auto& c : full) spectral += std::norm(c);
            spectral /= static_cast<double>(n);
            const double e = oracle::energy(u);
            worst = std::max(worst, std::abs(e - spectral) / e);
            ++cases;
        }
    const double secs = seconds_since(t0);
    verdict(worst <= kParsevalRel && secs < kParsevalSeconds, 1, "Parseval suite",
            fmt("%zu batches, worst relative gap %.3g (tol %.0g), %.2fs (limit %.0fs)", cases, worst, kParsevalRel, secs,
                kParsevalSeconds));
}

void rmse_bound(const std::vector<std::vector<double>>& batches) {
    const auto t0 = Clock::now();
    std::size_t violations = 0, cases = 0;
    double tightest = 0.0;
    for (const auto& u : batches) {
        const auto spec = dft(u);
        for (double eps : {0.005, 0.01, 0.05, 0.1}) {
            const auto err = truncation_rmse(u, truncate_by_rmse(spec, eps));
            if (err > eps) ++violations;
            tightest = std::max(tightest, err / eps);
            ++cases;
        }
    }
    const double secs = seconds_since(t0);
    verdict(violations == 0 && secs < kBoundSeconds, 2, "RMSE bound",
            fmt("%zu cases, %zu violations, max realised/eps %.6f, %.2fs (limit %.0fs)", cases, violations, tightest,
                secs, kBoundSeconds));
}

void energy_threshold(const std::vector<std::vector<double>>& batches) {
    std::size_t below = 0, not_minimal = 0, cases = 0;
    for (const auto& u : batches) {
        const auto full = oracle::naive_dft(u);
        const double total = oracle::energy(u);
        const auto spec = dft(u);
        for (double e : {0.5, 0.7, 0.9, 0.99}) {
            const std::size_t k = truncate_by_energy(spec, e).k();
            if (oracle::kept_energy(full, k) / total < e - kOracleSlack) ++below;
            if (k > 1 && oracle::kept_energy(full, k - 1) / total >= e + kOracleSlack) ++not_minimal;
            ++cases;
        }
    }
    verdict(below == 0 && not_minimal == 0, 3, "Energy threshold",
            fmt("%zu cases, %zu below threshold, %zu non-minimal (oracle slack %.0g)", cases, below, not_minimal,
                kOracleSlack));
}

void lossless(const std::vector<std::vector<double>>& batches) {
    double worst = 0.0;
    for (const auto& u : batches) {
        const auto back = reconstruct(truncate_by_energy(dft(u), 1.0));
        for (std::size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(back[i] - u[i]));
    }
    verdict(worst <= kLosslessAbs, 4, "Lossless limit",
            fmt("%zu batches at e=1, max abs error %.3g (tol %.0g)", batches.size(), worst, kLosslessAbs));
}

void savings() {
    ExperimentSpec spec;
    spec.levels = {0.5, 0.7, 0.9, 0.95};
    const auto rows = run_truncation_sweep(spec, prepare_trace(spec));
    bool monotone = true;
    double at_09 = NAN;
    std::string listing;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i && rows[i].report.savings > rows[i - 1].report.savings) monotone = false;
        if (rows[i].level == 0.9) at_09 = rows[i].report.savings;
        listing += fmt(" e=%.2f:%.4f", rows[i].level, rows[i].report.savings);
    }
    verdict(at_09 >= kMinSavings && monotone, 5, "Communication savings",
            fmt("savings at e=0.9 %.4f (min %.2f), nonincreasing in e: %s;%s", at_09, kMinSavings,
                monotone ? "yes" : "no", listing.c_str()));
}

WindowSample tiny_sample(std::mt19937_64& rng, const WindowConfig& win) {
    std::uniform_int_distribution<std::size_t> kd(1, win.n / 2 + 1);
    WindowSample s;
    for (std::size_t b = 0; b < win.w; ++b) {
        const auto batch = oracle::seasonal_batch(rng, win.n);
        s.raw_inputs.insert(s.raw_inputs.end(), batch.begin(), batch.end());
        s.inputs.push_back(truncate_at(dft(batch), kd(rng)));
    }
    s.target = oracle::seasonal_batch(rng, win.s);
    return s;
}

void gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(606);
    const WindowConfig win{2, 8, 8};
    struct Variant {
        ModelKind kind;
        UpdateRule rule;
        std::size_t hidden;
    };
    double worst_overall = 0.0;
    std::string worst_where;
    std::size_t tensors_checked = 0;
    for (const auto v : {Variant{ModelKind::frequency, UpdateRule::standard, 4},
                         Variant{ModelKind::frequency, UpdateRule::sigmoid_wrapped, 4},
                         Variant{ModelKind::time, UpdateRule::standard, 4},
                         Variant{ModelKind::time, UpdateRule::sigmoid_wrapped, 3}}) {
        ModelConfig cfg;
        cfg.kind = v.kind;
        cfg.rule = v.rule;
        cfg.window = win;
        cfg.hidden = v.hidden;
        GruForecaster m(cfg, 4242);
        std::vector<WindowSample> samples;
        for (int i = 0; i < 4; ++i) samples.push_back(tiny_sample(rng, win));
        const auto batch = bucketize(m, samples, samples.size(), 0).front();
        std::vector<double> grad, scratch;
        m.loss_and_gradient(batch, grad);
        auto params = m.parameters();
        for (const auto& t : m.tensors()) {
            double worst = 0.0;
            for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
                const double saved = params[i];
                params[i] = saved + kGradStep;
                const double up = m.loss_and_gradient(batch, scratch);
                params[i] = saved - kGradStep;
                const double down = m.loss_and_gradient(batch, scratch);
                params[i] = saved;
                const double fd = (up - down) / (2 * kGradStep);
                worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-7}));
            }
            ++tensors_checked;
            if (worst > worst_overall) {
                worst_overall = worst;
                worst_where = to_string(v.kind) + "/" + to_string(v.rule) + "/" + t.name;
            }
        }
    }
    const double secs = seconds_since(t0);
    verdict(worst_overall <= kGradRel && secs < kGradSeconds, 6, "Gradient checks",
            fmt("%zu tensors over 4 variants, worst relative error %.3g at %s (tol %.0g), %.2fs (limit %.0fs)",
                tensors_checked, worst_overall, worst_where.c_str(), kGradRel, secs, kGradSeconds));
}

void padding() {
    std::mt19937_64 rng(707);
    const WindowConfig win{2, 8, 8};
    ModelConfig cfg;
    cfg.window = win;
    cfg.hidden = 4;
    const GruForecaster m(cfg, 99);
    std::vector<WindowSample> samples;
    for (int i = 0; i < 100; ++i) samples.push_back(tiny_sample(rng, win));
    double worst = 0.0;
    std::size_t padded_buckets = 0;
    for (const auto& mb : bucketize(m, samples, 16, 5)) {
        for (const auto& seq : mb.sequences)
            if (std::any_of(seq.lengths.begin(), seq.lengths.end(), [&](std::size_t l) { return l != seq.steps; })) {
                ++padded_buckets;
                break;
            }
        const auto preds = m.predict_batch(mb);
        for (std::size_t b = 0; b < mb.size(); ++b) {
            const auto alone = m.forecast(samples[mb.sample_ids[b]]);
            for (std::size_t j = 0; j < alone.size(); ++j) worst = std::max(worst, std::abs(alone[j] - preds[b][j]));
        }
    }
    verdict(worst <= kPaddingAbs && padded_buckets > 0, 7, "Padding equivalence",
            fmt("100 samples, %zu padded buckets, max abs gap %.3g (tol %.0g)", padded_buckets, worst, kPaddingAbs));
}

void forecasting() {
    ExperimentSpec spec;
    spec.synth.machines = 5;
    spec.synth.days = 10;
    spec.levels = {0.5, 0.9};
    spec.train.epochs = 200;
    spec.latency_repetitions = kLatencyReps;
    const auto t0 = Clock::now();
    const auto report = run_train_eval(spec, prepare_trace(spec));
    const double secs = seconds_since(t0);

    const ModelRow *freq09 = nullptr, *freq05 = nullptr, *time = nullptr;
    for (const auto& r : report.rows) {
        if (r.model == "time") time = &r;
        else if (r.level == 0.9) freq09 = &r;
        else if (r.level == 0.5) freq05 = &r;
    }
    if (!freq09 || !freq05 || !time) {
        verdict(false, 8, "Forecast sanity", "missing report rows");
        verdict(false, 9, "Inference speed", "missing report rows");
        return;
    }
    const double hold = time->hold_rmse;
    const double limit = (1.0 - kBaselineGain) * hold;
    const bool ok8 = freq09->status == "ok" && time->status == "ok" && freq09->test_rmse <= limit &&
                     time->test_rmse <= limit && freq09->test_rmse <= (1.0 + kBenchmarkSlack) * time->test_rmse;
    verdict(ok8, 8, "Forecast sanity",
            fmt("test RMSE frequency(e=0.9) %.5f, time %.5f, hold %.5f (limit %.5f); frequency/time %.3f (max %.2f); "
                "%zu train / %zu test windows, %.1fs",
                freq09->test_rmse, time->test_rmse, hold, limit, freq09->test_rmse / time->test_rmse,
                1.0 + kBenchmarkSlack, report.train_samples, report.test_samples, secs));

    const double ratio = freq05->latency.median_seconds / time->latency.median_seconds;
    const double param_gap = std::abs(static_cast<double>(freq05->parameters) - static_cast<double>(time->parameters)) /
                             static_cast<double>(freq05->parameters);
    verdict(ratio < 1.0 && freq05->latency.repetitions >= 100, 9, "Inference speed",
            fmt("median frequency(e=0.5) %.3g s vs time %.3g s over %zu reps, ratio %.4f; parameters %zu vs %zu (gap %.1f%%)",
                freq05->latency.median_seconds, time->latency.median_seconds, freq05->latency.repetitions, ratio,
                freq05->parameters, time->parameters, 100.0 * param_gap));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void protocol_determinism(const std::string& cli, const std::filesystem::path& scratch) {
    std::vector<std::filesystem::path> dirs{scratch / "run_a", scratch / "run_b"};
    bool ran = true;
    for (const auto& d : dirs) {
        std::filesystem::remove_all(d);
        const std::string cmd = "\"" + cli + "\" simulate --e 0.9 --seed 7 --set synth.machines=8 --out \"" +
                                d.string() + "\" > /dev/null";
        ran = ran && std::system(cmd.c_str()) == 0;
    }
    std::size_t identical = 0;
    std::size_t bytes = 0;
    for (const char* f : {"messages.bin", "report.json", "report.csv"}) {
        const auto a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
        if (!a.empty() && a == b) ++identical;
        if (std::string(f) == "messages.bin") bytes = a.size();
    }
    verdict(ran && identical == 3, 10, "Protocol determinism",
            fmt("two CLI simulate runs: %zu/3 outputs byte-identical, message stream %zu bytes", identical, bytes));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <fourcast-cli> <scratch-dir>\n", argv[0]);
        return 2;
    }
    const std::filesystem::path scratch(argv[2]);
    std::filesystem::create_directories(scratch);

    parseval();
    const auto batches = corpus();
    rmse_bound(batches);
    energy_threshold(batches);
    lossless(batches);
    savings();
    gradients();
    padding();
    forecasting();
    protocol_determinism(argv[1], scratch);

    std::printf("%d of 10 criteria failed\n", failures);
    return failures ? 1 : 0;
}
