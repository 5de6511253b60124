#include "fourcast/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "fourcast/error.hpp"
#include "fourcast/kv_config.hpp"
#include "text_format.hpp"

namespace fourcast {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        fields.push_back(a == std::string::npos ? std::string{} : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::int64_t parse_timestamp(const std::string& text, const std::string& where) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    if (auto [ptr, ec] = std::from_chars(text.data(), end, value); ec == std::errc{} && ptr == end) return value;
    double real = 0.0;
    if (auto [ptr, ec] = std::from_chars(text.data(), end, real);
        ec == std::errc{} && ptr == end && std::isfinite(real) && real == std::floor(real))
        return static_cast<std::int64_t>(real);
    throw IngestError(where + ": timestamp '" + text + "' is not an integer number of seconds");
}

double parse_utilisation(const std::string& text, const char* column, const std::string& where) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw IngestError(where + ": " + column + " '" + text + "' is not a finite number");
    if (value < 0.0 || value > 1.0)
        throw IngestError(where + ": " + column + " " + text + " lies outside [0, 1]");
    return value;
}

}  // namespace

std::vector<std::string> Trace::machine_ids() const {
    std::vector<std::string> ids;
    ids.reserve(machines.size());
    for (const auto& [id, series] : machines) ids.push_back(id);
    return ids;
}

std::vector<std::vector<double>> Trace::cpu_series() const {
    std::vector<std::vector<double>> out;
    out.reserve(machines.size());
    for (const auto& [id, series] : machines) out.push_back(series.cpu);
    return out;
}

Trace Trace::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > length()) throw InvalidInput("trace slice out of range");
    Trace out;
    out.sampling_period = sampling_period;
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& [id, series] : machines) {
        auto& dst = out.machines[id];
        dst.cpu.assign(series.cpu.begin() + static_cast<std::ptrdiff_t>(begin),
                       series.cpu.begin() + static_cast<std::ptrdiff_t>(end));
        dst.mem.assign(series.mem.begin() + static_cast<std::ptrdiff_t>(begin),
                       series.mem.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

void Trace::validate() const {
    if (sampling_period <= 0) throw InvalidInput("sampling period must be positive");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (timestamps[i] - timestamps[i - 1] != sampling_period)
            throw InvalidInput("timestamps are not uniformly spaced at index " + std::to_string(i));
    for (const auto& [id, series] : machines) {
        if (series.cpu.size() != length() || series.mem.size() != length())
            throw InvalidInput("machine '" + id + "' is not aligned to the timestamp grid");
        for (const auto* channel : {&series.cpu, &series.mem})
            for (double v : *channel)
                if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("machine '" + id + "' has utilisation outside [0, 1]");
    }
}

Trace parse_trace(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw IngestError(source + ": empty trace file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_fields(line) != std::vector<std::string>{"timestamp", "machine_id", "cpu_util", "mem_util"})
        throw IngestError(source + ": row 1: expected header 'timestamp,machine_id,cpu_util,mem_util'");

    std::map<std::string, std::map<std::int64_t, std::pair<double, double>>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = source + ": row " + std::to_string(row);
        const auto fields = split_fields(line);
        if (fields.size() != 4) throw IngestError(where + ": expected 4 fields, found " + std::to_string(fields.size()));
        if (fields[1].empty()) throw IngestError(where + ": empty machine_id");
        const auto ts = parse_timestamp(fields[0], where);
        const double cpu = parse_utilisation(fields[2], "cpu_util", where);
        const double mem = parse_utilisation(fields[3], "mem_util", where);
        if (!rows[fields[1]].emplace(ts, std::make_pair(cpu, mem)).second)
            throw IngestError(where + ": duplicate entry for machine '" + fields[1] + "' at timestamp " + fields[0]);
    }
    if (rows.empty()) throw IngestError(source + ": trace holds no rows");

    Trace trace;
    const auto& grid = rows.begin()->second;
    for (const auto& [ts, values] : grid) trace.timestamps.push_back(ts);
    if (trace.timestamps.size() < 2) throw IngestError(source + ": at least two timestamps are required");
    trace.sampling_period = trace.timestamps[1] - trace.timestamps[0];
    for (std::size_t i = 1; i < trace.timestamps.size(); ++i)
        if (trace.timestamps[i] - trace.timestamps[i - 1] != trace.sampling_period)
            throw IngestError(source + ": timestamp grid is not uniform near " + std::to_string(trace.timestamps[i]));

    for (const auto& [id, series] : rows) {
        if (series.size() != trace.timestamps.size())
            throw IngestError(source + ": ragged grid: machine '" + id + "' has " + std::to_string(series.size()) +
                              " rows, expected " + std::to_string(trace.timestamps.size()));
        auto& dst = trace.machines[id];
        std::size_t i = 0;
        for (const auto& [ts, values] : series) {
            if (ts != trace.timestamps[i])
                throw IngestError(source + ": ragged grid: machine '" + id + "' has timestamp " + std::to_string(ts) +
                                  " off the shared grid");
            dst.cpu.push_back(values.first);
            dst.mem.push_back(values.second);
            ++i;
        }
    }
    return trace;
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open trace file '" + path + "'");
    return parse_trace(in, path);
}

void write_trace(const Trace& trace, std::ostream& out) {
    out << "timestamp,machine_id,cpu_util,mem_util\n";
    for (std::size_t i = 0; i < trace.length(); ++i)
        for (const auto& [id, series] : trace.machines)
            out << trace.timestamps[i] << ',' << id << ',' << detail::fmt_double(series.cpu[i]) << ','
                << detail::fmt_double(series.mem[i]) << '\n';
}

void save_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write trace file '" + path + "'");
    write_trace(trace, out);
    if (!out) throw IngestError("failed while writing trace file '" + path + "'");
}

Trace resample(const Trace& trace, std::int64_t period) {
    if (period <= 0 || period % trace.sampling_period != 0)
        throw InvalidInput("resampling period " + std::to_string(period) + " s is not a multiple of the source period " +
                           std::to_string(trace.sampling_period) + " s");
    const auto m = static_cast<std::size_t>(period / trace.sampling_period);
    const std::size_t steps = trace.length() / m;
    Trace out;
    out.sampling_period = period;
    for (std::size_t i = 0; i < steps; ++i) out.timestamps.push_back(trace.timestamps[i * m]);
    auto window_means = [&](const std::vector<double>& src) {
        std::vector<double> dst(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < m; ++j) sum += src[i * m + j];
            dst[i] = sum / static_cast<double>(m);
        }
        return dst;
    };
    for (const auto& [id, series] : trace.machines) out.machines[id] = {window_means(series.cpu), window_means(series.mem)};
    return out;
}

void SplitSpec::validate() const {
    for (double f : {train, validation, test})
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidInput("split fractions must lie in [0, 1]");
    if (std::abs(train + validation + test - 1.0) > 1e-9) throw InvalidInput("split fractions must sum to 1");
}

TraceSplit split(const Trace& trace, const SplitSpec& spec, std::size_t min_portion) {
    spec.validate();
    const std::size_t total = trace.length();
    // The small slack keeps e.g. 0.29 * 100 from flooring to 28.
    auto portion = [&](double fraction) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(total) * fraction + 1e-9));
    };
    const std::size_t a = portion(spec.train);
    const std::size_t b = portion(spec.validation);
    if (a + b > total) throw InvalidInput("split fractions exceed the trace length");
    const std::size_t c = total - a - b;
    for (const auto& [name, len] : {std::pair{"train", a}, {"validation", b}, {"test", c}})
        if (len < min_portion)
            throw InvalidInput(std::string("split error: ") + name + " portion holds " + std::to_string(len) +
                               " steps, at least " + std::to_string(min_portion) + " required");
    return {trace.slice(0, a), trace.slice(a, a + b), trace.slice(a + b, total)};
}

std::vector<WindowSample> build_windows(const std::vector<double>& series, const WindowConfig& window,
                                        const TruncationCriterion& criterion) {
    window.validate();
    validate(criterion);
    const std::size_t span = window.l() + window.s;
    if (series.size() < span)
        throw InvalidInput("series of " + std::to_string(series.size()) + " steps is shorter than one window (" +
                           std::to_string(span) + ")");
    std::vector<WindowSample> samples;
    for (std::size_t start = 0; start + span <= series.size(); start += window.n) {
        WindowSample sample;
        const auto* base = series.data() + start;
        for (std::size_t j = 0; j < window.w; ++j)
            sample.inputs.push_back(truncate(dft({base + j * window.n, window.n}), criterion));
        sample.raw_inputs.assign(base, base + window.l());
        sample.target.assign(base + window.l(), base + span);
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<WindowSample> build_windows(const Trace& trace, const WindowConfig& window,
                                        const TruncationCriterion& criterion) {
    std::vector<WindowSample> all;
    for (const auto& [id, series] : trace.machines) {
        auto samples = build_windows(series.cpu, window, criterion);
        std::move(samples.begin(), samples.end(), std::back_inserter(all));
    }
    return all;
}

void SynthConfig::validate() const {
    if (machines < 1) throw InvalidInput("synthetic trace needs at least one machine");
    if (days < 1 || period < 2) throw InvalidInput("synthetic trace needs at least one day of two or more steps");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidInput("noise level must be non-negative");
    if (!std::isfinite(mean)) throw InvalidInput("mean level must be finite");
    if (sampling_period <= 0) throw InvalidInput("sampling period must be positive");
}

SynthConfig SynthConfig::from(const KeyValueConfig& kv) {
    SynthConfig c;
    c.machines = kv.get_uint("synth.machines", c.machines);
    c.days = kv.get_uint("synth.days", c.days);
    c.period = kv.get_uint("synth.period", c.period);
    c.amplitudes = kv.get_doubles("synth.amplitudes", c.amplitudes);
    c.noise = kv.get_double("synth.noise", c.noise);
    c.mean = kv.get_double("synth.mean", c.mean);
    c.seed = kv.get_uint("synth.seed", c.seed);
    c.sampling_period = static_cast<std::int64_t>(kv.get_uint("synth.sampling_period", 300));
    c.validate();
    return c;
}

Trace synth_trace(const SynthConfig& config) {
    config.validate();
    const std::size_t steps = config.days * config.period;
    const std::size_t width = std::max<std::size_t>(3, std::to_string(config.machines - 1).size());
    Trace trace;
    trace.sampling_period = config.sampling_period;
    for (std::size_t t = 0; t < steps; ++t) trace.timestamps.push_back(static_cast<std::int64_t>(t) * config.sampling_period);

    const double omega = 2.0 * std::numbers::pi / static_cast<double>(config.period);
    for (std::size_t m = 0; m < config.machines; ++m) {
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(m)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<double> phases(config.amplitudes.size());
        for (auto& ph : phases) ph = phase_dist(rng);
        const double mem_phase = phase_dist(rng);
        const double first = config.amplitudes.empty() ? 0.0 : config.amplitudes.front();

        std::string id = std::to_string(m);
        id = "m" + std::string(width - id.size(), '0') + id;
        auto& series = trace.machines[id];
        series.cpu.resize(steps);
        series.mem.resize(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            const double tt = static_cast<double>(t);
            double cpu = config.mean;
            for (std::size_t h = 0; h < config.amplitudes.size(); ++h)
                cpu += config.amplitudes[h] * std::sin(omega * static_cast<double>(h + 1) * tt + phases[h]);
            cpu += config.noise * noise(rng);
            const double mem = 0.5 + 0.5 * first * std::sin(omega * tt + mem_phase) + 0.5 * config.noise * noise(rng);
            series.cpu[t] = std::clamp(cpu, 0.0, 1.0);
            series.mem[t] = std::clamp(mem, 0.0, 1.0);
        }
    }
    return trace;
}

Trace subsample_machines(const Trace& trace, std::size_t count, std::uint64_t seed) {
    if (count == 0 || count > trace.machines.size())
        throw InvalidInput("cannot sample " + std::to_string(count) + " of " + std::to_string(trace.machines.size()) +
                           " machines");
    auto ids = trace.machine_ids();
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(count);
    Trace out;
    out.timestamps = trace.timestamps;
    out.sampling_period = trace.sampling_period;
    for (const auto& id : ids) out.machines[id] = trace.machines.at(id);
    return out;
}

}  // namespace fourcast
