#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fourcast/forecaster.hpp"
#include "fourcast/spectral_codec.hpp"

namespace fourcast {

class KeyValueConfig;

struct MachineSeries {
    std::vector<double> cpu;
    std::vector<double> mem;
};

/// Per-machine utilisation on one shared, uniformly spaced timestamp grid.
struct Trace {
    std::vector<std::int64_t> timestamps;  // seconds
    std::int64_t sampling_period = 300;    // seconds
    std::map<std::string, MachineSeries> machines;

    std::size_t length() const noexcept { return timestamps.size(); }
    std::vector<std::string> machine_ids() const;
    /// CPU series in machine-id order.
    std::vector<std::vector<double>> cpu_series() const;

    /// Steps [begin, end) of every machine.
    Trace slice(std::size_t begin, std::size_t end) const;

    /// Throws InvalidInput if the grid is not uniform or any series is
    /// misaligned or out of range.
    void validate() const;
};

/// CSV with header `timestamp,machine_id,cpu_util,mem_util`; rows may come in
/// any order. Errors name the offending row (1-based line number).
Trace parse_trace(std::istream& in, const std::string& source = "<input>");
Trace load_trace(const std::string& path);

/// Rows ordered by timestamp then machine id; reals carry 17 significant digits.
void write_trace(const Trace& trace, std::ostream& out);
void save_trace(const Trace& trace, const std::string& path);

/// Mean over non-overlapping windows of period / sampling_period samples. A
/// trailing partial window is dropped.
Trace resample(const Trace& trace, std::int64_t period);

struct SplitSpec {
    double train = 0.5;
    double validation = 0.25;
    double test = 0.25;

    void validate() const;
};

struct TraceSplit {
    Trace train;
    Trace validation;
    Trace test;
};

/// Contiguous chronological split: floor(T*train), floor(T*validation), rest.
/// Throws InvalidInput if any portion is shorter than `min_portion` steps.
TraceSplit split(const Trace& trace, const SplitSpec& spec, std::size_t min_portion);

/// Windows starting at every batch offset (stride n) that leave room for the
/// horizon. Inputs are truncated per batch; targets are raw.
std::vector<WindowSample> build_windows(const std::vector<double>& series, const WindowConfig& window,
                                        const TruncationCriterion& criterion);

/// CPU windows of every machine, machines in id order.
std::vector<WindowSample> build_windows(const Trace& trace, const WindowConfig& window,
                                        const TruncationCriterion& criterion);

/// Daily-seasonal synthetic utilisation:
/// mean + sum_h A_h sin(2 pi h t / period + phase_{h,machine}) + N(0, noise^2), clipped to [0, 1].
struct SynthConfig {
    std::size_t machines = 20;
    std::size_t days = 10;
    std::size_t period = 288;  // steps per day
    std::vector<double> amplitudes{0.2, 0.08, 0.04};
    double noise = 0.05;
    double mean = 0.3;
    std::uint64_t seed = 42;
    std::int64_t sampling_period = 300;

    void validate() const;

    /// Keys under the "synth." prefix, e.g. synth.machines, synth.amplitudes.
    static SynthConfig from(const KeyValueConfig& kv);
};

Trace synth_trace(const SynthConfig& config);

/// `count` machines drawn without replacement with `seed`, kept in id order.
Trace subsample_machines(const Trace& trace, std::size_t count, std::uint64_t seed);

}  // namespace fourcast
