#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fourcast/spectral_codec.hpp"

namespace fourcast {

/// Sliding-window geometry: w input batches of n steps (l = n*w) forecast s steps.
struct WindowConfig {
    std::size_t w = 4;
    std::size_t n = 72;
    std::size_t s = 72;

    std::size_t l() const noexcept { return n * w; }
    void validate() const;
};

/// w truncated input batches plus the raw observations that follow them.
/// `raw_inputs` keeps the untruncated window for the time-domain benchmark
/// and the hold baseline; `target` is always raw data.
struct WindowSample {
    std::vector<TruncatedSpectrum> inputs;
    std::vector<double> raw_inputs;
    std::vector<double> target;
};

/// Combination step of the recurrence. `standard` is the usual GRU convex
/// combination; `sigmoid_wrapped` additionally squashes the result through a
/// logistic function.
enum class UpdateRule { standard, sigmoid_wrapped };

/// `frequency` consumes each batch's truncated spectrum as its own sequence and
/// decodes the head output through an inverse DFT; `time` consumes the raw
/// concatenated window and emits s values directly.
enum class ModelKind { frequency, time };

struct ModelConfig {
    ModelKind kind = ModelKind::frequency;
    WindowConfig window;
    std::size_t hidden = 8;
    UpdateRule rule = UpdateRule::standard;

    std::size_t input_dim() const noexcept { return kind == ModelKind::frequency ? 2 : 1; }
    std::size_t sequences() const noexcept { return kind == ModelKind::frequency ? window.w : 1; }
    std::size_t head_outputs() const noexcept {
        return kind == ModelKind::frequency ? window.s + 2 : window.s;
    }
};

std::string to_string(ModelKind kind);
std::string to_string(UpdateRule rule);
ModelKind parse_model_kind(const std::string& text);
UpdateRule parse_update_rule(const std::string& text);

struct TensorInfo {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Model input after encoding: one flat [steps x input_dim] sequence per
/// input position. Spectral coefficients are scaled by 1/n so the DC input
/// equals the batch mean.
struct ModelInput {
    std::vector<std::vector<double>> sequences;
};

/// Padded mini-batch. For each sequence position, `values` is laid out
/// [step][sample][input_dim] over `steps` = the longest member; `lengths`
/// holds each sample's true step count.
struct MiniBatch {
    struct Sequence {
        std::size_t steps = 0;
        std::vector<std::size_t> lengths;
        std::vector<double> values;
    };

    std::vector<std::size_t> sample_ids;
    std::vector<Sequence> sequences;
    std::vector<double> targets;  // [sample][s]

    std::size_t size() const noexcept { return sample_ids.size(); }
};

/// Recurrent forecaster with a GRU cell shared across every input sequence
/// and a linear head over the concatenated final hidden states. All
/// parameters live in one flat vector described by `tensors()`.
class GruForecaster {
public:
    /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) initialisation from `seed`.
    GruForecaster(const ModelConfig& config, std::uint64_t seed);

    /// All-zero parameters.
    static GruForecaster zeros(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    const std::vector<TensorInfo>& tensors() const noexcept { return tensors_; }
    const TensorInfo& tensor(const std::string& name) const;
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    std::span<double> parameter(const std::string& name);
    std::size_t parameter_count() const noexcept { return params_.size(); }

    ModelInput encode(const WindowSample& sample) const;

    /// Single-sample forecast over unpadded sequences.
    std::vector<double> predict(const ModelInput& input) const;
    std::vector<double> forecast(const WindowSample& sample) const { return predict(encode(sample)); }

    /// Cached activations of a padded mini-batch forward pass.
    struct ForwardPass {
        struct SequenceCache {
            // Each laid out [step][sample][hidden].
            std::vector<double> h_prev, z, r, c, h;
        };
        std::vector<SequenceCache> sequences;
        std::vector<double> concat;       // [sample][sequences * hidden]
        std::vector<double> predictions;  // [sample][s]
    };

    ForwardPass forward(const MiniBatch& batch) const;

    /// Per-sample forecasts from a padded batch; each sample's hidden state is
    /// read at its true final step.
    std::vector<std::vector<double>> predict_batch(const MiniBatch& batch) const;

    /// Accumulates into `grad` the gradient of the batch-mean MSE.
    void backward(const MiniBatch& batch, const ForwardPass& pass, std::span<double> grad) const;

    /// Batch-mean MSE; fills `grad` (resized and zeroed) with its gradient.
    double loss_and_gradient(const MiniBatch& batch, std::vector<double>& grad) const;

    /// Parameter count of a configuration without building it.
    static std::size_t parameter_count(const ModelConfig& config);

    void save(std::ostream& out) const;
    static GruForecaster load(std::istream& in);

private:
    explicit GruForecaster(const ModelConfig& config);

    ModelConfig config_;
    std::vector<TensorInfo> tensors_;
    std::vector<double> params_;
};

/// One GRU cell update, exposed for testing. `x` has input_dim entries and
/// `h_prev` has hidden entries.
std::vector<double> cgru_step(const GruForecaster& model, std::span<const double> x,
                              std::span<const double> h_prev);

/// Time-domain hidden width whose parameter count is closest to the given
/// frequency model's.
std::size_t matching_time_hidden(const ModelConfig& frequency_config);

/// Pads and groups samples. Samples are ordered by total input step count,
/// cut into consecutive runs of `batch_size`, and the resulting buckets are
/// shuffled with `seed`.
std::vector<MiniBatch> bucketize(const GruForecaster& model, std::span<const WindowSample> samples,
                                 std::size_t batch_size, std::uint64_t seed);

/// Mean squared error.
double mse(std::span<const double> predictions, std::span<const double> target);

/// sqrt(sum over samples and steps of squared error / (s * samples)).
double prediction_rmse(std::span<const std::vector<double>> predictions,
                       std::span<const std::vector<double>> targets);

struct RmsPropConfig {
    double learning_rate = 0.01;
    double decay = 0.9;
    double epsilon = 1e-8;
};

struct RmsPropState {
    std::vector<double> mean_square;
};

/// v <- decay*v + (1-decay) g^2;  theta <- theta - lr * g / (sqrt(v) + epsilon).
void rmsprop_update(RmsPropState& state, std::span<double> params, std::span<const double> grads,
                    const RmsPropConfig& config);

struct TrainConfig {
    RmsPropConfig optimizer;
    std::size_t batch_size = 16;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    UpdateRule rule = UpdateRule::standard;
    /// With a validation set, finish on the parameters of the epoch with the
    /// lowest validation RMSE.
    bool restore_best = false;
    /// Learning rate of the last epoch as a fraction of the first; the rate
    /// decays geometrically in between.
    double final_lr_scale = 1.0;
};

struct EpochLog {
    std::size_t epoch;
    double train_loss;
    double val_rmse;  // NaN when no validation set was given
};

/// Mini-batch RMSprop over bucketised samples. Throws TrainingError when the
/// loss turns non-finite.
std::vector<EpochLog> train(GruForecaster& model, std::span<const WindowSample> dataset,
                            const TrainConfig& config, std::span<const WindowSample> validation = {});

/// Forecast RMSE of the model over a sample set.
double evaluate_rmse(const GruForecaster& model, std::span<const WindowSample> samples);

/// Writes "epoch,train_loss,val_rmse" rows.
void write_loss_curve(std::ostream& out, std::span<const EpochLog> curve);

struct LatencyStats {
    double median_seconds;
    double mean_seconds;
    std::size_t repetitions;
};

/// Wall-clock statistics of single-sample inference on the calling thread.
LatencyStats timed_inference(const GruForecaster& model, const WindowSample& sample,
                             std::size_t repetitions);

}  // namespace fourcast
