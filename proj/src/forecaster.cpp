#include "fourcast/forecaster.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "fourcast/error.hpp"

namespace fourcast {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Raw pointers into one parameter (or gradient) vector, one per tensor.
template <typename T>
struct CellTensors {
    T* wz;
    T* wr;
    T* wh;
    T* vz;
    T* vr;
    T* vh;
    T* bz;
    T* br;
    T* bh;
    T* head_w;
    T* head_b;
};

template <typename T>
CellTensors<T> bind(const std::vector<TensorInfo>& tensors, T* base) {
    auto at = [&](std::size_t i) { return base + tensors[i].offset; };
    return {at(0), at(1), at(2), at(3), at(4), at(5), at(6), at(7), at(8), at(9), at(10)};
}

struct CellShape {
    std::size_t hidden;
    std::size_t input_dim;
    UpdateRule rule;
};

/// z, r, c and h for one step. `rh` is scratch of length hidden.
void cell_forward(const CellTensors<const double>& p, const CellShape& shape, const double* x,
                  const double* h_prev, double* z, double* r, double* c, double* h, double* rh) {
    const std::size_t H = shape.hidden;
    const std::size_t D = shape.input_dim;
    for (std::size_t i = 0; i < H; ++i) {
        double az = p.bz[i];
        double ar = p.br[i];
        for (std::size_t d = 0; d < D; ++d) {
            az += p.wz[i * D + d] * x[d];
            ar += p.wr[i * D + d] * x[d];
        }
        const double* vz = p.vz + i * H;
        const double* vr = p.vr + i * H;
        for (std::size_t j = 0; j < H; ++j) {
            az += vz[j] * h_prev[j];
            ar += vr[j] * h_prev[j];
        }
        z[i] = sigmoid(az);
        r[i] = sigmoid(ar);
    }
    for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h_prev[j];
    for (std::size_t i = 0; i < H; ++i) {
        double ac = p.bh[i];
        for (std::size_t d = 0; d < D; ++d) ac += p.wh[i * D + d] * x[d];
        const double* vh = p.vh + i * H;
        for (std::size_t j = 0; j < H; ++j) ac += vh[j] * rh[j];
        c[i] = std::tanh(ac);
        const double g = z[i] * h_prev[i] + (1.0 - z[i]) * c[i];
        h[i] = shape.rule == UpdateRule::standard ? g : sigmoid(g);
    }
}

/// Backpropagates dh through one step: accumulates parameter gradients into
/// `g` and writes the gradient w.r.t. h_prev into `dh_prev`. `scratch` needs
/// 4*hidden entries.
void cell_backward(const CellTensors<const double>& p, const CellTensors<double>& g, const CellShape& shape,
                   const double* x, const double* h_prev, const double* z, const double* r, const double* c,
                   const double* h, const double* dh, double* dh_prev, double* scratch) {
    const std::size_t H = shape.hidden;
    const std::size_t D = shape.input_dim;
    double* dac = scratch;
    double* daz = scratch + H;
    double* dar = scratch + 2 * H;
    double* drh = scratch + 3 * H;

    for (std::size_t i = 0; i < H; ++i) {
        const double dg = shape.rule == UpdateRule::standard ? dh[i] : dh[i] * h[i] * (1.0 - h[i]);
        const double dz = dg * (h_prev[i] - c[i]);
        const double dc = dg * (1.0 - z[i]);
        dh_prev[i] = dg * z[i];
        dac[i] = dc * (1.0 - c[i] * c[i]);
        daz[i] = dz * z[i] * (1.0 - z[i]);
    }

    std::fill(drh, drh + H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
        g.bh[i] += dac[i];
        for (std::size_t d = 0; d < D; ++d) g.wh[i * D + d] += dac[i] * x[d];
        const double* vh = p.vh + i * H;
        double* gvh = g.vh + i * H;
        for (std::size_t j = 0; j < H; ++j) {
            gvh[j] += dac[i] * r[j] * h_prev[j];
            drh[j] += vh[j] * dac[i];
        }
    }
    for (std::size_t j = 0; j < H; ++j) {
        const double dr = drh[j] * h_prev[j];
        dh_prev[j] += drh[j] * r[j];
        dar[j] = dr * r[j] * (1.0 - r[j]);
    }

    for (std::size_t i = 0; i < H; ++i) {
        g.bz[i] += daz[i];
        g.br[i] += dar[i];
        for (std::size_t d = 0; d < D; ++d) {
            g.wz[i * D + d] += daz[i] * x[d];
            g.wr[i * D + d] += dar[i] * x[d];
        }
        const double* vz = p.vz + i * H;
        const double* vr = p.vr + i * H;
        double* gvz = g.vz + i * H;
        double* gvr = g.vr + i * H;
        for (std::size_t j = 0; j < H; ++j) {
            gvz[j] += daz[i] * h_prev[j];
            gvr[j] += dar[i] * h_prev[j];
            dh_prev[j] += vz[j] * daz[i] + vr[j] * dar[i];
        }
    }
}

void apply_head(const CellTensors<const double>& p, std::size_t outputs, std::size_t width,
                const double* concat, double* out) {
    for (std::size_t o = 0; o < outputs; ++o) {
        double acc = p.head_b[o];
        const double* row = p.head_w + o * width;
        for (std::size_t q = 0; q < width; ++q) acc += row[q] * concat[q];
        out[o] = acc;
    }
}

/// Head output to time-domain predictions. Frequency heads emit s/2+1
/// interleaved bins in units of 1/s; DC and Nyquist imaginary parts are dropped.
std::vector<double> decode_head(const ModelConfig& config, std::span<const double> out) {
    const std::size_t s = config.window.s;
    if (config.kind == ModelKind::time) return {out.begin(), out.end()};
    Spectrum spectrum;
    spectrum.n = s;
    spectrum.coefficients.resize(s / 2 + 1);
    const double scale = static_cast<double>(s);
    for (std::size_t m = 0; m <= s / 2; ++m)
        spectrum.coefficients[m] = {scale * out[2 * m], scale * out[2 * m + 1]};
    spectrum.coefficients.front().imag(0.0);
    spectrum.coefficients.back().imag(0.0);
    return idft(spectrum);
}

/// Gradient of the loss w.r.t. the head output, given dL/dpredictions.
void head_gradient(const ModelConfig& config, std::span<const double> d_pred, double* d_out) {
    const std::size_t s = config.window.s;
    if (config.kind == ModelKind::time) {
        std::copy(d_pred.begin(), d_pred.end(), d_out);
        return;
    }
    // pred_i = re_0 + re_N (-1)^i + 2 sum_m (re_m cos - im_m sin), so the
    // adjoint is one forward DFT of the incoming gradient.
    const Spectrum g = dft(d_pred);
    for (std::size_t m = 0; m <= s / 2; ++m) {
        const bool edge = (m == 0 || m == s / 2);
        const double mult = edge ? 1.0 : 2.0;
        d_out[2 * m] = mult * g.coefficients[m].real();
        d_out[2 * m + 1] = edge ? 0.0 : mult * g.coefficients[m].imag();
    }
}

std::string read_token(std::istream& in, const char* what) {
    std::string token;
    if (!(in >> token)) throw InvalidInput(std::string("checkpoint truncated while reading ") + what);
    return token;
}

}  // namespace

void WindowConfig::validate() const {
    if (w < 1) throw InvalidInput("window must hold at least one batch");
    if (n < 2 || n % 2 != 0) throw InvalidInput("batch length must be even and at least 2");
    if (s < 2 || s % 2 != 0) throw InvalidInput("forecast horizon must be even and at least 2");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::frequency ? "frequency" : "time"; }

std::string to_string(UpdateRule rule) { return rule == UpdateRule::standard ? "standard" : "sigmoid-wrapped"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "frequency") return ModelKind::frequency;
    if (text == "time") return ModelKind::time;
    throw InvalidInput("unknown model kind '" + text + "'");
}

UpdateRule parse_update_rule(const std::string& text) {
    if (text == "standard" || text == "standard-gru") return UpdateRule::standard;
    if (text == "sigmoid-wrapped") return UpdateRule::sigmoid_wrapped;
    throw InvalidInput("unknown update rule '" + text + "'");
}

GruForecaster::GruForecaster(const ModelConfig& config) : config_(config) {
    config_.window.validate();
    if (config_.hidden < 1) throw InvalidInput("hidden size must be positive");
    const std::size_t H = config_.hidden;
    const std::size_t D = config_.input_dim();
    const std::size_t width = config_.sequences() * H;
    const std::size_t O = config_.head_outputs();
    std::size_t offset = 0;
    auto add = [&](const char* name, std::size_t rows, std::size_t cols) {
        tensors_.push_back({name, offset, rows, cols});
        offset += rows * cols;
    };
    add("W_z", H, D);
    add("W_r", H, D);
    add("W_h", H, D);
    add("V_z", H, H);
    add("V_r", H, H);
    add("V_h", H, H);
    add("b_z", H, 1);
    add("b_r", H, 1);
    add("b_h", H, 1);
    add("head_W", O, width);
    add("head_b", O, 1);
    params_.assign(offset, 0.0);
}

GruForecaster::GruForecaster(const ModelConfig& config, std::uint64_t seed) : GruForecaster(config) {
    std::mt19937_64 rng(seed);
    const std::size_t H = config_.hidden;
    const std::size_t width = config_.sequences() * H;
    for (const auto& t : tensors_) {
        std::size_t fan_in = H;
        if (t.name[0] == 'W') fan_in = t.cols;
        if (t.name.rfind("head", 0) == 0) fan_in = width;
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < t.size(); ++i) params_[t.offset + i] = dist(rng);
    }
}

GruForecaster GruForecaster::zeros(const ModelConfig& config) { return GruForecaster(config); }

std::size_t GruForecaster::parameter_count(const ModelConfig& config) {
    const std::size_t H = config.hidden;
    const std::size_t O = config.head_outputs();
    return 3 * (H * config.input_dim() + H * H + H) + O * config.sequences() * H + O;
}

const TensorInfo& GruForecaster::tensor(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw NotFound("no parameter tensor named '" + name + "'");
}

std::span<double> GruForecaster::parameter(const std::string& name) {
    const auto& t = tensor(name);
    return std::span<double>(params_).subspan(t.offset, t.size());
}

ModelInput GruForecaster::encode(const WindowSample& sample) const {
    const auto& win = config_.window;
    ModelInput input;
    if (config_.kind == ModelKind::frequency) {
        if (sample.inputs.size() != win.w)
            throw InvalidInput("sample holds " + std::to_string(sample.inputs.size()) + " batches, model expects " +
                               std::to_string(win.w));
        for (const auto& spec : sample.inputs) {
            if (spec.n() != win.n) throw InvalidInput("input batches disagree on batch length");
            const double scale = 1.0 / static_cast<double>(spec.n());
            std::vector<double> seq;
            seq.reserve(2 * spec.k());
            for (const auto& c : spec.coefficients()) {
                seq.push_back(c.real() * scale);
                seq.push_back(c.imag() * scale);
            }
            input.sequences.push_back(std::move(seq));
        }
    } else {
        if (sample.raw_inputs.size() != win.l())
            throw InvalidInput("raw window holds " + std::to_string(sample.raw_inputs.size()) +
                               " observations, model expects " + std::to_string(win.l()));
        input.sequences.push_back(sample.raw_inputs);
    }
    return input;
}

std::vector<double> GruForecaster::predict(const ModelInput& input) const {
    const std::size_t H = config_.hidden;
    const std::size_t D = config_.input_dim();
    const std::size_t S = config_.sequences();
    if (input.sequences.size() != S) throw InvalidInput("input sequence count does not match the model");
    const auto p = bind<const double>(tensors_, params_.data());
    const CellShape shape{H, D, config_.rule};

    std::vector<double> concat(S * H, 0.0);
    std::vector<double> h(H), next(H), z(H), r(H), c(H), rh(H);
    for (std::size_t j = 0; j < S; ++j) {
        const auto& seq = input.sequences[j];
        if (seq.empty() || seq.size() % D != 0) throw InvalidInput("malformed input sequence");
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t t = 0; t < seq.size() / D; ++t) {
            cell_forward(p, shape, seq.data() + t * D, h.data(), z.data(), r.data(), c.data(), next.data(),
                         rh.data());
            std::swap(h, next);
        }
        std::copy(h.begin(), h.end(), concat.begin() + static_cast<std::ptrdiff_t>(j * H));
    }
    std::vector<double> out(config_.head_outputs());
    apply_head(p, out.size(), S * H, concat.data(), out.data());
    return decode_head(config_, out);
}

GruForecaster::ForwardPass GruForecaster::forward(const MiniBatch& batch) const {
    const std::size_t H = config_.hidden;
    const std::size_t D = config_.input_dim();
    const std::size_t S = config_.sequences();
    const std::size_t B = batch.size();
    const std::size_t s = config_.window.s;
    if (batch.sequences.size() != S) throw InvalidInput("mini-batch sequence count does not match the model");
    const auto p = bind<const double>(tensors_, params_.data());
    const CellShape shape{H, D, config_.rule};

    ForwardPass pass;
    pass.sequences.resize(S);
    pass.concat.assign(B * S * H, 0.0);
    const std::vector<double> zero(H, 0.0);
    std::vector<double> rh(H);
    for (std::size_t j = 0; j < S; ++j) {
        const auto& seq = batch.sequences[j];
        auto& cache = pass.sequences[j];
        const std::size_t cells = seq.steps * B * H;
        cache.h_prev.assign(cells, 0.0);
        cache.z.assign(cells, 0.0);
        cache.r.assign(cells, 0.0);
        cache.c.assign(cells, 0.0);
        cache.h.assign(cells, 0.0);
        for (std::size_t t = 0; t < seq.steps; ++t) {
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t at = (t * B + b) * H;
                const double* hp = t == 0 ? zero.data() : cache.h.data() + ((t - 1) * B + b) * H;
                std::copy(hp, hp + H, cache.h_prev.data() + at);
                cell_forward(p, shape, seq.values.data() + (t * B + b) * D, hp, cache.z.data() + at,
                             cache.r.data() + at, cache.c.data() + at, cache.h.data() + at, rh.data());
            }
        }
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t last = seq.lengths[b] - 1;
            const double* h = cache.h.data() + (last * B + b) * H;
            std::copy(h, h + H, pass.concat.data() + (b * S + j) * H);
        }
    }

    pass.predictions.assign(B * s, 0.0);
    std::vector<double> out(config_.head_outputs());
    for (std::size_t b = 0; b < B; ++b) {
        apply_head(p, out.size(), S * H, pass.concat.data() + b * S * H, out.data());
        const auto pred = decode_head(config_, out);
        std::copy(pred.begin(), pred.end(), pass.predictions.begin() + static_cast<std::ptrdiff_t>(b * s));
    }
    return pass;
}

std::vector<std::vector<double>> GruForecaster::predict_batch(const MiniBatch& batch) const {
    const auto pass = forward(batch);
    const std::size_t s = config_.window.s;
    std::vector<std::vector<double>> out(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b)
        out[b].assign(pass.predictions.begin() + static_cast<std::ptrdiff_t>(b * s),
                      pass.predictions.begin() + static_cast<std::ptrdiff_t>((b + 1) * s));
    return out;
}

void GruForecaster::backward(const MiniBatch& batch, const ForwardPass& pass, std::span<double> grad) const {
    const std::size_t H = config_.hidden;
    const std::size_t D = config_.input_dim();
    const std::size_t S = config_.sequences();
    const std::size_t B = batch.size();
    const std::size_t s = config_.window.s;
    const std::size_t O = config_.head_outputs();
    const std::size_t width = S * H;
    if (grad.size() != params_.size()) throw InvalidInput("gradient buffer has the wrong size");
    const auto p = bind<const double>(tensors_, params_.data());
    const auto g = bind<double>(tensors_, grad.data());
    const CellShape shape{H, D, config_.rule};

    // Head and output transform.
    std::vector<double> d_concat(B * width, 0.0);
    std::vector<double> d_pred(s), d_out(O);
    const double scale = 2.0 / static_cast<double>(s * B);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < s; ++i)
            d_pred[i] = scale * (pass.predictions[b * s + i] - batch.targets[b * s + i]);
        head_gradient(config_, d_pred, d_out.data());
        const double* concat = pass.concat.data() + b * width;
        double* dc = d_concat.data() + b * width;
        for (std::size_t o = 0; o < O; ++o) {
            g.head_b[o] += d_out[o];
            const double* row = p.head_w + o * width;
            double* grow = g.head_w + o * width;
            for (std::size_t q = 0; q < width; ++q) {
                grow[q] += d_out[o] * concat[q];
                dc[q] += row[q] * d_out[o];
            }
        }
    }

    // Recurrence, per sequence position; padded steps beyond a sample's true
    // length never reach the head and are skipped.
    std::vector<double> dh(B * H), dh_prev(H), scratch(4 * H);
    for (std::size_t j = 0; j < S; ++j) {
        const auto& seq = batch.sequences[j];
        const auto& cache = pass.sequences[j];
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t t = seq.steps; t-- > 0;) {
            for (std::size_t b = 0; b < B; ++b) {
                if (t >= seq.lengths[b]) continue;
                double* dhb = dh.data() + b * H;
                if (t + 1 == seq.lengths[b]) {
                    const double* src = d_concat.data() + b * width + j * H;
                    for (std::size_t i = 0; i < H; ++i) dhb[i] += src[i];
                }
                const std::size_t at = (t * B + b) * H;
                cell_backward(p, g, shape, seq.values.data() + (t * B + b) * D, cache.h_prev.data() + at,
                              cache.z.data() + at, cache.r.data() + at, cache.c.data() + at, cache.h.data() + at,
                              dhb, dh_prev.data(), scratch.data());
                std::copy(dh_prev.begin(), dh_prev.end(), dhb);
            }
        }
    }
}

double GruForecaster::loss_and_gradient(const MiniBatch& batch, std::vector<double>& grad) const {
    const auto pass = forward(batch);
    grad.assign(params_.size(), 0.0);
    backward(batch, pass, grad);
    const std::size_t s = config_.window.s;
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b)
        total += mse(std::span<const double>(pass.predictions).subspan(b * s, s),
                     std::span<const double>(batch.targets).subspan(b * s, s));
    return total / static_cast<double>(batch.size());
}

void GruForecaster::save(std::ostream& out) const {
    const auto old_precision = out.precision(17);
    out << "fourcast-checkpoint 1\n";
    out << "kind " << to_string(config_.kind) << '\n';
    out << "rule " << to_string(config_.rule) << '\n';
    out << "hidden " << config_.hidden << '\n';
    out << "w " << config_.window.w << '\n';
    out << "n " << config_.window.n << '\n';
    out << "s " << config_.window.s << '\n';
    for (const auto& t : tensors_) {
        out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
        for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << params_[t.offset + i];
        out << '\n';
    }
    out.precision(old_precision);
}

GruForecaster GruForecaster::load(std::istream& in) {
    if (read_token(in, "magic") != "fourcast-checkpoint" || read_token(in, "version") != "1")
        throw InvalidInput("not a checkpoint (bad magic or version)");
    auto expect = [&](const char* key) {
        const auto got = read_token(in, key);
        if (got != key) throw InvalidInput("checkpoint expected key '" + std::string(key) + "', found '" + got + "'");
        return read_token(in, key);
    };
    ModelConfig config;
    config.kind = parse_model_kind(expect("kind"));
    config.rule = parse_update_rule(expect("rule"));
    config.hidden = std::stoul(expect("hidden"));
    config.window.w = std::stoul(expect("w"));
    config.window.n = std::stoul(expect("n"));
    config.window.s = std::stoul(expect("s"));
    GruForecaster model(config);
    for (const auto& t : model.tensors_) {
        if (read_token(in, "tensor") != "tensor") throw InvalidInput("checkpoint expected a tensor record");
        const auto name = read_token(in, "tensor name");
        const auto rows = std::stoul(read_token(in, "rows"));
        const auto cols = std::stoul(read_token(in, "cols"));
        if (name != t.name || rows != t.rows || cols != t.cols)
            throw InvalidInput("checkpoint tensor '" + name + "' does not match the configured shape");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto token = read_token(in, "tensor values");
            model.params_[t.offset + i] = std::stod(token);
        }
    }
    return model;
}

std::vector<double> cgru_step(const GruForecaster& model, std::span<const double> x, std::span<const double> h_prev) {
    const auto& config = model.config();
    const std::size_t H = config.hidden;
    if (x.size() != config.input_dim() || h_prev.size() != H)
        throw InvalidInput("cgru_step input or hidden state has the wrong shape");
    const auto p = bind<const double>(model.tensors(), model.parameters().data());
    std::vector<double> z(H), r(H), c(H), h(H), rh(H);
    cell_forward(p, {H, config.input_dim(), config.rule}, x.data(), h_prev.data(), z.data(), r.data(), c.data(),
                 h.data(), rh.data());
    return h;
}

std::size_t matching_time_hidden(const ModelConfig& frequency_config) {
    const auto target = static_cast<double>(GruForecaster::parameter_count(frequency_config));
    ModelConfig candidate = frequency_config;
    candidate.kind = ModelKind::time;
    std::size_t best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t h = 1; h <= 4 * frequency_config.hidden + 256; ++h) {
        candidate.hidden = h;
        const double gap = std::abs(static_cast<double>(GruForecaster::parameter_count(candidate)) - target);
        if (gap < best_gap) {
            best_gap = gap;
            best = h;
        }
    }
    return best;
}

std::vector<MiniBatch> bucketize(const GruForecaster& model, std::span<const WindowSample> samples,
                                 std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw InvalidInput("mini-batch size must be positive");
    const auto& config = model.config();
    const std::size_t D = config.input_dim();
    const std::size_t S = config.sequences();
    const std::size_t s = config.window.s;

    std::vector<ModelInput> inputs;
    inputs.reserve(samples.size());
    std::vector<std::size_t> total(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].target.size() != s) throw InvalidInput("sample target length differs from the horizon");
        inputs.push_back(model.encode(samples[i]));
        for (const auto& seq : inputs.back().sequences) total[i] += seq.size() / D;
    }
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total[a] < total[b]; });

    std::vector<MiniBatch> buckets;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t B = std::min(batch_size, order.size() - start);
        MiniBatch mb;
        mb.sample_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(start + B));
        mb.sequences.resize(S);
        for (std::size_t j = 0; j < S; ++j) {
            auto& seq = mb.sequences[j];
            for (std::size_t b = 0; b < B; ++b) {
                seq.lengths.push_back(inputs[mb.sample_ids[b]].sequences[j].size() / D);
                seq.steps = std::max(seq.steps, seq.lengths.back());
            }
            seq.values.assign(seq.steps * B * D, 0.0);
            for (std::size_t b = 0; b < B; ++b) {
                const auto& src = inputs[mb.sample_ids[b]].sequences[j];
                for (std::size_t t = 0; t < seq.lengths[b]; ++t)
                    for (std::size_t d = 0; d < D; ++d) seq.values[(t * B + b) * D + d] = src[t * D + d];
            }
        }
        for (const auto id : mb.sample_ids)
            mb.targets.insert(mb.targets.end(), samples[id].target.begin(), samples[id].target.end());
        buckets.push_back(std::move(mb));
    }
    std::mt19937_64 rng(seed);
    std::shuffle(buckets.begin(), buckets.end(), rng);
    return buckets;
}

double mse(std::span<const double> predictions, std::span<const double> target) {
    if (predictions.size() != target.size() || predictions.empty())
        throw InvalidInput("predictions and target differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = predictions[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(target.size());
}

double prediction_rmse(std::span<const std::vector<double>> predictions,
                       std::span<const std::vector<double>> targets) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw InvalidInput("prediction and target sets differ in size");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < predictions.size(); ++j) {
        if (predictions[j].size() != targets[j].size()) throw InvalidInput("prediction length mismatch");
        for (std::size_t i = 0; i < targets[j].size(); ++i) {
            const double d = predictions[j][i] - targets[j][i];
            sum += d * d;
        }
        count += targets[j].size();
    }
    return std::sqrt(sum / static_cast<double>(count));
}

void rmsprop_update(RmsPropState& state, std::span<double> params, std::span<const double> grads,
                    const RmsPropConfig& config) {
    if (params.size() != grads.size()) throw InvalidInput("parameter and gradient sizes differ");
    if (state.mean_square.empty()) state.mean_square.assign(params.size(), 0.0);
    if (state.mean_square.size() != params.size()) throw InvalidInput("optimiser state has the wrong size");
    const double rho = config.decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& v = state.mean_square[i];
        v = rho * v + (1.0 - rho) * g * g;
        params[i] -= config.learning_rate * g / (std::sqrt(v) + config.epsilon);
    }
}

std::vector<EpochLog> train(GruForecaster& model, std::span<const WindowSample> dataset, const TrainConfig& config,
                            std::span<const WindowSample> validation) {
    if (dataset.empty()) throw InvalidInput("training set is empty");
    if (!(config.optimizer.learning_rate >= 0.0) || !(config.optimizer.decay >= 0.0 && config.optimizer.decay < 1.0) ||
        !(config.optimizer.epsilon > 0.0) || !(config.final_lr_scale > 0.0 && config.final_lr_scale <= 1.0))
        throw InvalidInput("invalid optimiser settings");

    const auto buckets = bucketize(model, dataset, config.batch_size, config.seed);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    RmsPropState state;
    std::vector<double> grad;
    std::vector<std::size_t> order(buckets.size());
    std::vector<double> bucket_loss(buckets.size());
    std::vector<EpochLog> curve;
    std::vector<double> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    RmsPropConfig optimizer = config.optimizer;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.epochs > 1)
            optimizer.learning_rate = config.optimizer.learning_rate *
                                      std::pow(config.final_lr_scale, static_cast<double>(epoch - 1) /
                                                                          static_cast<double>(config.epochs - 1));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto idx : order) {
            const double loss = model.loss_and_gradient(buckets[idx], grad);
            if (!std::isfinite(loss))
                throw TrainingError("training diverged at epoch " + std::to_string(epoch), epoch);
            bucket_loss[idx] = loss * static_cast<double>(buckets[idx].size());
            rmsprop_update(state, model.parameters(), grad, optimizer);
        }
        // Summed in bucket order so the curve does not depend on the shuffle.
        const double train_loss =
            std::accumulate(bucket_loss.begin(), bucket_loss.end(), 0.0) / static_cast<double>(dataset.size());
        const double val = validation.empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : evaluate_rmse(model, validation);
        curve.push_back({epoch, train_loss, val});
        if (config.restore_best && val < best_val) {
            best_val = val;
            best_params.assign(model.parameters().begin(), model.parameters().end());
        }
    }
    if (!best_params.empty()) std::copy(best_params.begin(), best_params.end(), model.parameters().begin());
    return curve;
}

double evaluate_rmse(const GruForecaster& model, std::span<const WindowSample> samples) {
    std::vector<std::vector<double>> predictions, targets;
    predictions.reserve(samples.size());
    targets.reserve(samples.size());
    for (const auto& sample : samples) {
        predictions.push_back(model.forecast(sample));
        targets.push_back(sample.target);
    }
    return prediction_rmse(predictions, targets);
}

void write_loss_curve(std::ostream& out, std::span<const EpochLog> curve) {
    const auto old_precision = out.precision(17);
    out << "epoch,train_loss,val_rmse\n";
    for (const auto& row : curve) {
        out << row.epoch << ',' << row.train_loss << ',';
        if (!std::isnan(row.val_rmse)) out << row.val_rmse;
        out << '\n';
    }
    out.precision(old_precision);
}

LatencyStats timed_inference(const GruForecaster& model, const WindowSample& sample, std::size_t repetitions) {
    if (repetitions == 0) throw InvalidInput("at least one repetition is required");
    const auto input = model.encode(sample);
    volatile double sink = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(repetitions, 10); ++i) sink = sink + model.predict(input)[0];

    std::vector<double> times(repetitions);
    for (auto& t : times) {
        const auto start = std::chrono::steady_clock::now();
        sink = sink + model.predict(input)[0];
        t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(repetitions);
    std::sort(times.begin(), times.end());
    const double median = repetitions % 2 ? times[repetitions / 2]
                                          : 0.5 * (times[repetitions / 2 - 1] + times[repetitions / 2]);
    return {median, mean, repetitions};
}

}  // namespace fourcast
