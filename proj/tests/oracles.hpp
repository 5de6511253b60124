#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's transform or model code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

/// Direct O(n^2) evaluation of U_f = sum_i u_i exp(-j 2 pi i f / n), full spectrum.
inline std::vector<Complex> naive_dft(const std::vector<double>& u) {
    const std::size_t n = u.size();
    std::vector<Complex> out(n);
    for (std::size_t f = 0; f < n; ++f) {
        Complex acc{};
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((i * f) % n) / static_cast<double>(n);
            acc += u[i] * Complex(std::cos(angle), std::sin(angle));
        }
        out[f] = acc;
    }
    return out;
}

/// Direct inverse over a full spectrum, real part only.
inline std::vector<double> naive_idft(const std::vector<Complex>& full) {
    const std::size_t n = full.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Complex acc{};
        for (std::size_t f = 0; f < n; ++f) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((i * f) % n) / static_cast<double>(n);
            acc += full[f] * Complex(std::cos(angle), std::sin(angle));
        }
        out[i] = acc.real() / static_cast<double>(n);
    }
    return out;
}

/// Full spectrum from a half-spectrum prefix of k bins, missing bins zero.
inline std::vector<Complex> mirror(const std::vector<Complex>& prefix, std::size_t n) {
    std::vector<Complex> full(n);
    for (std::size_t f = 0; f < prefix.size(); ++f) {
        full[f] = prefix[f];
        if (f != 0 && f != n - f) full[n - f] = std::conj(prefix[f]);
    }
    return full;
}

/// (1/n) * sum over full-spectrum bins kept by a k-prefix (bins f with min(f, n-f) < k).
inline double kept_energy(const std::vector<Complex>& full, std::size_t k) {
    const std::size_t n = full.size();
    double sum = 0.0;
    for (std::size_t f = 0; f < n; ++f)
        if (std::min(f, n - f) < k) sum += std::norm(full[f]);
    return sum / static_cast<double>(n);
}

inline double energy(const std::vector<double>& u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return s;
}

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

/// Exact reconstruction RMSE after keeping k half-spectrum bins.
inline double truncation_rmse(const std::vector<double>& u, std::size_t k) {
    const auto full = naive_dft(u);
    std::vector<Complex> prefix(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(k));
    return rmse(u, naive_idft(mirror(prefix, u.size())));
}

inline std::vector<double> uniform_batch(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> u(n);
    for (auto& v : u) v = d(rng);
    return u;
}

/// Smooth-plus-noise nonnegative batch: a more realistic spectrum shape than white noise.
inline std::vector<double> seasonal_batch(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const double mean = 0.2 + 0.5 * d(rng);
    const double amp = 0.2 * d(rng);
    const double phase = 2.0 * std::numbers::pi * d(rng);
    const double noise = 0.08 * d(rng);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = mean + amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) + phase) +
                         noise * g(rng);
        u[i] = std::clamp(v, 0.0, 1.0);
    }
    return u;
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Scratch GRU cell written straight from the gate equations. Matrices are
/// row-major vectors; `wrapped` applies the outer logistic to the update.
struct ScratchCell {
    std::size_t H, D;
    std::vector<double> Wz, Wr, Wh, Vz, Vr, Vh, bz, br, bh;
    bool wrapped = false;

    std::vector<double> step(const std::vector<double>& x, const std::vector<double>& h) const {
        auto affine = [&](const std::vector<double>& W, const std::vector<double>& V, const std::vector<double>& b,
                          const std::vector<double>& hv, std::size_t i) {
            double a = b[i];
            for (std::size_t d = 0; d < D; ++d) a += W[i * D + d] * x[d];
            for (std::size_t j = 0; j < H; ++j) a += V[i * H + j] * hv[j];
            return a;
        };
        std::vector<double> z(H), r(H), rh(H), out(H);
        for (std::size_t i = 0; i < H; ++i) {
            z[i] = sigmoid(affine(Wz, Vz, bz, h, i));
            r[i] = sigmoid(affine(Wr, Vr, br, h, i));
        }
        for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h[j];
        for (std::size_t i = 0; i < H; ++i) {
            const double cand = std::tanh(affine(Wh, Vh, bh, rh, i));
            const double g = z[i] * h[i] + (1.0 - z[i]) * cand;
            out[i] = wrapped ? sigmoid(g) : g;
        }
        return out;
    }
};

}  // namespace oracle
