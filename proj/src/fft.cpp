#include "fourcast/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace fourcast::fft {

namespace {

constexpr std::size_t kMaxDirectFactor = 64;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<std::size_t> factorize(std::size_t n) {
    std::vector<std::size_t> factors;
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            factors.push_back(p);
            n /= p;
        }
    }
    if (n > 1) factors.push_back(n);
    return factors;
}

Complex unit_root(std::size_t k, std::size_t n) {
    // Reduce before scaling so large k keeps full precision.
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k % n) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace

Plan::Plan(std::size_t n) : n_(n), kind_(Kind::trivial) {
    if (n == 0) throw std::invalid_argument("fft plan length must be positive");
    if (n == 1) return;

    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) twiddles_[k] = unit_root(k, n);

    if (is_power_of_two(n)) {
        kind_ = Kind::radix2;
        bitrev_.resize(n);
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            bitrev_[i] = r;
        }
        return;
    }

    factors_ = factorize(n);
    if (factors_.back() <= kMaxDirectFactor) {
        kind_ = Kind::mixed;
        return;
    }

    kind_ = Kind::bluestein;
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    conv_plan_ = std::make_unique<Plan>(m);

    chirp_.resize(n);
    const std::size_t two_n = 2 * n;
    std::size_t k2 = 0;  // k^2 mod 2n, kept small for phase accuracy
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) k2 = (k2 + 2 * k - 1) % two_n;
        const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp_[k] = {std::cos(angle), std::sin(angle)};
    }
    std::vector<Complex> filter(m, Complex{});
    filter[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
        filter[k] = std::conj(chirp_[k]);
        filter[m - k] = std::conj(chirp_[k]);
    }
    chirp_fft_.resize(m);
    conv_plan_->forward(filter, chirp_fft_);
}

Plan::~Plan() = default;
Plan::Plan(Plan&&) noexcept = default;
Plan& Plan::operator=(Plan&&) noexcept = default;

void Plan::forward(std::span<const Complex> in, std::span<Complex> out) const {
    if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("fft length mismatch");
    switch (kind_) {
    case Kind::trivial:
        out[0] = in[0];
        return;
    case Kind::radix2:
        if (in.data() == out.data()) {
            for (std::size_t i = 0; i < n_; ++i)
                if (i < bitrev_[i]) std::swap(out[i], out[bitrev_[i]]);
        } else {
            for (std::size_t i = 0; i < n_; ++i) out[bitrev_[i]] = in[i];
        }
        radix2(out);
        return;
    case Kind::mixed:
        if (in.data() == out.data()) {
            std::vector<Complex> copy(in.begin(), in.end());
            mixed(copy.data(), 1, out.data(), n_, 0);
        } else {
            mixed(in.data(), 1, out.data(), n_, 0);
        }
        return;
    case Kind::bluestein:
        bluestein(in, out);
        return;
    }
}

void Plan::backward(std::span<const Complex> in, std::span<Complex> out) const {
    // ifft(x) = conj(fft(conj(x)))
    std::vector<Complex> conj_in(in.size());
    std::transform(in.begin(), in.end(), conj_in.begin(), [](Complex c) { return std::conj(c); });
    forward(conj_in, out);
    for (auto& c : out) c = std::conj(c);
}

void Plan::radix2(std::span<Complex> data) const {
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const Complex t = twiddles_[j * step] * data[start + j + half];
                const Complex u = data[start + j];
                data[start + j] = u + t;
                data[start + j + half] = u - t;
            }
        }
    }
}

void Plan::mixed(const Complex* in, std::size_t stride, Complex* out, std::size_t n,
                 std::size_t factor_index) const {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = factors_[factor_index];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r)
        mixed(in + r * stride, stride * p, out + r * m, m, factor_index + 1);

    // Twiddle for a length-n sub-transform is the top-level root scaled by n_/n.
    const std::size_t scale = n_ / n;
    std::vector<Complex> column(p);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t r = 0; r < p; ++r) column[r] = out[r * m + k];
        for (std::size_t q = 0; q < p; ++q) {
            const std::size_t f = k + q * m;
            Complex acc = column[0];
            for (std::size_t r = 1; r < p; ++r)
                acc += twiddles_[((r * f) % n) * scale] * column[r];
            out[f] = acc;
        }
    }
}

void Plan::bluestein(std::span<const Complex> in, std::span<Complex> out) const {
    const std::size_t m = conv_plan_->size();
    std::vector<Complex> a(m, Complex{});
    for (std::size_t k = 0; k < n_; ++k) a[k] = in[k] * chirp_[k];
    std::vector<Complex> spec(m);
    conv_plan_->forward(a, spec);
    for (std::size_t k = 0; k < m; ++k) spec[k] *= chirp_fft_[k];
    conv_plan_->backward(spec, a);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n_; ++k) out[k] = a[k] * inv_m * chirp_[k];
}

const Plan& plan_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<Plan>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Plan>(n);
    return *slot;
}

}  // namespace fourcast::fft
