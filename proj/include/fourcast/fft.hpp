#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fourcast::fft {

using Complex = std::complex<double>;

/// Precomputed complex DFT of one length. Powers of two use an iterative
/// radix-2 kernel, lengths whose prime factors are all small use recursive
/// mixed-radix Cooley-Tukey, and anything else goes through Bluestein's
/// chirp-z convolution. All paths are O(n log n) or O(n * max small factor).
class Plan {
public:
    explicit Plan(std::size_t n);
    ~Plan();
    Plan(Plan&&) noexcept;
    Plan& operator=(Plan&&) noexcept;

    std::size_t size() const noexcept { return n_; }

    /// out[f] = sum_i in[i] * exp(-2 pi j i f / n). No normalisation.
    void forward(std::span<const Complex> in, std::span<Complex> out) const;

    /// out[i] = sum_f in[f] * exp(+2 pi j i f / n). No 1/n factor.
    void backward(std::span<const Complex> in, std::span<Complex> out) const;

private:
    enum class Kind { trivial, radix2, mixed, bluestein };

    void radix2(std::span<Complex> data) const;
    void mixed(const Complex* in, std::size_t stride, Complex* out, std::size_t n,
               std::size_t factor_index) const;
    void bluestein(std::span<const Complex> in, std::span<Complex> out) const;

    std::size_t n_;
    Kind kind_;
    std::vector<Complex> twiddles_;   // exp(-2 pi j k / n), k < n
    std::vector<std::size_t> bitrev_;
    std::vector<std::size_t> factors_;
    // Bluestein state
    std::vector<Complex> chirp_;      // exp(-pi j k^2 / n)
    std::vector<Complex> chirp_fft_;  // transformed conj chirp filter
    std::unique_ptr<Plan> conv_plan_;
};

/// Thread-local cached plan for length n.
const Plan& plan_for(std::size_t n);

}  // namespace fourcast::fft
