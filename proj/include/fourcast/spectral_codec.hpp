#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fourcast {

using Complex = std::complex<double>;

/// n consecutive utilisation observations of one node between two update
/// times. Values are finite fractions in [0, 1]; n is even and at least 2.
class TimeSeriesBatch {
public:
    /// Throws InvalidInput when any invariant is violated.
    explicit TimeSeriesBatch(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }

private:
    std::vector<double> values_;
};

/// Half-spectrum (bins 0..n/2, DC first) of a real length-n series.
struct Spectrum {
    std::vector<Complex> coefficients;
    std::size_t n = 0;

    /// Throws InvalidInput unless the length is n/2+1 and the DC and Nyquist
    /// bins are real within `tolerance`.
    void validate(double tolerance = 1e-9) const;
};

/// The first k half-spectrum coefficients of a batch.
class TruncatedSpectrum {
public:
    TruncatedSpectrum(std::vector<Complex> coefficients, std::size_t n);

    std::span<const Complex> coefficients() const noexcept { return coefficients_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t k() const noexcept { return coefficients_.size(); }

    friend bool operator==(const TruncatedSpectrum&, const TruncatedSpectrum&) = default;

private:
    std::vector<Complex> coefficients_;
    std::size_t n_;
};

/// Cumulative captured-energy fractions over half-spectrum prefixes:
/// cumulative[i] is the share of total energy held by the first i bins.
struct EnergyProfile {
    std::vector<double> cumulative;  // length n/2 + 2
    double total_energy = 0.0;

    bool degenerate() const noexcept { return total_energy == 0.0; }
};

struct EnergyThreshold {
    double e;
};
struct RmseBound {
    double eps;
};
using TruncationCriterion = std::variant<EnergyThreshold, RmseBound>;

/// Throws InvalidInput when the criterion parameter is out of range.
void validate(const TruncationCriterion& criterion);
std::string describe(const TruncationCriterion& criterion);

/// Forward DFT with negative exponent and no normalisation, returned as the
/// half-spectrum. n must be even and >= 2; values must be finite.
Spectrum dft(std::span<const double> series);

/// Inverse of `dft`; the conjugate mirror is implied.
std::vector<double> idft(const Spectrum& spectrum);

/// Sum of squared samples.
double signal_energy(std::span<const double> series);

/// (1/n) * sum over the first k half-spectrum bins of m_i |U_i|^2, with
/// m_i = 1 for DC and Nyquist and 2 for every other bin. At k = n/2+1 this
/// equals the signal energy.
double spectral_energy(std::span<const Complex> prefix, std::size_t n, std::size_t k);

EnergyProfile energy_profile(const Spectrum& spectrum);

/// Smallest prefix whose captured energy fraction reaches e, e in (0, 1].
TruncatedSpectrum truncate_by_energy(const Spectrum& spectrum, double e);

/// Smallest prefix with sqrt((E(U) - E(R)) / n) <= eps. The reconstruction
/// RMSE of the result never exceeds eps.
TruncatedSpectrum truncate_by_rmse(const Spectrum& spectrum, double eps);

TruncatedSpectrum truncate(const Spectrum& spectrum, const TruncationCriterion& criterion);

/// First k bins of a spectrum, unconditionally.
TruncatedSpectrum truncate_at(const Spectrum& spectrum, std::size_t k);

/// Zero-fills bins k..n/2 and inverts. Output is not clamped.
std::vector<double> reconstruct(const TruncatedSpectrum& truncated);

double truncation_rmse(std::span<const double> original, const TruncatedSpectrum& truncated);

}  // namespace fourcast
