#include "fourcast/spectral_codec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fourcast/error.hpp"
#include "fourcast/fft.hpp"

namespace fourcast {

namespace {

void check_length(std::size_t n) {
    if (n < 2 || n % 2 != 0)
        throw InvalidInput("series length must be even and at least 2, got " + std::to_string(n));
}

double multiplicity(std::size_t bin, std::size_t n) {
    return (bin == 0 || bin == n / 2) ? 1.0 : 2.0;
}

}  // namespace

TimeSeriesBatch::TimeSeriesBatch(std::vector<double> values) : values_(std::move(values)) {
    check_length(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double v = values_[i];
        if (!std::isfinite(v)) throw InvalidInput("non-finite observation at index " + std::to_string(i));
        if (v < 0.0 || v > 1.0)
            throw InvalidInput("observation outside [0, 1] at index " + std::to_string(i));
    }
}

void Spectrum::validate(double tolerance) const {
    check_length(n);
    if (coefficients.size() != n / 2 + 1)
        throw InvalidInput("half-spectrum must hold n/2+1 bins");
    for (const auto& c : coefficients)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw InvalidInput("non-finite spectral coefficient");
    if (std::abs(coefficients.front().imag()) > tolerance)
        throw InvalidInput("DC coefficient must be real");
    if (std::abs(coefficients.back().imag()) > tolerance)
        throw InvalidInput("Nyquist coefficient must be real");
}

TruncatedSpectrum::TruncatedSpectrum(std::vector<Complex> coefficients, std::size_t n)
    : coefficients_(std::move(coefficients)), n_(n) {
    check_length(n_);
    if (coefficients_.empty() || coefficients_.size() > n_ / 2 + 1)
        throw InvalidInput("retained term count must lie in [1, n/2+1]");
}

void validate(const TruncationCriterion& criterion) {
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, EnergyThreshold>) {
                if (!(c.e > 0.0 && c.e <= 1.0))
                    throw InvalidInput("energy threshold must lie in (0, 1]");
            } else {
                if (!(c.eps > 0.0) || !std::isfinite(c.eps))
                    throw InvalidInput("rmse bound must be positive and finite");
            }
        },
        criterion);
}

std::string describe(const TruncationCriterion& criterion) {
    std::ostringstream out;
    out.precision(17);
    if (const auto* e = std::get_if<EnergyThreshold>(&criterion))
        out << "energy(e=" << e->e << ")";
    else
        out << "rmse(eps=" << std::get<RmseBound>(criterion).eps << ")";
    return out.str();
}

Spectrum dft(std::span<const double> series) {
    const std::size_t n = series.size();
    check_length(n);
    std::vector<Complex> buffer(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(series[i])) throw InvalidInput("non-finite input to dft");
        buffer[i] = series[i];
    }
    fft::plan_for(n).forward(buffer, buffer);

    Spectrum out;
    out.n = n;
    out.coefficients.assign(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(n / 2 + 1));
    // Real input: DC and Nyquist are real up to rounding.
    out.coefficients.front().imag(0.0);
    out.coefficients.back().imag(0.0);
    return out;
}

std::vector<double> idft(const Spectrum& spectrum) {
    spectrum.validate();
    const std::size_t n = spectrum.n;
    std::vector<Complex> full(n);
    for (std::size_t f = 0; f <= n / 2; ++f) full[f] = spectrum.coefficients[f];
    full[0].imag(0.0);
    full[n / 2].imag(0.0);
    for (std::size_t f = n / 2 + 1; f < n; ++f) full[f] = std::conj(full[n - f]);
    fft::plan_for(n).backward(full, full);

    std::vector<double> out(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real() * inv_n;
    return out;
}

double signal_energy(std::span<const double> series) {
    double sum = 0.0;
    for (double v : series) sum += v * v;
    return sum;
}

double spectral_energy(std::span<const Complex> prefix, std::size_t n, std::size_t k) {
    check_length(n);
    if (k > n / 2 + 1) throw InvalidInput("prefix longer than the half-spectrum");
    if (k > prefix.size()) throw InvalidInput("prefix holds fewer than k coefficients");
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += multiplicity(i, n) * std::norm(prefix[i]);
    return sum / static_cast<double>(n);
}

EnergyProfile energy_profile(const Spectrum& spectrum) {
    spectrum.validate();
    const std::size_t bins = spectrum.n / 2 + 1;
    std::vector<double> running(bins + 1, 0.0);
    for (std::size_t i = 0; i < bins; ++i)
        running[i + 1] = running[i] + multiplicity(i, spectrum.n) * std::norm(spectrum.coefficients[i]);

    EnergyProfile profile;
    const double total = running.back();
    profile.total_energy = total / static_cast<double>(spectrum.n);
    profile.cumulative.assign(bins + 1, 0.0);
    if (total > 0.0) {
        for (std::size_t i = 0; i <= bins; ++i) profile.cumulative[i] = running[i] / total;
        profile.cumulative.back() = 1.0;
    }
    return profile;
}

TruncatedSpectrum truncate_at(const Spectrum& spectrum, std::size_t k) {
    if (k == 0 || k > spectrum.coefficients.size())
        throw InvalidInput("retained term count must lie in [1, n/2+1]");
    return TruncatedSpectrum({spectrum.coefficients.begin(),
                              spectrum.coefficients.begin() + static_cast<std::ptrdiff_t>(k)},
                             spectrum.n);
}

TruncatedSpectrum truncate_by_energy(const Spectrum& spectrum, double e) {
    validate(EnergyThreshold{e});
    const EnergyProfile profile = energy_profile(spectrum);
    if (profile.degenerate()) return truncate_at(spectrum, 1);
    const std::size_t bins = spectrum.n / 2 + 1;
    // cumulative is nondecreasing and ends at exactly 1, so the scan terminates.
    std::size_t k = 1;
    while (k < bins && profile.cumulative[k] < e) ++k;
    return truncate_at(spectrum, k);
}

TruncatedSpectrum truncate_by_rmse(const Spectrum& spectrum, double eps) {
    validate(RmseBound{eps});
    spectrum.validate();
    const std::size_t n = spectrum.n;
    const std::size_t bins = n / 2 + 1;
    // Lost energy per prefix, summed from the tail so small remainders stay accurate.
    std::vector<double> lost(bins + 1, 0.0);
    for (std::size_t i = bins; i-- > 0;)
        lost[i] = lost[i + 1] + multiplicity(i, n) * std::norm(spectrum.coefficients[i]);

    const double nn = static_cast<double>(n);
    const double limit = eps * eps;
    std::size_t k = 1;
    // lost[k] carries no 1/n yet: E(L) = lost/n and the criterion is E(L)/n <= eps^2.
    while (k < bins && lost[k] / (nn * nn) > limit) ++k;
    return truncate_at(spectrum, k);
}

TruncatedSpectrum truncate(const Spectrum& spectrum, const TruncationCriterion& criterion) {
    if (const auto* e = std::get_if<EnergyThreshold>(&criterion)) return truncate_by_energy(spectrum, e->e);
    return truncate_by_rmse(spectrum, std::get<RmseBound>(criterion).eps);
}

std::vector<double> reconstruct(const TruncatedSpectrum& truncated) {
    Spectrum full;
    full.n = truncated.n();
    full.coefficients.assign(full.n / 2 + 1, Complex{});
    std::copy(truncated.coefficients().begin(), truncated.coefficients().end(), full.coefficients.begin());
    // A prefix that ends on the Nyquist bin could carry rounding in its imaginary part.
    full.coefficients.front().imag(0.0);
    full.coefficients.back().imag(0.0);
    return idft(full);
}

double truncation_rmse(std::span<const double> original, const TruncatedSpectrum& truncated) {
    if (original.size() != truncated.n())
        throw InvalidInput("original series and truncated spectrum differ in length");
    const auto approx = reconstruct(truncated);
    double sum = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) {
        const double d = original[i] - approx[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(original.size()));
}

}  // namespace fourcast
