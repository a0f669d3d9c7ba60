#include "opreg/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace opreg {

namespace {

inline Complex cmul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

Complex unit_root(std::size_t j, std::size_t n) {
  const double theta = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
  return {std::cos(theta), std::sin(theta)};
}

void check_grid_match(const GridConfig& a, const GridConfig& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

void GridConfig::validate() const {
  if (n < 8 || n % 2 != 0) {
    throw std::invalid_argument("grid point count must be even and >= 8, got " + std::to_string(n));
  }
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("domain length must be positive and finite");
  }
}

double GridConfig::base_wavenumber() const { return 2.0 * std::numbers::pi / length; }

Field::Field(GridConfig grid) : grid_(grid), values_(static_cast<std::size_t>(grid.n), 0.0) {
  grid_.validate();
}

Field::Field(GridConfig grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != static_cast<std::size_t>(grid_.n)) {
    throw std::invalid_argument("field length does not match grid");
  }
}

bool Field::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

HalfSpectrum::HalfSpectrum(GridConfig grid)
    : grid_(grid), coeffs_(static_cast<std::size_t>(grid.half_size())) {
  grid_.validate();
}

HalfSpectrum::HalfSpectrum(GridConfig grid, std::vector<Complex> coeffs)
    : grid_(grid), coeffs_(std::move(coeffs)) {
  grid_.validate();
  if (coeffs_.size() != static_cast<std::size_t>(grid_.half_size())) {
    throw std::invalid_argument("spectrum length does not match grid");
  }
}

DealiasMask DealiasMask::two_thirds(const GridConfig& grid) {
  DealiasMask m;
  m.keep.resize(static_cast<std::size_t>(grid.half_size()));
  for (std::size_t k = 0; k < m.keep.size(); ++k) m.keep[k] = static_cast<int>(k) <= grid.cutoff_bin();
  return m;
}

DealiasMask DealiasMask::keep_all(const GridConfig& grid) {
  DealiasMask m;
  m.keep.assign(static_cast<std::size_t>(grid.half_size()), true);
  return m;
}

std::size_t DealiasMask::kept_prefix() const {
  std::size_t k = 0;
  while (k < keep.size() && keep[k]) ++k;
  return k;
}

// ---------------------------------------------------------------------------
// Mixed-radix complex FFT of length n/2, decimation in time, plus the usual
// even/odd packing to obtain the real transform of length n.

RealFft::RealFft(int n) : n_(n), half_(n / 2) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("RealFft requires an even length");
  int rest = half_;
  int radix = 4;
  while (rest > 1) {
    while (rest % radix != 0) {
      if (radix == 4) {
        radix = 2;
      } else if (radix == 2) {
        radix = 3;
      } else {
        radix += 2;
      }
      if (radix * radix > rest) radix = rest;
    }
    rest /= radix;
    factors_.push_back(radix);
    factors_.push_back(rest);
  }
  if (factors_.empty()) {
    factors_ = {1, 1};
  }
  twiddles_.resize(static_cast<std::size_t>(half_));
  for (int j = 0; j < half_; ++j) twiddles_[j] = unit_root(j, half_);
  real_twiddles_.resize(static_cast<std::size_t>(half_) + 1);
  for (int k = 0; k <= half_; ++k) real_twiddles_[k] = unit_root(k, n_);
}

void RealFft::work(Complex* out, const Complex* in, std::size_t stride, const int* factors) const {
  const int p = factors[0];
  const int m = factors[1];
  Complex* const begin = out;
  if (m == 1) {
    for (int q = 0; q < p; ++q) out[q] = in[q * stride];
  } else {
    for (int q = 0; q < p; ++q) work(out + q * m, in + q * stride, stride * p, factors + 2);
  }
  out = begin;

  if (p == 1) return;
  if (p == 2) {
    for (int u = 0; u < m; ++u) {
      const Complex t = cmul(out[u + m], twiddles_[u * stride]);
      out[u + m] = out[u] - t;
      out[u] += t;
    }
    return;
  }

  thread_local std::vector<Complex> scratch;
  scratch.resize(static_cast<std::size_t>(p));
  const std::size_t total = static_cast<std::size_t>(half_);
  for (int u = 0; u < m; ++u) {
    for (int q = 0; q < p; ++q) scratch[q] = out[u + q * m];
    for (int q1 = 0; q1 < p; ++q1) {
      const std::size_t k = static_cast<std::size_t>(u + q1 * m);
      std::size_t idx = 0;
      Complex acc = scratch[0];
      for (int q = 1; q < p; ++q) {
        idx += stride * k;
        if (idx >= total) idx -= total;
        acc += cmul(scratch[q], twiddles_[idx]);
      }
      out[k] = acc;
    }
  }
}

void RealFft::complex_forward(std::span<Complex> data) const {
  thread_local std::vector<Complex> input;
  input.assign(data.begin(), data.end());
  work(data.data(), input.data(), 1, factors_.data());
}

void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  if (in.size() != static_cast<std::size_t>(n_) || out.size() != static_cast<std::size_t>(half_ + 1)) {
    throw std::invalid_argument("RealFft::forward: size mismatch");
  }
  thread_local std::vector<Complex> z;
  z.resize(static_cast<std::size_t>(half_));
  for (int j = 0; j < half_; ++j) z[j] = {in[2 * j], in[2 * j + 1]};
  complex_forward(z);

  const Complex z0 = z[0];
  out[0] = {z0.real() + z0.imag(), 0.0};
  out[half_] = {z0.real() - z0.imag(), 0.0};
  for (int k = 1; k < half_; ++k) {
    const Complex a = z[k];
    const Complex b = std::conj(z[half_ - k]);
    const Complex even = 0.5 * (a + b);
    const Complex diff = 0.5 * (a - b);
    const Complex odd{diff.imag(), -diff.real()};  // diff / i
    out[k] = even + cmul(real_twiddles_[k], odd);
  }
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(n_) || in.size() != static_cast<std::size_t>(half_ + 1)) {
    throw std::invalid_argument("RealFft::inverse: size mismatch");
  }
  thread_local std::vector<Complex> z;
  z.resize(static_cast<std::size_t>(half_));
  {
    const double x0 = in[0].real();
    const double xm = in[half_].real();
    z[0] = {0.5 * (x0 + xm), 0.5 * (x0 - xm)};
  }
  for (int k = 1; k < half_; ++k) {
    const Complex a = in[k];
    const Complex b = std::conj(in[half_ - k]);
    const Complex even = 0.5 * (a + b);
    const Complex odd = cmul(0.5 * (a - b), std::conj(real_twiddles_[k]));
    // Z_k = E_k + i O_k, conjugated for the inverse-through-forward trick.
    z[k] = std::conj(Complex{even.real() - odd.imag(), even.imag() + odd.real()});
  }
  z[0] = std::conj(z[0]);
  complex_forward(z);
  const double scale = 1.0 / static_cast<double>(half_);
  for (int j = 0; j < half_; ++j) {
    out[2 * j] = z[j].real() * scale;
    out[2 * j + 1] = -z[j].imag() * scale;
  }
}

std::shared_ptr<const RealFft> real_fft_plan(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const RealFft>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const RealFft>(n);
  return slot;
}

// ---------------------------------------------------------------------------

HalfSpectrum forward_dft(const Field& f) {
  if (!f.all_finite()) throw std::invalid_argument("forward_dft: non-finite input");
  HalfSpectrum s(f.grid());
  real_fft_plan(f.grid().n)->forward(f.values(), s.coeffs());
  return s;
}

Field inverse_dft(const HalfSpectrum& s) {
  for (const Complex& c : s.coeffs()) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw std::invalid_argument("inverse_dft: non-finite input");
    }
  }
  Field f(s.grid());
  real_fft_plan(s.grid().n)->inverse(s.coeffs(), f.values());
  return f;
}

std::vector<double> wavenumbers(const GridConfig& grid) {
  grid.validate();
  const double base = grid.base_wavenumber();
  std::vector<double> k(static_cast<std::size_t>(grid.half_size()));
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<double>(i) * base;
  return k;
}

HalfSpectrum apply_mask(const HalfSpectrum& s, const DealiasMask& mask) {
  if (mask.size() != s.size()) throw std::invalid_argument("apply_mask: length mismatch");
  HalfSpectrum out = s;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!mask.keep[k]) out[k] = Complex{0.0, 0.0};
  }
  return out;
}

double bin_weight(std::size_t k, int n) {
  return (k == 0 || k == static_cast<std::size_t>(n / 2)) ? 1.0 : 2.0;
}

double spectral_inner(const HalfSpectrum& a, const HalfSpectrum& b) {
  check_grid_match(a.grid(), b.grid(), "spectral_inner");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += bin_weight(k, a.grid().n) * (a[k].real() * b[k].real() + a[k].imag() * b[k].imag());
  }
  return acc;
}

double field_inner(const Field& a, const Field& b) {
  check_grid_match(a.grid(), b.grid(), "field_inner");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

Field dft_vjp(const HalfSpectrum& upstream) {
  Field f = inverse_dft(upstream);
  const double n = static_cast<double>(upstream.grid().n);
  for (double& v : f.values()) v *= n;
  return f;
}

HalfSpectrum inverse_dft_vjp(const Field& upstream) {
  HalfSpectrum s = forward_dft(upstream);
  const double inv_n = 1.0 / static_cast<double>(upstream.grid().n);
  for (Complex& c : s.coeffs()) c *= inv_n;
  return s;
}

}  // namespace opreg
