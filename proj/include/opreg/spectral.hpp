#pragma once

// Real-input Fourier transforms on uniform periodic grids, wavenumber grids,
// dealias masks and the adjoints of all of these.
//
// Convention: forward transform is unnormalized with kernel exp(-2*pi*i*j*k/n),
// the inverse carries 1/n. Under this convention d/dx corresponds to
// multiplication by i*kappa.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace opreg {

using Complex = std::complex<double>;

struct GridConfig {
  int n = 192;
  double length = 0.0;

  /// Throws std::invalid_argument unless n is even, n >= 8 and length > 0.
  void validate() const;

  int half_size() const { return n / 2 + 1; }
  /// Largest kept bin under the dealias rule, floor(n/3).
  int cutoff_bin() const { return n / 3; }
  double spacing() const { return length / n; }
  /// 2*pi/L, the wavenumber of bin 1.
  double base_wavenumber() const;
  double point(int j) const { return j * spacing(); }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

class Field {
 public:
  Field() = default;
  explicit Field(GridConfig grid);
  Field(GridConfig grid, std::vector<double> values);

  const GridConfig& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t j) { return values_[j]; }
  double operator[](std::size_t j) const { return values_[j]; }

  bool all_finite() const;

  friend bool operator==(const Field&, const Field&) = default;

 private:
  GridConfig grid_{};
  std::vector<double> values_;
};

class HalfSpectrum {
 public:
  HalfSpectrum() = default;
  explicit HalfSpectrum(GridConfig grid);
  HalfSpectrum(GridConfig grid, std::vector<Complex> coeffs);

  const GridConfig& grid() const { return grid_; }
  std::size_t size() const { return coeffs_.size(); }
  std::span<Complex> coeffs() { return coeffs_; }
  std::span<const Complex> coeffs() const { return coeffs_; }
  Complex& operator[](std::size_t k) { return coeffs_[k]; }
  const Complex& operator[](std::size_t k) const { return coeffs_[k]; }

 private:
  GridConfig grid_{};
  std::vector<Complex> coeffs_;
};

struct DealiasMask {
  std::vector<bool> keep;

  /// Keeps bins k <= floor(n/3).
  static DealiasMask two_thirds(const GridConfig& grid);
  static DealiasMask keep_all(const GridConfig& grid);

  std::size_t size() const { return keep.size(); }
  /// Number of leading kept bins; masks built here keep a prefix.
  std::size_t kept_prefix() const;
};

/// Precomputed real FFT of a fixed even length. Immutable after construction.
class RealFft {
 public:
  explicit RealFft(int n);

  int size() const { return n_; }

  /// out[k] = sum_j in[j] exp(-2 pi i jk/n), k = 0..n/2.
  void forward(std::span<const double> in, std::span<Complex> out) const;
  /// Hermitian-implicit inverse with 1/n normalization. Imaginary parts of
  /// bin 0 and bin n/2 are ignored.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  void complex_forward(std::span<Complex> data) const;
  void work(Complex* out, const Complex* in, std::size_t stride, const int* factors) const;

  int n_;
  int half_;
  std::vector<int> factors_;     // (radix, remaining length) pairs
  std::vector<Complex> twiddles_;  // exp(-2 pi i j / half)
  std::vector<Complex> real_twiddles_;  // exp(-2 pi i k / n), k = 0..half
};

/// Shared, cached plan for length n. Thread-safe.
std::shared_ptr<const RealFft> real_fft_plan(int n);

HalfSpectrum forward_dft(const Field& f);
Field inverse_dft(const HalfSpectrum& s);

/// kappa_k = 2 pi k / L for k = 0..n/2.
std::vector<double> wavenumbers(const GridConfig& grid);

HalfSpectrum apply_mask(const HalfSpectrum& s, const DealiasMask& mask);

/// Parseval weights: 1 for bins 0 and n/2, 2 for interior bins.
double bin_weight(std::size_t k, int n);

/// Hermitian-aware inner product sum_k w_k Re(conj(a_k) b_k).
double spectral_inner(const HalfSpectrum& a, const HalfSpectrum& b);
double field_inner(const Field& a, const Field& b);

/// Adjoint of forward_dft: n * inverse_dft(upstream).
Field dft_vjp(const HalfSpectrum& upstream);
/// Adjoint of inverse_dft: forward_dft(upstream) / n.
HalfSpectrum inverse_dft_vjp(const Field& upstream);

}  // namespace opreg
