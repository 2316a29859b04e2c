// Translation search: 3D cross-correlation C[dk] = sum_k O[k] S[k+dk]
// between the object grid and the swept occupancy grid, FFT-accelerated on a
// zero-padded canvas (>= n_o + n_s - 1 per axis, so circular wrap-around can
// never contaminate a reported shift). The swept-grid spectrum is computed
// once and shared across all orientation candidates.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/grids.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace sweptdock {

struct CorrelationResult {
  std::array<int, 3> best_shift{0, 0, 0};  // voxel shift dk*
  double best_score = 0.0;
  Vec3 translation = Vec3::Zero();  // t = h dk* + o_s - o_o
};

namespace fftdetail {

/// Smallest integer >= n whose prime factors are all in {2,3,5,7}.
inline int next_smooth7(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

struct PlanPair {
  fftw_plan forward = nullptr;   // r2c
  fftw_plan backward = nullptr;  // c2r

  ~PlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

/// FFTW plan creation is not thread-safe and FFTW_ESTIMATE keeps plans (and
/// therefore outputs) identical run to run; plans are cached per canvas size
/// and executed through the new-array interface on per-thread buffers.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  const PlanPair& get(const std::array<int, 3>& dims) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(dims);
    if (it != plans_.end()) return *it->second;

    std::size_t n_real = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::size_t n_complex = static_cast<std::size_t>(dims[0]) * dims[1] * (dims[2] / 2 + 1);
    double* real_buf = fftw_alloc_real(n_real);
    fftw_complex* complex_buf = fftw_alloc_complex(n_complex);
    auto pair = std::make_unique<PlanPair>();
    pair->forward =
        fftw_plan_dft_r2c_3d(dims[0], dims[1], dims[2], real_buf, complex_buf, FFTW_ESTIMATE);
    pair->backward =
        fftw_plan_dft_c2r_3d(dims[0], dims[1], dims[2], complex_buf, real_buf, FFTW_ESTIMATE);
    fftw_free(real_buf);
    fftw_free(complex_buf);
    auto [pos, inserted] = plans_.emplace(dims, std::move(pair));
    return *pos->second;
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::array<int, 3>, std::unique_ptr<PlanPair>> plans_;
};

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace fftdetail

/// Per-thread scratch buffers for one canvas size.
class CorrelationWorkspace {
 public:
  explicit CorrelationWorkspace(const std::array<int, 3>& canvas) : canvas_(canvas) {
    n_real_ = static_cast<std::size_t>(canvas[0]) * canvas[1] * canvas[2];
    n_complex_ = static_cast<std::size_t>(canvas[0]) * canvas[1] * (canvas[2] / 2 + 1);
    real_.reset(fftw_alloc_real(n_real_));
    spectrum_.reset(fftw_alloc_complex(n_complex_));
  }

  const std::array<int, 3>& canvas() const { return canvas_; }
  double* real() { return real_.get(); }
  fftw_complex* spectrum() { return spectrum_.get(); }
  std::size_t real_count() const { return n_real_; }
  std::size_t complex_count() const { return n_complex_; }

 private:
  std::array<int, 3> canvas_;
  std::size_t n_real_ = 0, n_complex_ = 0;
  std::unique_ptr<double, fftdetail::FftwDeleter> real_;
  std::unique_ptr<fftw_complex, fftdetail::FftwDeleter> spectrum_;
};

/// Holds the canvas geometry and the swept grid's spectrum, reused across
/// every orientation candidate.
class SweptCorrelator {
 public:
  /// Canvas per axis >= max_object_dims + swept_dims - 1, optionally rounded
  /// up to the next {2,3,5,7}-smooth size for FFT efficiency.
  static std::array<int, 3> canvas_for(const std::array<int, 3>& max_object_dims,
                                       const std::array<int, 3>& swept_dims, bool smooth = true) {
    std::array<int, 3> canvas{};
    for (int k = 0; k < 3; ++k) {
      int need = max_object_dims[static_cast<std::size_t>(k)] +
                 swept_dims[static_cast<std::size_t>(k)] - 1;
      canvas[static_cast<std::size_t>(k)] = smooth ? fftdetail::next_smooth7(need) : need;
    }
    return canvas;
  }

  SweptCorrelator(const OccupancyGrid& swept, const std::array<int, 3>& canvas)
      : canvas_(canvas), swept_lattice_(swept.lattice) {
    for (int k = 0; k < 3; ++k) {
      if (swept.lattice.dims[static_cast<std::size_t>(k)] > canvas[static_cast<std::size_t>(k)]) {
        throw invalid_input("swept grid does not fit the correlation canvas");
      }
    }
    const auto& plans = fftdetail::PlanCache::instance().get(canvas_);
    CorrelationWorkspace ws(canvas_);
    double* real = ws.real();
    std::fill(real, real + ws.real_count(), 0.0);
    const auto& lat = swept.lattice;
    for (int ix = 0; ix < lat.dims[0]; ++ix) {
      for (int iy = 0; iy < lat.dims[1]; ++iy) {
        const std::size_t src = lat.index(ix, iy, 0);
        double* dst = real + canvas_index(ix, iy, 0);
        for (int iz = 0; iz < lat.dims[2]; ++iz) dst[iz] = swept.bits[src + static_cast<std::size_t>(iz)];
      }
    }
    swept_spectrum_.resize(ws.complex_count());
    fftw_execute_dft_r2c(plans.forward, real,
                         reinterpret_cast<fftw_complex*>(swept_spectrum_.data()));
  }

  const std::array<int, 3>& canvas() const { return canvas_; }
  const Lattice& swept_lattice() const { return swept_lattice_; }

  /// Full correlation against one (rotated) object grid; returns the
  /// maximizing shift with lexicographic tie-breaking, its score, and the
  /// recovered physical translation.
  CorrelationResult correlate(const ScalarGrid& object, CorrelationWorkspace& ws) const {
    check_spacing(object.lattice);
    const auto& olat = object.lattice;
    for (int k = 0; k < 3; ++k) {
      if (olat.dims[static_cast<std::size_t>(k)] + swept_lattice_.dims[static_cast<std::size_t>(k)] - 1 >
          canvas_[static_cast<std::size_t>(k)]) {
        throw invalid_input("object grid too large for the correlation canvas");
      }
    }

    const auto& plans = fftdetail::PlanCache::instance().get(canvas_);
    double* real = ws.real();
    std::fill(real, real + ws.real_count(), 0.0);
    for (int ix = 0; ix < olat.dims[0]; ++ix) {
      for (int iy = 0; iy < olat.dims[1]; ++iy) {
        const std::size_t src = olat.index(ix, iy, 0);
        double* dst = real + canvas_index(ix, iy, 0);
        for (int iz = 0; iz < olat.dims[2]; ++iz) dst[iz] = object.values[src + static_cast<std::size_t>(iz)];
      }
    }
    fftw_execute_dft_r2c(plans.forward, real, ws.spectrum());

    // P = F(S) * conj(F(O)) / N, so that IFFT(P)[m] = sum_k O[k] S[k+m].
    const double inv_n = 1.0 / static_cast<double>(ws.real_count());
    auto* product = reinterpret_cast<std::complex<double>*>(ws.spectrum());
    const std::complex<double>* swept_spec = swept_spectrum_.data();
    for (std::size_t i = 0; i < ws.complex_count(); ++i) {
      product[i] = swept_spec[i] * std::conj(product[i]) * inv_n;
    }
    // Real inputs: the product spectrum must be real in its DC bin. A failed
    // check means buffer corruption, not a numerical tie to break.
    if (std::abs(product[0].imag()) > 1e-6 * std::max(1.0, std::abs(product[0].real()))) {
      throw std::logic_error("correlation spectrum lost Hermitian symmetry");
    }
    fftw_execute_dft_c2r(plans.backward, ws.spectrum(), real);

    return scan_valid_shifts(real, olat);
  }

 private:
  void check_spacing(const Lattice& object_lattice) const {
    double h_o = object_lattice.spacing, h_s = swept_lattice_.spacing;
    if (std::abs(h_o - h_s) > 1e-12 * std::max(h_o, h_s)) {
      throw invalid_input("cross-correlation requires equal grid spacing");
    }
  }

  std::size_t canvas_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * canvas_[1] + static_cast<std::size_t>(iy)) * canvas_[2] +
           static_cast<std::size_t>(iz);
  }

  /// Linear-correlation shifts dk in [-(n_o - 1), n_s - 1] per axis map to
  /// canvas index m = dk mod N; everything between the two ranges is the
  /// zero-padding dead zone. Two passes in ascending lexicographic dk order:
  /// the exact maximum first, then the first shift within a relative 1e-9 of
  /// it. FFT rounding perturbs exact plateau ties by ~1e-13, so a strict
  /// argmax alone would break the documented lexicographic tie rule.
  CorrelationResult scan_valid_shifts(const double* c, const Lattice& object_lattice) const {
    struct AxisRange {
      int dk_begin, count, m_begin;
    };
    std::array<std::array<AxisRange, 2>, 3> ranges;
    for (int k = 0; k < 3; ++k) {
      int n_o = object_lattice.dims[static_cast<std::size_t>(k)];
      int n_s = swept_lattice_.dims[static_cast<std::size_t>(k)];
      int canvas_n = canvas_[static_cast<std::size_t>(k)];
      ranges[static_cast<std::size_t>(k)][0] = {-(n_o - 1), n_o - 1, canvas_n - (n_o - 1)};
      ranges[static_cast<std::size_t>(k)][1] = {0, n_s, 0};
    }

    double max_score = -std::numeric_limits<double>::infinity();
    for (const auto& rx : ranges[0]) {
      for (int ax = 0; ax < rx.count; ++ax) {
        const std::size_t mx = static_cast<std::size_t>(rx.m_begin + ax);
        for (const auto& ry : ranges[1]) {
          for (int ay = 0; ay < ry.count; ++ay) {
            const std::size_t my = static_cast<std::size_t>(ry.m_begin + ay);
            const std::size_t row = (mx * canvas_[1] + my) * canvas_[2];
            for (const auto& rz : ranges[2]) {
              const double* base = c + row + static_cast<std::size_t>(rz.m_begin);
              for (int az = 0; az < rz.count; ++az) {
                if (base[az] > max_score) max_score = base[az];
              }
            }
          }
        }
      }
    }

    const double tie_band = 1e-9 * std::max(1.0, std::abs(max_score));
    CorrelationResult best;
    best.best_score = max_score;
    for (const auto& rx : ranges[0]) {
      for (int ax = 0; ax < rx.count; ++ax) {
        const int dkx = rx.dk_begin + ax;
        const std::size_t mx = static_cast<std::size_t>(rx.m_begin + ax);
        for (const auto& ry : ranges[1]) {
          for (int ay = 0; ay < ry.count; ++ay) {
            const int dky = ry.dk_begin + ay;
            const std::size_t my = static_cast<std::size_t>(ry.m_begin + ay);
            const std::size_t row = (mx * canvas_[1] + my) * canvas_[2];
            for (const auto& rz : ranges[2]) {
              const double* base = c + row + static_cast<std::size_t>(rz.m_begin);
              for (int az = 0; az < rz.count; ++az) {
                if (base[az] >= max_score - tie_band) {
                  best.best_score = base[az];
                  best.best_shift = {dkx, dky, rz.dk_begin + az};
                  const double h = swept_lattice_.spacing;
                  best.translation = Vec3(h * best.best_shift[0], h * best.best_shift[1],
                                          h * best.best_shift[2]) +
                                     swept_lattice_.origin - object_lattice.origin;
                  return best;
                }
              }
            }
          }
        }
      }
    }
    return best;  // unreachable: the maximum is always found again
  }

  std::array<int, 3> canvas_;
  Lattice swept_lattice_;
  std::vector<std::complex<double>> swept_spectrum_;
};

/// One-shot correlation between an object grid and a swept grid (the
/// pipeline uses SweptCorrelator directly to reuse the swept spectrum).
inline CorrelationResult cross_correlate(const ScalarGrid& object, const OccupancyGrid& swept,
                                         bool smooth_sizes = true) {
  auto canvas = SweptCorrelator::canvas_for(object.lattice.dims, swept.lattice.dims, smooth_sizes);
  SweptCorrelator correlator(swept, canvas);
  CorrelationWorkspace ws(canvas);
  return correlator.correlate(object, ws);
}

}  // namespace sweptdock
