#include "cweld/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace cweld::fft {
namespace {

enum class Kind { kForward, kBackward, kR2C, kC2R, kForward2d, kBackward2d };

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Kind kind, int n0, int n1) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(kind, n0, n1);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_plan plan = make(kind, n0, n1);
    if (plan == nullptr) throw NumericalError("fftw: plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }

 private:
  static fftw_plan make(Kind kind, int n0, int n1) {
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const std::size_t total = static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1 > 0 ? n1 : 1);
    // Planning with FFTW_ESTIMATE does not touch the arrays, but they must exist.
    fftw_complex* a = fftw_alloc_complex(total + 2);
    fftw_complex* b = fftw_alloc_complex(total + 2);
    fftw_plan p = nullptr;
    switch (kind) {
      case Kind::kForward:
        p = fftw_plan_dft_1d(n0, a, b, FFTW_FORWARD, flags);
        break;
      case Kind::kBackward:
        p = fftw_plan_dft_1d(n0, a, b, FFTW_BACKWARD, flags);
        break;
      case Kind::kR2C:
        p = fftw_plan_dft_r2c_1d(n0, reinterpret_cast<double*>(a), b, flags);
        break;
      case Kind::kC2R:
        p = fftw_plan_dft_c2r_1d(n0, a, reinterpret_cast<double*>(b), flags);
        break;
      case Kind::kForward2d:
        p = fftw_plan_dft_2d(n0, n1, a, b, FFTW_FORWARD, flags);
        break;
      case Kind::kBackward2d:
        p = fftw_plan_dft_2d(n0, n1, a, b, FFTW_BACKWARD, flags);
        break;
    }
    fftw_free(a);
    fftw_free(b);
    return p;
  }

  std::mutex mutex_;
  std::map<std::tuple<Kind, int, int>, fftw_plan> plans_;
};

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw RangeError(std::string("fft: size mismatch in ") + what);
}

}  // namespace

void forward(std::span<const Complex> in, std::span<Complex> out) {
  check_size(out.size(), in.size(), "forward");
  const int n = static_cast<int>(in.size());
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft(PlanCache::instance().get(Kind::kForward, n, 0), as_fftw(scratch.data()),
                   as_fftw(out.data()));
}

void backward(std::span<const Complex> in, std::span<Complex> out) {
  check_size(out.size(), in.size(), "backward");
  const int n = static_cast<int>(in.size());
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft(PlanCache::instance().get(Kind::kBackward, n, 0), as_fftw(scratch.data()),
                   as_fftw(out.data()));
}

void forward_real(std::span<const double> in, std::span<Complex> out) {
  check_size(out.size(), in.size() / 2 + 1, "forward_real");
  const int n = static_cast<int>(in.size());
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(PlanCache::instance().get(Kind::kR2C, n, 0), scratch.data(),
                       as_fftw(out.data()));
}

void backward_real(std::span<const Complex> in, std::span<double> out) {
  check_size(in.size(), out.size() / 2 + 1, "backward_real");
  const int n = static_cast<int>(out.size());
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(PlanCache::instance().get(Kind::kC2R, n, 0), as_fftw(scratch.data()),
                       out.data());
}

void forward_2d(int ny, int nx, std::span<const Complex> in, std::span<Complex> out) {
  const std::size_t total = static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx);
  check_size(in.size(), total, "forward_2d");
  check_size(out.size(), total, "forward_2d");
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft(PlanCache::instance().get(Kind::kForward2d, ny, nx), as_fftw(scratch.data()),
                   as_fftw(out.data()));
}

void backward_2d(int ny, int nx, std::span<const Complex> in, std::span<Complex> out) {
  const std::size_t total = static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx);
  check_size(in.size(), total, "backward_2d");
  check_size(out.size(), total, "backward_2d");
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft(PlanCache::instance().get(Kind::kBackward2d, ny, nx), as_fftw(scratch.data()),
                   as_fftw(out.data()));
}

}  // namespace cweld::fft
