#include "dopt/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace dopt::fft {
namespace {

class PlanCache {
public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t rows, std::size_t cols, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // FFTW_ESTIMATE never touches the buffer during planning.
    ComplexArray scratch(rows, cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf,
                                      buf, sign, FFTW_ESTIMATE);
    if (plan == nullptr) throw std::runtime_error("fftw planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(ComplexArray& a, int sign) {
  fftw_plan plan = cache().get(a.rows(), a.cols(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void forward(ComplexArray& a) { execute(a, FFTW_FORWARD); }

void inverse(ComplexArray& a) {
  execute(a, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
}

void fftshift(ComplexArray& a) {
  const std::size_t hr = a.rows() / 2;
  const std::size_t hc = a.cols() / 2;
  for (std::size_t r = 0; r < hr; ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      std::swap(a(r, c), a(r + hr, (c + hc) % a.cols()));
    }
  }
}

}  // namespace dopt::fft
