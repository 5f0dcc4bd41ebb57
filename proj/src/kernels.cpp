#include "mll/kernels.hpp"

#include <bit>

#include "mll/error.hpp"

namespace mll::kernels {

namespace {

void require_power_of_two(std::size_t n) {
  if (n == 0 || !std::has_single_bit(n))
    throw DomainError("table length must be a power of two");
}

}  // namespace

void walsh_hadamard(std::span<double> v) {
  const std::size_t n = v.size();
  require_power_of_two(n);
  double* data = v.data();
  const bool par = n >= kParallelThreshold;
  for (std::size_t h = 1; h < n; h <<= 1) {
    const std::ptrdiff_t pairs = static_cast<std::ptrdiff_t>(n / 2);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t k = 0; k < pairs; ++k) {
      // k-th butterfly of this stage: low index has bit h clear.
      const std::size_t uk = static_cast<std::size_t>(k);
      const std::size_t i = (uk / h) * 2 * h + (uk % h);
      const double a = data[i];
      const double b = data[i + h];
      data[i] = a + b;
      data[i + h] = a - b;
    }
  }
}

std::vector<double> walsh_hadamard_reference(std::span<const double> v) {
  const std::size_t n = v.size();
  require_power_of_two(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      acc += parity(static_cast<Subset>(s), static_cast<std::uint32_t>(x)) * v[x];
    out[s] = acc;
  }
  return out;
}

std::vector<double> marginal_sums(std::span<const double> p, Subset margin) {
  require_power_of_two(p.size());
  const std::size_t out_size = std::size_t{1} << popcount(margin);
  if (p.size() < kParallelThreshold || out_size * kSumChunks > p.size()) return marginal_sums_reference(p, margin);
  // Contiguous chunks with private accumulators, merged in chunk order so
  // the result does not depend on the thread count.
  std::vector<double> partial(kSumChunks * out_size, 0.0);
  const std::size_t chunk = p.size() / kSumChunks;
  const auto chunks = static_cast<std::ptrdiff_t>(kSumChunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    double* acc = partial.data() + static_cast<std::size_t>(c) * out_size;
    const std::size_t lo = static_cast<std::size_t>(c) * chunk;
    for (std::size_t x = lo; x < lo + chunk; ++x) acc[compress(static_cast<std::uint32_t>(x), margin)] += p[x];
  }
  std::vector<double> out(out_size, 0.0);
  for (std::size_t c = 0; c < kSumChunks; ++c)
    for (std::size_t y = 0; y < out_size; ++y) out[y] += partial[c * out_size + y];
  return out;
}

std::vector<double> marginal_sums_reference(std::span<const double> p, Subset margin) {
  require_power_of_two(p.size());
  std::vector<double> out(std::size_t{1} << popcount(margin), 0.0);
  for (std::size_t x = 0; x < p.size(); ++x)
    out[compress(static_cast<std::uint32_t>(x), margin)] += p[x];
  return out;
}

std::vector<double> conditional_on_margin(std::span<const double> p, Subset margin) {
  const auto pm = marginal_sums(p, margin);
  std::vector<double> out(p.size());
  const std::ptrdiff_t cells = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for schedule(static) if (p.size() >= kParallelThreshold)
  for (std::ptrdiff_t x = 0; x < cells; ++x) {
    const auto ux = static_cast<std::size_t>(x);
    out[ux] = p[ux] / pm[compress(static_cast<std::uint32_t>(x), margin)];
  }
  return out;
}

}  // namespace mll::kernels
