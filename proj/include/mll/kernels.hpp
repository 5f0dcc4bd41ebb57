#pragma once

// Data-parallel inner loops over {0,1}^n. Each OpenMP kernel has a plain
// serial reference next to it; the tests check one against the other and
// bench/ times them.

#include <span>
#include <vector>

#include "mll/subset.hpp"

namespace mll::kernels {

/// Below this many cells the OpenMP kernels run serially.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 12;
/// Fixed chunk count for parallel marginal sums.
inline constexpr std::size_t kSumChunks = 16;

/// In-place unnormalized Walsh–Hadamard transform:
///   v[S] <- sum_x (-1)^{|x ∩ S|} v[x].
/// v.size() must be a power of two.
void walsh_hadamard(std::span<double> v);

/// Direct O(4^n) evaluation of the same transform.
std::vector<double> walsh_hadamard_reference(std::span<const double> v);

/// Marginal sums of a full table onto the dense index of `margin`.
std::vector<double> marginal_sums(std::span<const double> p, Subset margin);

std::vector<double> marginal_sums_reference(std::span<const double> p, Subset margin);

/// p(x) / p_M(x_M) for every cell x.
std::vector<double> conditional_on_margin(std::span<const double> p, Subset margin);

}  // namespace mll::kernels
