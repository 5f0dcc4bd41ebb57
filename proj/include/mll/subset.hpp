#pragma once

// Bit algebra on the subset lattice of a small variable set.
//
// A subset of V is a bitmask; the first listed variable is bit 0. A cell of
// the table {0,1}^V uses the same encoding: bit v of the cell index is x_v.

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mll {

using Subset = std::uint32_t;

inline constexpr int kMaxVariables = 16;

constexpr int popcount(Subset s) noexcept { return std::popcount(s); }

/// a ⊆ b
constexpr bool is_subset(Subset a, Subset b) noexcept { return (a & ~b) == 0; }

constexpr Subset bit(int pos) noexcept { return Subset{1} << pos; }

/// (-1)^{|x_L|}: +1 iff x has an even number of ones inside L.
constexpr int parity(Subset L, std::uint32_t x) noexcept {
  return (std::popcount(L & x) & 1) ? -1 : 1;
}

/// Gathers the bits of x at the positions of mask into a dense index
/// (software pext).
constexpr std::uint32_t compress(std::uint32_t x, Subset mask) noexcept {
  std::uint32_t out = 0;
  int k = 0;
  while (mask != 0) {
    const Subset low = mask & (~mask + 1);
    if (x & low) out |= std::uint32_t{1} << k;
    ++k;
    mask &= mask - 1;
  }
  return out;
}

/// Inverse of compress: scatters dense bits back to the positions of mask.
constexpr std::uint32_t expand(std::uint32_t y, Subset mask) noexcept {
  std::uint32_t out = 0;
  int k = 0;
  while (mask != 0) {
    const Subset low = mask & (~mask + 1);
    if (y & (std::uint32_t{1} << k)) out |= low;
    ++k;
    mask &= mask - 1;
  }
  return out;
}

/// Calls f(sub) for every sub ⊆ s, including ∅ and s, in increasing order of
/// the dense index.
template <class F>
void for_each_subset(Subset s, F&& f) {
  const std::uint32_t count = std::uint32_t{1} << popcount(s);
  for (std::uint32_t y = 0; y < count; ++y) f(static_cast<Subset>(expand(y, s)));
}

/// Positions set in s, ascending.
std::vector<int> positions(Subset s);

/// Ordered list of distinct variable labels.
class VarSet {
 public:
  VarSet() = default;
  explicit VarSet(std::vector<std::string> names);

  /// Labels "1", "2", ..., "n".
  static VarSet numbered(int n);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  Subset full() const noexcept { return size() == 0 ? 0 : (Subset{1} << size()) - 1; }
  std::size_t cells() const noexcept { return std::size_t{1} << size(); }

  const std::string& name(int pos) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Throws DomainError for an unknown label.
  int position(std::string_view label) const;
  bool contains(std::string_view label) const;

  Subset mask(std::span<const std::string> labels) const;
  std::vector<std::string> labels(Subset s) const;

  /// The variables of s, in this set's order.
  VarSet restrict(Subset s) const;

  /// Mask of sub's labels inside this set. Throws if sub is not contained.
  Subset embed(const VarSet& sub) const;

  /// Compact rendering: concatenated labels when all are single characters
  /// ("13"), braces and commas otherwise; "{}" for the empty set.
  std::string format(Subset s) const;

  bool single_char_names() const noexcept;

  friend bool operator==(const VarSet&, const VarSet&) = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace mll
