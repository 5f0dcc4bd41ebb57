#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mll/error.hpp"
#include "mll/io.hpp"

namespace test {

using namespace mll;

/// "13" over numbered variables -> bits 0 and 2.
inline Subset S(const std::string& digits) {
  Subset s = 0;
  for (char c : digits) s |= bit(c - '1');
  return s;
}

inline MLLSpec spec(const char* text) { return io::parse_spec_text(text); }

inline double max_diff(const JointTable& a, const JointTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Brute-force marginal over M (dense indices of M).
inline std::vector<double> brute_marginal(const JointTable& t, Subset M) {
  std::vector<double> out(std::size_t{1} << popcount(M), 0.0);
  for (std::uint32_t x = 0; x < t.size(); ++x) out[compress(x, M)] += t[x];
  return out;
}

/// Brute-force λ_L^M from the definition.
inline double brute_lambda(const JointTable& t, Subset L, Subset M) {
  const auto pm = brute_marginal(t, M);
  double acc = 0.0;
  for (std::uint32_t y = 0; y < pm.size(); ++y) acc += parity(L, expand(y, M)) * std::log(pm[y]);
  return acc / static_cast<double>(pm.size());
}

inline const char* kChain = "12: 1 2 12\n23: 3 23\n123: 13 123\n";
inline const char* kContraction = "23: 2 23\n13: 1\n123: 12 3 13 123\n";
inline const char* kConditional = "12: 2 12\n13: 3 13\n123: 1 23 123\n";
inline const char* kNested = "3: 3\n23: 23\n123: 1 2 12 13 123\n";
inline const char* kCycle = "12: 1 12\n23: 2 23\n13: 3 13\n123: 123\n";
inline const char* kCycleOrdered = "3: 3\n23: 2 23\n12: 1 12\n13: 13\n123: 123\n";
inline const char* kOpen = "12: 1 2\n13: 3 13\n23: 23\n123: 12 123\n";
inline const char* kLoop =
    "123: 2 23 12 123\n134: 3 34 13 134\n124: 4 24 14 124\n1234: 1 234 1234\n";
inline const char* kLoopGibbs =
    "14: 1 4 14\n23: 2 3 23\n123: 12 123\n124: 24 124\n134: 13 134\n234: 34 234\n1234: 1234\n";

}  // namespace test
