#include "mll/subset.hpp"

#include <algorithm>
#include <unordered_set>

#include "mll/error.hpp"

namespace mll {

const char* to_string(SolveFailure kind) {
  switch (kind) {
    case SolveFailure::NonConvergence: return "NON_CONVERGENCE";
    case SolveFailure::Divergence: return "DIVERGENCE";
    case SolveFailure::SubSolver: return "SUB_SOLVER_FAILURE";
    case SolveFailure::InconsistentMargins: return "INCONSISTENT_MARGINS";
    case SolveFailure::AllMethodsFailed: return "ALL_METHODS_FAILED";
  }
  return "UNKNOWN";
}

std::vector<int> positions(Subset s) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(popcount(s)));
  while (s != 0) {
    out.push_back(std::countr_zero(s));
    s &= s - 1;
  }
  return out;
}

VarSet::VarSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty() || names_.size() > static_cast<std::size_t>(kMaxVariables))
    throw DomainError("variable count must be between 1 and 16, got " +
                      std::to_string(names_.size()));
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw DomainError("empty variable name");
    if (!seen.insert(n).second) throw DomainError("duplicate variable name '" + n + "'");
  }
}

VarSet VarSet::numbered(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back(std::to_string(i));
  return VarSet(std::move(names));
}

const std::string& VarSet::name(int pos) const {
  if (pos < 0 || pos >= size()) throw DomainError("variable position out of range");
  return names_[static_cast<std::size_t>(pos)];
}

int VarSet::position(std::string_view label) const {
  auto it = std::find(names_.begin(), names_.end(), label);
  if (it == names_.end()) throw DomainError("unknown variable '" + std::string(label) + "'");
  return static_cast<int>(it - names_.begin());
}

bool VarSet::contains(std::string_view label) const {
  return std::find(names_.begin(), names_.end(), label) != names_.end();
}

Subset VarSet::mask(std::span<const std::string> labels) const {
  Subset s = 0;
  for (const auto& l : labels) {
    const Subset b = bit(position(l));
    if (s & b) throw DomainError("variable '" + l + "' listed twice");
    s |= b;
  }
  return s;
}

std::vector<std::string> VarSet::labels(Subset s) const {
  std::vector<std::string> out;
  for (int p : positions(s)) out.push_back(name(p));
  return out;
}

VarSet VarSet::restrict(Subset s) const {
  if (!is_subset(s, full())) throw DomainError("subset outside variable set");
  return VarSet(labels(s));
}

Subset VarSet::embed(const VarSet& sub) const { return mask(sub.names()); }

bool VarSet::single_char_names() const noexcept {
  return std::all_of(names_.begin(), names_.end(),
                     [](const std::string& n) { return n.size() == 1; });
}

std::string VarSet::format(Subset s) const {
  if (s == 0) return "{}";
  const bool compact = single_char_names();
  std::string out = compact ? "" : "{";
  bool first = true;
  for (int p : positions(s)) {
    if (!compact && !first) out += ",";
    out += name(p);
    first = false;
  }
  if (!compact) out += "}";
  return out;
}

}  // namespace mll
