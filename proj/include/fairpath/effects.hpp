#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fairpath {

/// A point estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Natural direct, indirect and spurious effects plus the TV measure of an
/// outcome or of a prediction function.
struct EffectEstimates {
  Estimate nde;     // NDE_{x0,x1}
  Estimate nie;     // NIE_{x1,x0}
  Estimate nse_x0;  // NSE_{x0}
  Estimate nse_x1;  // NSE_{x1}
  Estimate tv;      // TV_{x0,x1}
  double n_effective = 0.0;
};

/// Canonical causal pathways of the standard fairness model.
enum class EffectId : int { direct = 0, indirect = 1, spurious = 2 };

inline constexpr int kCanonicalEffects = 3;

const char* effect_short_name(EffectId id);
const char* effect_long_name(EffectId id);
EffectId parse_effect(const std::string& token);

/// Subset of effect indices {0..m-1}, stored as a bit mask.
class EffectSet {
 public:
  EffectSet() = default;
  EffectSet(std::uint32_t mask, int m);

  static EffectSet empty(int m) { return {0u, m}; }
  static EffectSet full(int m) { return {(1u << m) - 1u, m}; }

  std::uint32_t mask() const { return mask_; }
  int universe() const { return m_; }
  bool contains(int i) const { return (mask_ >> i) & 1u; }
  int size() const;
  EffectSet with(int i) const { return {mask_ | (1u << i), m_}; }

  /// Renders e.g. "{D,I}" with the supplied per-index names; "{}" when empty.
  std::string label(const std::vector<std::string>& names) const;

  friend bool operator==(const EffectSet&, const EffectSet&) = default;

 private:
  std::uint32_t mask_ = 0;
  int m_ = 0;
};

}  // namespace fairpath
