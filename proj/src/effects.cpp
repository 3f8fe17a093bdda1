#include "fairpath/effects.hpp"

#include <bit>
#include <cctype>
#include <stdexcept>

namespace fairpath {

const char* effect_short_name(EffectId id) {
  switch (id) {
    case EffectId::direct: return "D";
    case EffectId::indirect: return "I";
    case EffectId::spurious: return "S";
  }
  return "?";
}

const char* effect_long_name(EffectId id) {
  switch (id) {
    case EffectId::direct: return "direct";
    case EffectId::indirect: return "indirect";
    case EffectId::spurious: return "spurious";
  }
  return "?";
}

EffectId parse_effect(const std::string& token) {
  std::string t = token;
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "d" || t == "de" || t == "direct") return EffectId::direct;
  if (t == "i" || t == "ie" || t == "indirect") return EffectId::indirect;
  if (t == "s" || t == "se" || t == "spurious") return EffectId::spurious;
  throw std::invalid_argument("unknown effect '" + token + "' (expected d, i or s)");
}

EffectSet::EffectSet(std::uint32_t mask, int m) : mask_(mask), m_(m) {
  if (m < 0 || m > 31) throw std::invalid_argument("effect universe size out of range");
  if (m < 32 && (mask >> m) != 0u) throw std::invalid_argument("effect set has members outside {0..m-1}");
}

int EffectSet::size() const { return std::popcount(mask_); }

std::string EffectSet::label(const std::vector<std::string>& names) const {
  std::string out = "{";
  bool first = true;
  for (int i = 0; i < m_; ++i) {
    if (!contains(i)) continue;
    if (!first) out += ",";
    out += i < static_cast<int>(names.size()) ? names[i] : std::to_string(i + 1);
    first = false;
  }
  return out + "}";
}

}  // namespace fairpath
