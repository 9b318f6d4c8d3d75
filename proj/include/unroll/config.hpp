#pragma once

// key=value configuration files. '#' starts a comment; blank lines are ignored.
// Values are validated against a fixed schema and stored in canonical text so
// that serialize(parse(text)) reparses to an equal Config.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unroll/error.hpp"
#include "unroll/metrics.hpp"

namespace unroll {

enum class ValueKind { kUint, kReal, kBool, kText, kChoice };

struct KeySpec {
  std::string_view name;
  ValueKind kind;
  std::string_view choices;  // '|'-separated, kChoice only
};

// clang-format off
inline constexpr std::array kConfigSchema = {
    KeySpec{"model", ValueKind::kChoice, "lista|liht|lsparcom|uadmm"},
    KeySpec{"depth", ValueKind::kUint, ""},
    KeySpec{"tied", ValueKind::kBool, ""},
    KeySpec{"generator", ValueKind::kChoice, "sparse|rpca|lsparcom"},
    KeySpec{"n", ValueKind::kUint, ""},
    KeySpec{"m", ValueKind::kUint, ""},
    KeySpec{"k", ValueKind::kUint, ""},
    KeySpec{"t_train", ValueKind::kUint, ""},
    KeySpec{"t_test", ValueKind::kUint, ""},
    KeySpec{"noise_sigma", ValueKind::kReal, ""},
    KeySpec{"lambda_sup", ValueKind::kReal, ""},
    KeySpec{"rows", ValueKind::kUint, ""},
    KeySpec{"cols", ValueKind::kUint, ""},
    KeySpec{"rank", ValueKind::kUint, ""},
    KeySpec{"density", ValueKind::kReal, ""},
    KeySpec{"amplitude", ValueKind::kReal, ""},
    KeySpec{"grid_low", ValueKind::kUint, ""},
    KeySpec{"grid_high", ValueKind::kUint, ""},
    KeySpec{"emitters", ValueKind::kUint, ""},
    KeySpec{"seed", ValueKind::kUint, ""},
    KeySpec{"epochs", ValueKind::kUint, ""},
    KeySpec{"batch", ValueKind::kUint, ""},
    KeySpec{"lr", ValueKind::kReal, ""},
    KeySpec{"optimizer", ValueKind::kChoice, "sgd|adam"},
    KeySpec{"momentum", ValueKind::kReal, ""},
    KeySpec{"beta1", ValueKind::kReal, ""},
    KeySpec{"beta2", ValueKind::kReal, ""},
    KeySpec{"eps", ValueKind::kReal, ""},
    KeySpec{"loss", ValueKind::kChoice, "mse|masked"},
    KeySpec{"lambda_loss", ValueKind::kReal, ""},
    KeySpec{"act_alpha", ValueKind::kReal, ""},
    KeySpec{"act_beta", ValueKind::kReal, ""},
    KeySpec{"learn_d", ValueKind::kBool, ""},
    KeySpec{"rho", ValueKind::kReal, ""},
    KeySpec{"eta", ValueKind::kReal, ""},
    KeySpec{"lambda1", ValueKind::kReal, ""},
    KeySpec{"lambda2", ValueKind::kReal, ""},
    KeySpec{"iters", ValueKind::kUint, ""},
    KeySpec{"tol", ValueKind::kReal, ""},
    KeySpec{"denoiser", ValueKind::kChoice, "identity|soft|median3"},
    KeySpec{"tau", ValueKind::kReal, ""},
    KeySpec{"out_dir", ValueKind::kText, ""},
};
// clang-format on

/// Seeds and counts travel through float64 containers; keep them exactly representable.
inline constexpr std::uint64_t kMaxConfigUint = 1ULL << 53;

class Config {
 public:
  bool has(std::string_view key) const { return values_.count(std::string(key)) > 0; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Canonical text of a key's value.
  const std::string& text(std::string_view key) const {
    auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("missing required key '" + std::string(key) + "'", 0);
    return it->second;
  }

  std::uint64_t get_uint(std::string_view key) const { return std::stoull(text(key)); }
  double get_real(std::string_view key) const { return std::strtod(text(key).c_str(), nullptr); }
  bool get_bool(std::string_view key) const { return text(key) == "true"; }

  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const { return has(key) ? get_uint(key) : fallback; }
  double get_real(std::string_view key, double fallback) const { return has(key) ? get_real(key) : fallback; }
  bool get_bool(std::string_view key, bool fallback) const { return has(key) ? get_bool(key) : fallback; }
  std::string get_text(std::string_view key, std::string_view fallback) const {
    return has(key) ? text(key) : std::string(fallback);
  }

  /// Throws ConfigError naming the first absent key.
  void require(std::initializer_list<std::string_view> keys) const {
    for (auto k : keys)
      if (!has(k)) throw ConfigError("missing required key '" + std::string(k) + "'", 0);
  }

  /// Validates and stores one value. `line` is used for error messages only.
  void set(std::string_view key, std::string_view raw, std::size_t line = 0) {
    const KeySpec* spec = find_spec(key);
    if (spec == nullptr) throw ConfigError("unknown key '" + std::string(key) + "'", line);
    values_[std::string(key)] = canonicalize(*spec, raw, line);
  }

  bool operator==(const Config&) const = default;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  static const KeySpec* find_spec(std::string_view key) {
    for (const auto& s : kConfigSchema)
      if (s.name == key) return &s;
    return nullptr;
  }

 private:
  static std::string canonicalize(const KeySpec& spec, std::string_view raw, std::size_t line) {
    const std::string key(spec.name);
    switch (spec.kind) {
      case ValueKind::kUint: {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || ptr != raw.data() + raw.size() || raw.empty()) {
          throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + std::string(raw) + "'", line);
        }
        if (v > kMaxConfigUint) throw ConfigError("key '" + key + "' exceeds 2^53", line);
        return std::to_string(v);
      }
      case ValueKind::kReal: {
        const std::string s(raw);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
          throw ConfigError("key '" + key + "' expects a finite real number, got '" + s + "'", line);
        }
        return format_number(v);
      }
      case ValueKind::kBool:
        if (raw == "true" || raw == "1") return "true";
        if (raw == "false" || raw == "0") return "false";
        throw ConfigError("key '" + key + "' expects true or false, got '" + std::string(raw) + "'", line);
      case ValueKind::kText:
        if (raw.empty()) throw ConfigError("key '" + key + "' has an empty value", line);
        return std::string(raw);
      case ValueKind::kChoice: {
        std::string_view rest = spec.choices;
        while (!rest.empty()) {
          const auto bar = rest.find('|');
          if (rest.substr(0, bar) == raw) return std::string(raw);
          if (bar == std::string_view::npos) break;
          rest.remove_prefix(bar + 1);
        }
        throw ConfigError("key '" + key + "' must be one of " + std::string(spec.choices) + ", got '" +
                              std::string(raw) + "'",
                          line);
      }
    }
    return std::string(raw);
  }

  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

inline Config parse_config(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) {
      if (text.empty()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("malformed line, expected key=value", line_no);
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("malformed line, empty key", line_no);
    if (value.empty()) throw ConfigError("malformed line, empty value for '" + std::string(key) + "'", line_no);
    if (Config::find_spec(key) == nullptr) throw ConfigError("unknown key '" + std::string(key) + "'", line_no);
    if (cfg.has(key)) throw ConfigError("duplicate key '" + std::string(key) + "'", line_no);
    cfg.set(key, value, line_no);
  }
  return cfg;
}

/// One key=value per line in schema order.
inline std::string serialize_config(const Config& cfg) {
  std::string out;
  for (const auto& spec : kConfigSchema) {
    if (!cfg.has(spec.name)) continue;
    out += spec.name;
    out += '=';
    out += cfg.text(spec.name);
    out += '\n';
  }
  return out;
}

}  // namespace unroll
