#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace quasihom {

// Densities take values in [0,+inf]; +inf is a regular outcome, not an error.
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_finite(double v) { return std::isfinite(v); }

// Fractional part mapped to [0,1); exact for the periodicity identities we test.
inline double frac01(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f = 0.0;  // guards x just below an integer rounding up
  return f;
}

struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConstructionFailure : std::runtime_error {
  explicit ConstructionFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleMesh : std::runtime_error {
  explicit InfeasibleMesh(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a tabulated surrogate is queried outside its grid; carries the
// offending queries so the caller can widen the table.
struct CoverageError : std::runtime_error {
  std::vector<std::vector<double>> queries;
  CoverageError(const std::string& msg, std::vector<std::vector<double>> qs)
      : std::runtime_error(msg), queries(std::move(qs)) {}
};

// FNV-1a, used to fingerprint serialized specs in output manifests.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace quasihom
