#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace carbonlace {

// Error with a stable category used by the CLI to pick exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { Config, Parse, Semantic, Infeasible, Unbounded, Numerical, Training, Io };
  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline Error parse_error(const std::string& msg) { return Error(Error::Kind::Parse, msg); }
inline Error semantic_error(const std::string& msg) { return Error(Error::Kind::Semantic, msg); }

// FNV-1a, used for case/config self-description hashes in output headers.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Shortest decimal that round-trips a double (17 significant digits is always enough).
inline std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) return buf;
  }
  return buf;
}

// Deterministic 64-bit generator (splitmix64). Used wherever reproducibility
// across platforms matters; std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // modulo bias is irrelevant at our scales but cheap to avoid
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller (deterministic, no std:: distribution)
  double next_gaussian() {
    double u1 = 0.0;
    do { u1 = next_double(); } while (u1 <= 1e-300);
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // derive an independent stream, e.g. per scenario index
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t h = fnv1a64(&seed, sizeof(seed));
    h = fnv1a64(&stream, sizeof(stream), h);
    return h;
  }

 private:
  std::uint64_t state_;
};

}  // namespace carbonlace
