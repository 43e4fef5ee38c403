#pragma once

// Shared plumbing: error categories, stable hashing and a portable seeded RNG.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kgc {

/// Binary class label or prediction (0 or 1); a byte so vectors of it are contiguous.
using Label = std::uint8_t;

enum class ErrorKind {
  Parse,
  Lookup,
  Generation,
  Config,
  Io,
  Numeric,
  Transport,
  Auth,
  Prerequisite,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Error raised while reading a line-oriented format; carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// 64-bit FNV-1a. Used for content hashes and to turn strings into seeds.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// splitmix64 finalizer; a good bijective mixer for combining seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(splitmix64(seed) ^ (salt + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  return mix_seed(seed, fnv1a64(salt));
}

/// Seeded generator whose output depends only on the seed, not on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// k distinct indices from [0, n), in selection order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string to_lower_ascii(std::string_view text);

/// Reads a whole file; throws Error(Io) on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace kgc
