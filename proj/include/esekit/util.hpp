#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace esekit {

inline constexpr std::string_view kToolVersion = "0.3.0";

// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

// SplitMix64 step; the only mixing primitive used for seed derivation so
// every derived stream is reproducible across platforms.
std::uint64_t splitmix64(std::uint64_t x);

// Derives a child seed from a parent seed and a string label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

// Small deterministic generator. std::uniform_*_distribution is not
// portable across standard libraries, so draws go through these helpers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }
  // Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform in [0, n).
  std::size_t below(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(next() % n);
  }

 private:
  std::uint64_t state_;
};

// Runs fn(i) for i in [0, n) on up to `width` threads. Exceptions from
// workers are rethrown (the first by index) after all workers join.
void parallel_for(std::size_t n, unsigned width,
                  const std::function<void(std::size_t)>& fn);

// Reads a whole file; throws Environment on failure.
std::string read_file(const std::string& path);

// Writes a whole file atomically (temp file + rename); throws Environment.
void write_file(const std::string& path, std::string_view data);

}  // namespace esekit
