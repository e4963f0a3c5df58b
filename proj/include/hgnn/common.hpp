#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hgnn {

/// Base error for everything the library rejects. Messages carry the
/// offending name or location so callers can print them as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; the building block of counter-based seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent seed for stream `stream` of `base`. Trial k of a
/// plan uses derive_seed(master, k), so it can be replayed without the others.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t sub);

std::uint64_t hash_string(std::string_view text);

// Hand-written distributions: identical streams on every standard library.

/// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Shortest fixed-notation decimal that round-trips (0.0001, not 1e-04).
std::string format_decimal(double value);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

}  // namespace hgnn
