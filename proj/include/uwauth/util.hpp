#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace uwauth {

// splitmix64 finalizer; used to derive independent seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> salts) noexcept {
  std::uint64_t s = mix_seed(base);
  for (auto v : salts) s = mix_seed(s ^ mix_seed(v + 0x5851f42d4c957f2dULL));
  return s;
}

// Stable 64-bit FNV-1a hash, used to turn tags into seed salts.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Fisher-Yates over raw engine output, so the permutation does not depend on
// the standard library's distribution implementations.
void shuffle_indices(std::vector<std::size_t>& order, std::mt19937_64& rng);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);

}  // namespace uwauth
