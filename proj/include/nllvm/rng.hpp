#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nllvm {

//! 64-bit finaliser used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! FNV-1a hash of a label, used to separate streams of different commands.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

//! Seeded random stream. Every sampler in the library takes one of these by
//! reference, so a run is a pure function of the seeds handed out.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : seed_(seed)
    , engine_(splitmix64(seed))
  {
  }

  std::uint64_t seed() const noexcept { return seed_; }

  //! Independent child stream for replicate / task `index`.
  Rng stream(std::uint64_t index) const
  {
    return Rng(splitmix64(seed_ ^ splitmix64(index + 0x5851f42d4c957f2dULL)));
  }

  //! Stream derived from (seed, label, index); label is typically a command.
  static Rng for_task(std::uint64_t seed,
                      std::string_view label,
                      std::uint64_t index)
  {
    return Rng(splitmix64(seed ^ fnv1a(label)) ^ splitmix64(index));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi)
  {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd)
  {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  //! Gamma draw parameterised by shape and rate.
  double gamma(double shape, double rate)
  {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

} // namespace nllvm
