#include "cbo/rng.hpp"

#include <cmath>
#include <numbers>

namespace cbo {
namespace {

Philox4x32::Key derive_key(std::uint64_t seed, StreamTag tag) {
  const std::uint64_t k = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

// 53-bit mantissa, offset by half an ulp so that 0 is never produced.
double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

NoiseStream::NoiseStream(std::uint64_t seed, StreamTag tag)
    : seed_(seed), tag_(tag), engine_(derive_key(seed, tag)) {}

Philox4x32::Counter NoiseStream::block(std::uint64_t step, std::uint64_t index,
                                       std::uint32_t salt, std::uint32_t block_index) const {
  // Steps and indices above 2^32 fold their high words into the salt lane.
  const auto step_hi = static_cast<std::uint32_t>(step >> 32);
  const auto index_hi = static_cast<std::uint32_t>(index >> 32);
  Philox4x32::Counter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(index),
                          salt ^ (step_hi * 0x85EBCA6Bu) ^ (index_hi * 0xC2B2AE35u), block_index};
  return engine_(ctr);
}

void NoiseStream::uniform(std::uint64_t step, std::uint64_t index, std::span<double> out,
                          std::uint32_t salt) const {
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto r = block(step, index, salt, static_cast<std::uint32_t>(j / 2));
    out[j] = to_open_unit(r[0], r[1]);
    if (j + 1 < out.size()) out[j + 1] = to_open_unit(r[2], r[3]);
  }
}

void NoiseStream::standard_normal(std::uint64_t step, std::uint64_t index,
                                  std::span<double> out, std::uint32_t salt) const {
  // Box-Muller: one Philox block yields two uniforms, hence two normals.
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto r = block(step, index, salt, static_cast<std::uint32_t>(j / 2));
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[j] = radius * std::cos(angle);
    if (j + 1 < out.size()) out[j + 1] = radius * std::sin(angle);
  }
}

}  // namespace cbo
