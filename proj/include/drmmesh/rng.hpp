#pragma once

#include <memory>
#include <random>

#include "drmmesh/common.hpp"

namespace drmmesh {

// Source of randomness.  Everything in the library draws through this
// interface so simulations can be made fully deterministic.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(uint8_t* out, size_t n) = 0;

  Bytes bytes(size_t n) {
    Bytes out(n);
    if (n > 0) fill(out.data(), n);
    return out;
  }

  uint64_t u64() {
    uint8_t buf[8];
    fill(buf, sizeof buf);
    return get_u64_be(buf);
  }

  // Uniform value in [0, bound) via rejection sampling; bound > 0.
  uint64_t below(uint64_t bound);
};

// Deterministic source seeded from a 64-bit value (mt19937_64).  Not for
// real key material -- simulations and tests only.
class SeededRng final : public RandomSource {
 public:
  explicit SeededRng(uint64_t seed) : gen_(seed) {}
  void fill(uint8_t* out, size_t n) override;

 private:
  std::mt19937_64 gen_;
};

// OS-backed CSPRNG (OpenSSL RAND_bytes).
class SystemRng final : public RandomSource {
 public:
  void fill(uint8_t* out, size_t n) override;
};

// Replays a fixed byte script, then throws.  Lets tests pin exact values
// that an implementation will draw.
class ScriptRng final : public RandomSource {
 public:
  explicit ScriptRng(Bytes script) : script_(std::move(script)) {}
  void fill(uint8_t* out, size_t n) override;

 private:
  Bytes script_;
  size_t pos_ = 0;
};

// Derive an independent deterministic sub-seed from a parent seed and a
// textual label (order-independent across actors).
uint64_t derive_seed(uint64_t parent, const std::string& label);

}  // namespace drmmesh
