#include "drmmesh/rng.hpp"

#include <openssl/rand.h>

#include <cstring>

namespace drmmesh {

uint64_t RandomSource::below(uint64_t bound) {
  if (bound == 0) throw Error("RandomSource::below: zero bound");
  // Rejection sampling over the largest multiple of bound that fits.
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    uint64_t v = u64();
    if (v < limit) return v % bound;
  }
}

void SeededRng::fill(uint8_t* out, size_t n) {
  size_t i = 0;
  while (i < n) {
    uint64_t v = gen_();
    for (int b = 7; b >= 0 && i < n; --b) {
      out[i++] = static_cast<uint8_t>(v >> (b * 8));
    }
  }
}

void SystemRng::fill(uint8_t* out, size_t n) {
  if (n == 0) return;
  if (RAND_bytes(out, static_cast<int>(n)) != 1) {
    throw CryptoError("SystemRng: RAND_bytes failed");
  }
}

void ScriptRng::fill(uint8_t* out, size_t n) {
  if (pos_ + n > script_.size()) throw Error("ScriptRng: script exhausted");
  std::memcpy(out, script_.data() + pos_, n);
  pos_ += n;
}

uint64_t derive_seed(uint64_t parent, const std::string& label) {
  Bytes material;
  put_u64_be(material, parent);
  material.insert(material.end(), label.begin(), label.end());
  Bytes digest = sha256(material);
  return get_u64_be(digest.data());
}

}  // namespace drmmesh
