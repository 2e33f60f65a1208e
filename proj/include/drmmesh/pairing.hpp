#pragma once

#include <gmpxx.h>

#include <memory>
#include <string>

#include "drmmesh/common.hpp"
#include "drmmesh/rng.hpp"

namespace drmmesh {

// Two groups of prime order q with a bilinear map e: G1 x G1 -> G2.
// G1 is the source group (written multiplicatively, generator g); G2 is the
// target group (generator z = e(g, g)).
enum class Group : uint8_t { G1 = 1, G2 = 2 };

// A group element in backend-canonical form.  The payload layout is private
// to the backend that produced it; equality of payloads is equality of
// elements because every backend keeps representations canonical.
struct Element {
  Group group = Group::G1;
  Bytes repr;

  bool operator==(const Element&) const = default;
};

// Operations a pairing implementation must provide.  Exponents live in
// Z_q.  Implementations are immutable after construction and safe to share
// across threads.
class PairingBackend {
 public:
  virtual ~PairingBackend() = default;

  virtual const std::string& id() const = 0;
  virtual uint8_t wire_id() const = 0;
  virtual const mpz_class& order() const = 0;

  virtual Element g1_generator() const = 0;
  // z = e(g, g), the canonical G2 generator.
  virtual Element g2_generator() const = 0;

  virtual Element g1_exp(const Element& a, const mpz_class& s) const = 0;
  virtual Element g2_exp(const Element& a, const mpz_class& s) const = 0;
  virtual Element g1_mul(const Element& a, const Element& b) const = 0;
  virtual Element g2_mul(const Element& a, const Element& b) const = 0;
  virtual Element g2_div(const Element& a, const Element& b) const = 0;

  virtual Element pairing(const Element& a, const Element& b) const = 0;

  // Deterministic hash onto G1, never the identity.
  virtual Element hash_to_g1(const Bytes& data) const = 0;

  virtual bool is_identity(const Element& a) const = 0;

  // Full membership validation of an untrusted payload (curve / subgroup /
  // range checks).  Throws CryptoError on failure.
  virtual void check_element(const Element& a) const = 0;

  // Canonical wire payload for an element (without the codec header), and
  // its validating inverse.  from_wire rejects non-canonical and
  // out-of-group payloads.
  virtual Bytes to_wire(const Element& a) const = 0;
  virtual Element from_wire(Group group, const Bytes& payload) const = 0;
};

// User-facing handle bundling a backend with scalar arithmetic and the
// wire codec for elements.  Cheap to copy.
class SystemParams {
 public:
  // Toy backend where group elements are their own discrete logs mod q.
  // Every protocol computation runs for real, but anyone can read the
  // exponents -- ideal for tests and cross-backend differential checks.
  // q must be a prime >= 101.
  static SystemParams transparent(uint64_t q = 101);

  // Real pairing over a supersingular curve (shared process-wide instance).
  static SystemParams production();

  const PairingBackend& backend() const { return *backend_; }
  const std::string& backend_id() const { return backend_->id(); }
  const mpz_class& order() const { return backend_->order(); }

  // --- scalars (Z_q) ---
  mpz_class random_scalar(RandomSource& rng) const;          // [0, q)
  mpz_class random_nonzero_scalar(RandomSource& rng) const;  // [1, q)
  mpz_class scalar_from_u64(uint64_t v) const;
  mpz_class scalar_add(const mpz_class& a, const mpz_class& b) const;
  mpz_class scalar_mul(const mpz_class& a, const mpz_class& b) const;
  mpz_class scalar_inv(const mpz_class& a) const;  // throws on 0
  Bytes encode_scalar(const mpz_class& s) const;
  mpz_class decode_scalar(const Bytes& raw) const;
  size_t scalar_size() const { return scalar_bytes_; }

  // --- elements ---
  Element g() const { return backend_->g1_generator(); }
  Element z() const { return backend_->g2_generator(); }
  Element g1_pow(const mpz_class& s) const { return backend_->g1_exp(g(), s); }
  Element g2_pow(const mpz_class& s) const { return backend_->g2_exp(z(), s); }
  Element g1_exp(const Element& a, const mpz_class& s) const { return backend_->g1_exp(a, s); }
  Element g2_exp(const Element& a, const mpz_class& s) const { return backend_->g2_exp(a, s); }
  Element g1_mul(const Element& a, const Element& b) const { return backend_->g1_mul(a, b); }
  Element g2_mul(const Element& a, const Element& b) const { return backend_->g2_mul(a, b); }
  Element g2_div(const Element& a, const Element& b) const { return backend_->g2_div(a, b); }
  Element pairing(const Element& a, const Element& b) const { return backend_->pairing(a, b); }
  Element hash_to_g1(const Bytes& data) const { return backend_->hash_to_g1(data); }
  bool is_identity(const Element& a) const { return backend_->is_identity(a); }

  // Wire format: [backend id][group][payload length u32 BE][payload].
  // decode validates group membership of untrusted payloads.
  Bytes encode_element(const Element& a) const;
  Element decode_element(const Bytes& raw) const;

  bool operator==(const SystemParams& other) const { return backend_ == other.backend_; }

 private:
  explicit SystemParams(std::shared_ptr<const PairingBackend> backend);

  std::shared_ptr<const PairingBackend> backend_;
  size_t scalar_bytes_ = 0;
};

// Test-only constructors for the transparent backend: build g^e / z^e
// directly from an exponent, and read an element's exponent back.
Element transparent_g1(const SystemParams& params, uint64_t exponent);
Element transparent_g2(const SystemParams& params, uint64_t exponent);
uint64_t transparent_exponent(const Element& a);

// mpz <-> fixed-width big-endian bytes.
Bytes mpz_to_bytes(const mpz_class& v, size_t width);
mpz_class mpz_from_bytes(const uint8_t* p, size_t n);
inline mpz_class mpz_from_bytes(const Bytes& b) { return mpz_from_bytes(b.data(), b.size()); }

}  // namespace drmmesh
