#include "drmmesh/pairing.hpp"

namespace drmmesh {

Bytes mpz_to_bytes(const mpz_class& v, size_t width) {
  if (sgn(v) < 0) throw CodecError("mpz_to_bytes: negative value");
  Bytes out(width, 0);
  size_t count = 0;
  mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  if (count > width) throw CodecError("mpz_to_bytes: value too wide");
  // mpz_export writes at the front; shift right for fixed-width BE.
  if (count < width) {
    std::copy_backward(out.begin(), out.begin() + count, out.end());
    std::fill(out.begin(), out.begin() + (width - count), 0);
  }
  return out;
}

mpz_class mpz_from_bytes(const uint8_t* p, size_t n) {
  mpz_class v;
  if (n > 0) mpz_import(v.get_mpz_t(), n, 1, 1, 1, 0, p);
  return v;
}

// ---------------------------------------------------------------------------
// Transparent backend: an element of G1 is the exponent e of g^e, stored as
// 8 bytes big-endian; same for G2 and z^e.  The bilinear map multiplies
// exponents.  All algebraic identities of a real pairing hold, but discrete
// logs are free for the taking, which is exactly what protocol tests want.

namespace {

class TransparentBackend final : public PairingBackend {
 public:
  explicit TransparentBackend(uint64_t q) : q_(mpz_class{}), id_("transparent") {
    mpz_class qq;
    mpz_import(qq.get_mpz_t(), 1, 1, sizeof(uint64_t), 0, 0, &q);
    if (qq < 101) throw Error("transparent backend: order must be >= 101");
    if (mpz_probab_prime_p(qq.get_mpz_t(), 40) == 0) {
      throw Error("transparent backend: order must be prime");
    }
    q_ = qq;
  }

  const std::string& id() const override { return id_; }
  uint8_t wire_id() const override { return 1; }
  const mpz_class& order() const override { return q_; }

  Element g1_generator() const override { return make(Group::G1, 1); }
  Element g2_generator() const override { return make(Group::G2, 1); }

  Element g1_exp(const Element& a, const mpz_class& s) const override {
    return exp(Group::G1, a, s);
  }
  Element g2_exp(const Element& a, const mpz_class& s) const override {
    return exp(Group::G2, a, s);
  }
  Element g1_mul(const Element& a, const Element& b) const override {
    return mul(Group::G1, a, b);
  }
  Element g2_mul(const Element& a, const Element& b) const override {
    return mul(Group::G2, a, b);
  }
  Element g2_div(const Element& a, const Element& b) const override {
    mpz_class e = (read(Group::G2, a) - read(Group::G2, b)) % q_;
    if (sgn(e) < 0) e += q_;
    return make(Group::G2, e);
  }

  Element pairing(const Element& a, const Element& b) const override {
    // e(g^x, g^y) = z^{xy}
    return make(Group::G2, read(Group::G1, a) * read(Group::G1, b) % q_);
  }

  Element hash_to_g1(const Bytes& data) const override {
    Bytes material = data;
    for (uint8_t round = 0;; ++round) {
      Bytes digest = sha256(material);
      mpz_class e = mpz_from_bytes(digest) % q_;
      if (sgn(e) != 0) return make(Group::G1, e);
      material = digest;
      material.push_back(round);
    }
  }

  bool is_identity(const Element& a) const override {
    return sgn(read(a.group, a)) == 0;
  }

  void check_element(const Element& a) const override {
    if (a.repr.size() != 8) throw CryptoError("transparent element: bad size");
    if (mpz_from_bytes(a.repr) >= q_) throw CryptoError("transparent element: out of range");
  }

  // Wire payload: the exponent as minimal big-endian bytes (empty for 0).
  Bytes to_wire(const Element& a) const override {
    check_element(a);
    size_t i = 0;
    while (i < a.repr.size() && a.repr[i] == 0) ++i;
    return Bytes(a.repr.begin() + i, a.repr.end());
  }

  Element from_wire(Group group, const Bytes& payload) const override {
    if (payload.size() > 8) throw CodecError("transparent element: payload too long");
    if (!payload.empty() && payload[0] == 0) {
      throw CodecError("transparent element: non-minimal payload");
    }
    Bytes repr(8 - payload.size(), 0);
    repr.insert(repr.end(), payload.begin(), payload.end());
    Element e{group, std::move(repr)};
    check_element(e);
    return e;
  }

 private:
  Element make(Group grp, const mpz_class& e) const {
    return Element{grp, mpz_to_bytes(e, 8)};
  }

  mpz_class read(Group grp, const Element& a) const {
    if (a.group != grp) throw CryptoError("transparent element: wrong group");
    if (a.repr.size() != 8) throw CryptoError("transparent element: bad size");
    return mpz_from_bytes(a.repr);
  }

  Element exp(Group grp, const Element& a, const mpz_class& s) const {
    mpz_class e = read(grp, a) * (s % q_) % q_;
    if (sgn(e) < 0) e += q_;
    return make(grp, e);
  }

  Element mul(Group grp, const Element& a, const Element& b) const {
    return make(grp, (read(grp, a) + read(grp, b)) % q_);
  }

  mpz_class q_;
  std::string id_;
};

}  // namespace

// ---------------------------------------------------------------------------
// SystemParams

SystemParams::SystemParams(std::shared_ptr<const PairingBackend> backend)
    : backend_(std::move(backend)) {
  size_t bits = mpz_sizeinbase(backend_->order().get_mpz_t(), 2);
  scalar_bytes_ = std::max<size_t>(8, (bits + 7) / 8);
}

SystemParams SystemParams::transparent(uint64_t q) {
  return SystemParams(std::make_shared<TransparentBackend>(q));
}

mpz_class SystemParams::random_scalar(RandomSource& rng) const {
  const mpz_class& q = backend_->order();
  size_t bits = mpz_sizeinbase(q.get_mpz_t(), 2);
  size_t nbytes = (bits + 7) / 8;
  // Rejection sampling after masking excess top bits keeps the draw uniform.
  unsigned excess = static_cast<unsigned>(nbytes * 8 - bits);
  for (;;) {
    Bytes buf = rng.bytes(nbytes);
    buf[0] &= static_cast<uint8_t>(0xff >> excess);
    mpz_class v = mpz_from_bytes(buf);
    if (v < q) return v;
  }
}

mpz_class SystemParams::random_nonzero_scalar(RandomSource& rng) const {
  for (;;) {
    mpz_class v = random_scalar(rng);
    if (sgn(v) != 0) return v;
  }
}

mpz_class SystemParams::scalar_from_u64(uint64_t v) const {
  mpz_class m;
  mpz_import(m.get_mpz_t(), 1, 1, sizeof(uint64_t), 0, 0, &v);
  return m % backend_->order();
}

mpz_class SystemParams::scalar_add(const mpz_class& a, const mpz_class& b) const {
  return (a + b) % backend_->order();
}

mpz_class SystemParams::scalar_mul(const mpz_class& a, const mpz_class& b) const {
  return a * b % backend_->order();
}

mpz_class SystemParams::scalar_inv(const mpz_class& a) const {
  if (sgn(a % backend_->order()) == 0) throw CryptoError("scalar_inv: zero");
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), backend_->order().get_mpz_t()) == 0) {
    throw CryptoError("scalar_inv: not invertible");
  }
  return r;
}

Bytes SystemParams::encode_scalar(const mpz_class& s) const {
  mpz_class v = s % backend_->order();
  if (sgn(v) < 0) v += backend_->order();
  return mpz_to_bytes(v, scalar_bytes_);
}

mpz_class SystemParams::decode_scalar(const Bytes& raw) const {
  if (raw.size() != scalar_bytes_) throw CodecError("decode_scalar: bad length");
  mpz_class v = mpz_from_bytes(raw);
  if (v >= backend_->order()) throw CodecError("decode_scalar: out of range");
  return v;
}

Bytes SystemParams::encode_element(const Element& a) const {
  Bytes payload = backend_->to_wire(a);
  Bytes out;
  out.push_back(backend_->wire_id());
  out.push_back(static_cast<uint8_t>(a.group));
  put_u32_be(out, static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Element SystemParams::decode_element(const Bytes& raw) const {
  if (raw.size() < 6) throw CodecError("decode_element: truncated header");
  if (raw[0] != backend_->wire_id()) throw CodecError("decode_element: backend mismatch");
  if (raw[1] != static_cast<uint8_t>(Group::G1) && raw[1] != static_cast<uint8_t>(Group::G2)) {
    throw CodecError("decode_element: bad group tag");
  }
  uint32_t len = get_u32_be(raw.data() + 2);
  if (raw.size() != 6 + static_cast<size_t>(len)) throw CodecError("decode_element: bad length");
  return backend_->from_wire(static_cast<Group>(raw[1]),
                             Bytes(raw.begin() + 6, raw.end()));
}

// ---------------------------------------------------------------------------
// Test helpers

Element transparent_g1(const SystemParams& params, uint64_t exponent) {
  if (params.backend_id() != "transparent") throw Error("transparent_g1: wrong backend");
  return Element{Group::G1, mpz_to_bytes(params.scalar_from_u64(exponent), 8)};
}

Element transparent_g2(const SystemParams& params, uint64_t exponent) {
  if (params.backend_id() != "transparent") throw Error("transparent_g2: wrong backend");
  return Element{Group::G2, mpz_to_bytes(params.scalar_from_u64(exponent), 8)};
}

uint64_t transparent_exponent(const Element& a) {
  if (a.repr.size() != 8) throw Error("transparent_exponent: bad element");
  return get_u64_be(a.repr.data());
}

}  // namespace drmmesh
