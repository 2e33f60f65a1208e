#include "drmmesh/pre.hpp"

namespace drmmesh {

namespace {

void require_kind(const PreCiphertext& c, CiphertextKind want, const char* op) {
  if (c.kind != want) {
    throw CryptoError(std::string(op) + ": wrong ciphertext kind");
  }
}

}  // namespace

PreKeyPair pre_keygen(const SystemParams& params, RandomSource& rng) {
  return pre_keygen_with(params, params.random_nonzero_scalar(rng),
                         params.random_nonzero_scalar(rng));
}

PreKeyPair pre_keygen_with(const SystemParams& params, const mpz_class& a1,
                           const mpz_class& a2) {
  PreKeyPair kp;
  kp.a1 = a1 % params.order();
  kp.a2 = a2 % params.order();
  kp.pub.z_a1 = params.g2_pow(kp.a1);
  kp.pub.g_a2 = params.g1_pow(kp.a2);
  return kp;
}

Element pre_rekeygen(const SystemParams& params, const PreKeyPair& delegator,
                     const PrePublicKey& delegatee) {
  if (sgn(delegator.a1 % params.order()) == 0) {
    throw CryptoError("pre_rekeygen: zero delegator exponent");
  }
  return params.g1_exp(delegatee.g_a2, delegator.a1);
}

Element pre_random_message(const SystemParams& params, RandomSource& rng) {
  return params.g2_pow(params.random_nonzero_scalar(rng));
}

PreCiphertext pre_encrypt_first(const SystemParams& params, const Element& m,
                                const PrePublicKey& pk, RandomSource& rng) {
  return pre_encrypt_first_with(params, m, pk, params.random_nonzero_scalar(rng));
}

PreCiphertext pre_encrypt_first_with(const SystemParams& params, const Element& m,
                                     const PrePublicKey& pk, const mpz_class& k) {
  PreCiphertext c;
  c.kind = CiphertextKind::First;
  c.alpha = params.g2_exp(pk.z_a1, k);
  c.beta = params.g2_mul(m, params.g2_pow(k));
  return c;
}

PreCiphertext pre_encrypt_second(const SystemParams& params, const Element& m,
                                 const PrePublicKey& pk, RandomSource& rng) {
  return pre_encrypt_second_with(params, m, pk, params.random_nonzero_scalar(rng));
}

PreCiphertext pre_encrypt_second_with(const SystemParams& params, const Element& m,
                                      const PrePublicKey& pk, const mpz_class& k) {
  PreCiphertext c;
  c.kind = CiphertextKind::Second;
  c.alpha = params.g1_pow(k);
  c.beta = params.g2_mul(m, params.g2_exp(pk.z_a1, k));
  return c;
}

PreCiphertext pre_reencrypt(const SystemParams& params, const PreCiphertext& c,
                            const Element& rk) {
  require_kind(c, CiphertextKind::Second, "pre_reencrypt");
  PreCiphertext out;
  out.kind = CiphertextKind::Reencrypted;
  out.alpha = params.pairing(c.alpha, rk);
  out.beta = c.beta;
  return out;
}

PreCiphertext pre_rerandomize_second(const SystemParams& params,
                                     const PreCiphertext& c,
                                     const PrePublicKey& pk, RandomSource& rng) {
  return pre_rerandomize_second_with(params, c, pk,
                                     params.random_nonzero_scalar(rng));
}

PreCiphertext pre_rerandomize_second_with(const SystemParams& params,
                                          const PreCiphertext& c,
                                          const PrePublicKey& pk,
                                          const mpz_class& k) {
  require_kind(c, CiphertextKind::Second, "pre_rerandomize_second");
  PreCiphertext out;
  out.kind = CiphertextKind::Second;
  out.alpha = params.g1_mul(c.alpha, params.g1_pow(k));
  out.beta = params.g2_mul(c.beta, params.g2_exp(pk.z_a1, k));
  return out;
}

Element pre_decrypt_first(const SystemParams& params, const PreCiphertext& c,
                          const mpz_class& secret) {
  if (c.kind != CiphertextKind::First && c.kind != CiphertextKind::Reencrypted) {
    throw CryptoError("pre_decrypt_first: wrong ciphertext kind");
  }
  return params.g2_div(c.beta, params.g2_exp(c.alpha, params.scalar_inv(secret)));
}

Element pre_decrypt_first(const SystemParams& params, const PreCiphertext& c,
                          const PreKeyPair& sk) {
  if (c.kind == CiphertextKind::First) return pre_decrypt_first(params, c, sk.a1);
  return pre_decrypt_first(params, c, sk.a2);
}

Element pre_decrypt_second(const SystemParams& params, const PreCiphertext& c,
                           const PreKeyPair& sk) {
  require_kind(c, CiphertextKind::Second, "pre_decrypt_second");
  Element paired = params.pairing(c.alpha, params.g());  // z^k
  return params.g2_div(c.beta,
                       params.g2_exp(paired, sk.a1));  // beta / z^(a1 k)
}

// ---------------------------------------------------------------------------
// codecs

static void append_element(const SystemParams& params, Bytes& out, const Element& e) {
  Bytes enc = params.encode_element(e);
  put_u32_be(out, static_cast<uint32_t>(enc.size()));
  out.insert(out.end(), enc.begin(), enc.end());
}

static Element read_element(const SystemParams& params, const Bytes& raw,
                            size_t& pos, Group want, const char* what) {
  if (pos + 4 > raw.size()) throw CodecError(std::string(what) + ": truncated");
  uint32_t len = get_u32_be(raw.data() + pos);
  pos += 4;
  if (pos + len > raw.size()) throw CodecError(std::string(what) + ": truncated");
  Element e = params.decode_element(Bytes(raw.begin() + pos, raw.begin() + pos + len));
  pos += len;
  if (e.group != want) throw CodecError(std::string(what) + ": wrong group");
  return e;
}

Bytes encode_pre_ciphertext(const SystemParams& params, const PreCiphertext& c) {
  Bytes out;
  out.push_back(static_cast<uint8_t>(c.kind));
  append_element(params, out, c.alpha);
  append_element(params, out, c.beta);
  return out;
}

PreCiphertext decode_pre_ciphertext(const SystemParams& params, const Bytes& raw) {
  if (raw.empty()) throw CodecError("pre ciphertext: empty");
  uint8_t kind = raw[0];
  if (kind < 1 || kind > 3) throw CodecError("pre ciphertext: unknown kind");
  PreCiphertext c;
  c.kind = static_cast<CiphertextKind>(kind);
  Group alpha_group = c.kind == CiphertextKind::Second ? Group::G1 : Group::G2;
  size_t pos = 1;
  c.alpha = read_element(params, raw, pos, alpha_group, "pre ciphertext alpha");
  c.beta = read_element(params, raw, pos, Group::G2, "pre ciphertext beta");
  if (pos != raw.size()) throw CodecError("pre ciphertext: trailing bytes");
  return c;
}

Bytes encode_pre_public_key(const SystemParams& params, const PrePublicKey& pk) {
  Bytes out;
  append_element(params, out, pk.z_a1);
  append_element(params, out, pk.g_a2);
  return out;
}

PrePublicKey decode_pre_public_key(const SystemParams& params, const Bytes& raw) {
  PrePublicKey pk;
  size_t pos = 0;
  pk.z_a1 = read_element(params, raw, pos, Group::G2, "pre public key z_a1");
  pk.g_a2 = read_element(params, raw, pos, Group::G1, "pre public key g_a2");
  if (pos != raw.size()) throw CodecError("pre public key: trailing bytes");
  return pk;
}

Bytes pre_public_key_fingerprint(const SystemParams& params, const PrePublicKey& pk) {
  return sha256(encode_pre_public_key(params, pk));
}

}  // namespace drmmesh
