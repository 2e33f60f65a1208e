#pragma once

#include "drmmesh/pairing.hpp"

namespace drmmesh {

// Unidirectional single-hop proxy re-encryption over a symmetric pairing
// e: G1 x G1 -> G2 with generators g and z = e(g, g).
//
//   keys        sk = (a1, a2),  pk = (z^a1, g^a2)
//   delegation  rk(A->B) = (g^b2)^a1          -- B never reveals b2
//   first       E1(m, pk)  = (z^(a1 k), m z^k)
//   second      E2(m, pk)  = (g^k,      m z^(a1 k))
//   re-encrypt  R(c2, rk)  = (e(g^k, rk), beta) = (z^(b2 a1 k), m z^(a1 k))
//   decrypt     m = beta / alpha^(1/s)   with s = a1 (first) or b2 (re-enc.)
//
// A second-level ciphertext can be handed to a proxy for delegation; a
// first-level one can only ever be opened by the key owner.  Messages are
// G2 elements (use the hybrid layer for byte payloads).

struct PrePublicKey {
  Element z_a1;  // z^a1, G2
  Element g_a2;  // g^a2, G1
};

struct PreKeyPair {
  mpz_class a1;
  mpz_class a2;
  PrePublicKey pub;
};

enum class CiphertextKind : uint8_t {
  First = 1,        // (G2, G2), owner-only
  Reencrypted = 2,  // (G2, G2), opened by the delegatee
  Second = 3,       // (G1, G2), delegatable
};

struct PreCiphertext {
  CiphertextKind kind = CiphertextKind::First;
  Element alpha;
  Element beta;
};

// A delegation credential plus opaque identifiers for the two key pairs it
// connects (so protocol layers can route it without inspecting key bytes).
struct ReEncryptionKey {
  Element rk;             // g^(a1 * b2)
  std::string from_hint;  // delegator key identifier
  std::string to_hint;    // delegatee key identifier
};

PreKeyPair pre_keygen(const SystemParams& params, RandomSource& rng);
PreKeyPair pre_keygen_with(const SystemParams& params, const mpz_class& a1,
                           const mpz_class& a2);

// rk(A->B) from A's secret and B's public key.  Throws CryptoError when the
// delegator exponent is zero (the resulting key could never decrypt).
Element pre_rekeygen(const SystemParams& params, const PreKeyPair& delegator,
                     const PrePublicKey& delegatee);

Element pre_random_message(const SystemParams& params, RandomSource& rng);

PreCiphertext pre_encrypt_first(const SystemParams& params, const Element& m,
                                const PrePublicKey& pk, RandomSource& rng);
PreCiphertext pre_encrypt_first_with(const SystemParams& params, const Element& m,
                                     const PrePublicKey& pk, const mpz_class& k);

PreCiphertext pre_encrypt_second(const SystemParams& params, const Element& m,
                                 const PrePublicKey& pk, RandomSource& rng);
PreCiphertext pre_encrypt_second_with(const SystemParams& params, const Element& m,
                                      const PrePublicKey& pk, const mpz_class& k);

PreCiphertext pre_reencrypt(const SystemParams& params, const PreCiphertext& c,
                            const Element& rk);

// Refresh a second-level ciphertext in place: alpha *= g^k', beta *= (z^a1)^k'.
// Needs only the public key, preserves the plaintext, and makes the new
// ciphertext bytes unlinkable to the old ones.
PreCiphertext pre_rerandomize_second(const SystemParams& params,
                                     const PreCiphertext& c,
                                     const PrePublicKey& pk, RandomSource& rng);
PreCiphertext pre_rerandomize_second_with(const SystemParams& params,
                                          const PreCiphertext& c,
                                          const PrePublicKey& pk,
                                          const mpz_class& k);

// Opens First and Reencrypted ciphertexts with an explicit secret exponent:
// the key's a1 for First, its a2 for Reencrypted.
Element pre_decrypt_first(const SystemParams& params, const PreCiphertext& c,
                          const mpz_class& secret);
// Convenience overload selecting the proper component by ciphertext kind.
Element pre_decrypt_first(const SystemParams& params, const PreCiphertext& c,
                          const PreKeyPair& sk);
// Opens Second ciphertexts directly (one pairing, with a1).
Element pre_decrypt_second(const SystemParams& params, const PreCiphertext& c,
                           const PreKeyPair& sk);

// Wire codecs: [kind][u32 len][alpha][u32 len][beta], group-checked on decode.
Bytes encode_pre_ciphertext(const SystemParams& params, const PreCiphertext& c);
PreCiphertext decode_pre_ciphertext(const SystemParams& params, const Bytes& raw);

Bytes encode_pre_public_key(const SystemParams& params, const PrePublicKey& pk);
PrePublicKey decode_pre_public_key(const SystemParams& params, const Bytes& raw);

// SHA-256 over the encoded public key; used as a stable key identifier.
Bytes pre_public_key_fingerprint(const SystemParams& params, const PrePublicKey& pk);

}  // namespace drmmesh
