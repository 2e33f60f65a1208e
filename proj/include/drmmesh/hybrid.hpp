#pragma once

#include <json.hpp>

#include <optional>
#include <unordered_map>

#include "drmmesh/pre.hpp"

namespace drmmesh {

using nlohmann::json;

// Canonical JSON bytes: key-sorted compact dump (nlohmann objects are
// key-sorted already), UTF-8, no insignificant whitespace.  This is the
// input for every signature in the system.
Bytes canonical_json_bytes(const json& obj);

// ---------------------------------------------------------------------------
// Content keys: bridge a G2 element to a 32-byte symmetric key.

struct ContentKey {
  Element g2_seed;
  Bytes derived_key;  // 32 bytes, recomputable from g2_seed
};

ContentKey kdf_content_key(const SystemParams& params, const Element& seed);

// ---------------------------------------------------------------------------
// Authenticated symmetric encryption (AES-256-GCM).
// Blob layout: 12-byte nonce || ciphertext || 16-byte tag.

Bytes aead_encrypt(const Bytes& key32, const Bytes& plaintext, const Bytes& aad,
                   RandomSource& rng);
// Throws CryptoError on authentication failure.
Bytes aead_decrypt(const Bytes& key32, const Bytes& blob, const Bytes& aad);

Bytes encrypt_content(const Bytes& plaintext, const ContentKey& ck, RandomSource& rng);
Bytes decrypt_content(const Bytes& ciphertext, const ContentKey& ck);

// ---------------------------------------------------------------------------
// Signatures: sigma = H(m)^sk in G1, verified by the pairing equation
// e(sigma, g) == e(H(m), g^sk).  Deterministic for a fixed key and message.

struct SigKeyPair {
  mpz_class sk;
  Element pk;  // g^sk
};

SigKeyPair sig_keygen(const SystemParams& params, RandomSource& rng);
SigKeyPair sig_keygen_with(const SystemParams& params, const mpz_class& sk);
Element sig_sign(const SystemParams& params, const mpz_class& sk, const Bytes& msg);
bool sig_verify(const SystemParams& params, const Element& pk, const Bytes& msg,
                const Element& sig);

// Signs obj (minus any "sig" member) and stores the signature in obj["sig"].
// The domain string separates signature uses (certificates, licenses, ...).
void sign_json(const SystemParams& params, const mpz_class& sk, json& obj,
               const std::string& domain);
bool verify_json(const SystemParams& params, const Element& pk, const json& obj,
                 const std::string& domain);

// Detached form of the same scheme: the signature element is returned /
// supplied separately instead of riding in obj["sig"].  Any existing "sig"
// member is ignored.
Element detached_sign_json(const SystemParams& params, const mpz_class& sk,
                           const json& obj, const std::string& domain);
bool detached_verify_json(const SystemParams& params, const Element& pk,
                          const json& obj, const std::string& domain,
                          const Element& sig);

// Detached signature container for opaque payloads.
struct SignedBlob {
  Bytes payload;
  Bytes signature;        // encoded G1 element
  std::string signer_id;  // certificate id of the signer
};

SignedBlob sign_blob(const SystemParams& params, const mpz_class& sk,
                     const std::string& signer_id, const Bytes& payload);

// ---------------------------------------------------------------------------
// Certificates: a deliberately small role-tagged credential model.

enum class CertRole {
  root,
  smartcard_provider,
  smartcard,
  content_provider,
  content_distributor,
  content_distributor_ephemeral,
};

const char* cert_role_name(CertRole role);
CertRole cert_role_from_name(const std::string& name);

struct Certificate {
  std::string cert_id;
  CertRole role = CertRole::root;
  std::string subject;   // human-readable holder label
  Millis ts = 0;         // issuance timestamp (ms)
  Bytes sig_pubkey;      // encoded G1 signature-verification key
  Bytes pre_pubkey;      // encoded PRE public key; empty when not applicable
  std::string issuer_id; // cert_id of the issuer (== cert_id for the root)
  Bytes signature;       // issuer's signature over the canonical body

  json to_json() const;
  static Certificate from_json(const json& j);
  bool operator==(const Certificate&) const = default;
};

// Signs `cert` with the issuer's key, setting issuer_id and signature.
void sign_certificate(const SystemParams& params, const mpz_class& issuer_sk,
                      const std::string& issuer_id, Certificate& cert);
bool verify_certificate_signature(const SystemParams& params,
                                  const Certificate& cert,
                                  const Element& issuer_pk);

// In-memory certificate pool for chain walking.
class CertStore {
 public:
  void add(const Certificate& cert);
  const Certificate* find(const std::string& cert_id) const;

 private:
  std::unordered_map<std::string, Certificate> by_id_;
};

// Walks leaf -> issuer -> ... -> root, checking signatures and that every
// issuer role may vouch for its subject's role.  The trusted root matches
// by value, not just id.  On failure returns false and stores a reason.
bool validate_chain(const SystemParams& params, const Certificate& leaf,
                    const CertStore& pool, const Certificate& trusted_root,
                    std::string* reason = nullptr);

bool role_may_issue(CertRole issuer, CertRole subject);

// ---------------------------------------------------------------------------
// KEM-DEM hybrid encryption for byte payloads (licenses and similar):
// encapsulate a fresh G2 seed with encrypt_first, derive the DEM key,
// AEAD-encrypt the payload.

struct HybridCiphertext {
  PreCiphertext kem;  // first-level ciphertext of the seed
  Bytes dem;          // AEAD blob of the payload
};

HybridCiphertext hybrid_encrypt(const SystemParams& params, const PrePublicKey& pk,
                                const Bytes& plaintext, const Bytes& aad,
                                RandomSource& rng);
// a1 is the recipient's first secret component.  Throws CryptoError when
// decapsulation produces the wrong key (AEAD failure).
Bytes hybrid_decrypt(const SystemParams& params, const HybridCiphertext& c,
                     const mpz_class& a1, const Bytes& aad);

Bytes encode_hybrid_ciphertext(const SystemParams& params, const HybridCiphertext& c);
HybridCiphertext decode_hybrid_ciphertext(const SystemParams& params, const Bytes& raw);

}  // namespace drmmesh
