#include "drmmesh/hybrid.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

namespace drmmesh {

namespace {

constexpr size_t kAeadKeyLen = 32;
constexpr size_t kAeadNonceLen = 12;
constexpr size_t kAeadTagLen = 16;

const std::string kKdfDomain = "drmmesh/content-key/v1";
const std::string kSigDomain = "drmmesh/sig/v1/";
const std::string kCertDomain = "certificate";

struct EvpCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using EvpCtx = std::unique_ptr<EVP_CIPHER_CTX, EvpCtxFree>;

}  // namespace

Bytes canonical_json_bytes(const json& obj) {
  return str_bytes(obj.dump());
}

ContentKey kdf_content_key(const SystemParams& params, const Element& seed) {
  if (seed.group != Group::G2) throw CryptoError("content key seed must be a pairing value");
  Bytes input = str_bytes(kKdfDomain);
  Bytes enc = params.encode_element(seed);
  input.insert(input.end(), enc.begin(), enc.end());
  ContentKey ck;
  ck.g2_seed = seed;
  ck.derived_key = sha256(input);
  return ck;
}

Bytes aead_encrypt(const Bytes& key32, const Bytes& plaintext, const Bytes& aad,
                   RandomSource& rng) {
  if (key32.size() != kAeadKeyLen) throw CryptoError("aead key must be 32 bytes");
  Bytes nonce = rng.bytes(kAeadNonceLen);

  EvpCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("aead context allocation failed");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(),
                         nonce.data()) != 1)
    throw CryptoError("aead encrypt init failed");

  int outl = 0;
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &outl, aad.data(), (int)aad.size()) != 1)
    throw CryptoError("aead aad update failed");

  Bytes out(kAeadNonceLen + plaintext.size() + kAeadTagLen);
  std::copy(nonce.begin(), nonce.end(), out.begin());
  uint8_t* ct = out.data() + kAeadNonceLen;
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), ct, &outl, plaintext.data(), (int)plaintext.size()) != 1)
    throw CryptoError("aead encrypt update failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), ct + outl, &fin) != 1)
    throw CryptoError("aead encrypt final failed");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagLen,
                          out.data() + kAeadNonceLen + plaintext.size()) != 1)
    throw CryptoError("aead tag extraction failed");
  return out;
}

Bytes aead_decrypt(const Bytes& key32, const Bytes& blob, const Bytes& aad) {
  if (key32.size() != kAeadKeyLen) throw CryptoError("aead key must be 32 bytes");
  if (blob.size() < kAeadNonceLen + kAeadTagLen)
    throw CryptoError("aead blob too short");
  const uint8_t* nonce = blob.data();
  const size_t ct_len = blob.size() - kAeadNonceLen - kAeadTagLen;
  const uint8_t* ct = blob.data() + kAeadNonceLen;
  Bytes tag(blob.end() - kAeadTagLen, blob.end());

  EvpCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("aead context allocation failed");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(), nonce) != 1)
    throw CryptoError("aead decrypt init failed");

  int outl = 0;
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &outl, aad.data(), (int)aad.size()) != 1)
    throw CryptoError("aead aad update failed");

  Bytes out(ct_len);
  if (ct_len > 0 &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &outl, ct, (int)ct_len) != 1)
    throw CryptoError("aead decrypt update failed");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagLen, tag.data()) != 1)
    throw CryptoError("aead tag set failed");
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + outl, &fin) != 1)
    throw CryptoError("aead authentication failed");
  return out;
}

Bytes encrypt_content(const Bytes& plaintext, const ContentKey& ck, RandomSource& rng) {
  return aead_encrypt(ck.derived_key, plaintext, str_bytes("content"), rng);
}

Bytes decrypt_content(const Bytes& ciphertext, const ContentKey& ck) {
  return aead_decrypt(ck.derived_key, ciphertext, str_bytes("content"));
}

// ---------------------------------------------------------------------------
// Signatures.

SigKeyPair sig_keygen(const SystemParams& params, RandomSource& rng) {
  return sig_keygen_with(params, params.random_nonzero_scalar(rng));
}

SigKeyPair sig_keygen_with(const SystemParams& params, const mpz_class& sk) {
  if (sk == 0) throw CryptoError("signature secret must be nonzero");
  SigKeyPair kp;
  kp.sk = sk % params.order();
  kp.pk = params.g1_pow(kp.sk);
  return kp;
}

Element sig_sign(const SystemParams& params, const mpz_class& sk, const Bytes& msg) {
  Bytes input = str_bytes(kSigDomain);
  input.insert(input.end(), msg.begin(), msg.end());
  Element h = params.backend().hash_to_g1(input);
  return params.g1_exp(h, sk);
}

bool sig_verify(const SystemParams& params, const Element& pk, const Bytes& msg,
                const Element& sig) {
  if (pk.group != Group::G1 || sig.group != Group::G1) return false;
  try {
    params.backend().check_element(sig);
    params.backend().check_element(pk);
  } catch (const Error&) {
    return false;
  }
  Bytes input = str_bytes(kSigDomain);
  input.insert(input.end(), msg.begin(), msg.end());
  Element h = params.backend().hash_to_g1(input);
  Element lhs = params.backend().pairing(sig, params.g());
  Element rhs = params.backend().pairing(h, pk);
  return lhs == rhs;
}

namespace {

Bytes json_signing_message(const json& obj, const std::string& domain) {
  json body = obj;
  body.erase("sig");
  Bytes msg = str_bytes(domain + "\n");
  Bytes canon = canonical_json_bytes(body);
  msg.insert(msg.end(), canon.begin(), canon.end());
  return msg;
}

}  // namespace

Element detached_sign_json(const SystemParams& params, const mpz_class& sk,
                           const json& obj, const std::string& domain) {
  return sig_sign(params, sk, json_signing_message(obj, domain));
}

bool detached_verify_json(const SystemParams& params, const Element& pk,
                          const json& obj, const std::string& domain,
                          const Element& sig) {
  return sig_verify(params, pk, json_signing_message(obj, domain), sig);
}

void sign_json(const SystemParams& params, const mpz_class& sk, json& obj,
               const std::string& domain) {
  Element sig = detached_sign_json(params, sk, obj, domain);
  obj["sig"] = b64url_encode(params.encode_element(sig));
}

bool verify_json(const SystemParams& params, const Element& pk, const json& obj,
                 const std::string& domain) {
  if (!obj.is_object() || !obj.contains("sig") || !obj["sig"].is_string()) return false;
  Element sig;
  try {
    sig = params.decode_element(b64url_decode(obj["sig"].get<std::string>()));
  } catch (const Error&) {
    return false;
  }
  return detached_verify_json(params, pk, obj, domain, sig);
}

SignedBlob sign_blob(const SystemParams& params, const mpz_class& sk,
                     const std::string& signer_id, const Bytes& payload) {
  SignedBlob blob;
  blob.payload = payload;
  blob.signer_id = signer_id;
  blob.signature = params.encode_element(sig_sign(params, sk, payload));
  return blob;
}

// ---------------------------------------------------------------------------
// Certificates.

const char* cert_role_name(CertRole role) {
  switch (role) {
    case CertRole::root: return "root";
    case CertRole::smartcard_provider: return "smartcard_provider";
    case CertRole::smartcard: return "smartcard";
    case CertRole::content_provider: return "content_provider";
    case CertRole::content_distributor: return "content_distributor";
    case CertRole::content_distributor_ephemeral: return "content_distributor_ephemeral";
  }
  throw Error("unknown certificate role");
}

CertRole cert_role_from_name(const std::string& name) {
  for (CertRole r : {CertRole::root, CertRole::smartcard_provider, CertRole::smartcard,
                     CertRole::content_provider, CertRole::content_distributor,
                     CertRole::content_distributor_ephemeral}) {
    if (name == cert_role_name(r)) return r;
  }
  throw CodecError("unknown certificate role: " + name);
}

json Certificate::to_json() const {
  json j;
  j["cert_id"] = cert_id;
  j["role"] = cert_role_name(role);
  j["subject"] = subject;
  j["ts"] = ts;
  j["sig_pubkey"] = b64url_encode(sig_pubkey);
  j["pre_pubkey"] = b64url_encode(pre_pubkey);
  j["issuer_id"] = issuer_id;
  j["sig"] = b64url_encode(signature);
  return j;
}

Certificate Certificate::from_json(const json& j) {
  if (!j.is_object()) throw CodecError("certificate must be a JSON object");
  Certificate c;
  try {
    c.cert_id = j.at("cert_id").get<std::string>();
    c.role = cert_role_from_name(j.at("role").get<std::string>());
    c.subject = j.at("subject").get<std::string>();
    c.ts = j.at("ts").get<Millis>();
    c.sig_pubkey = b64url_decode(j.at("sig_pubkey").get<std::string>());
    c.pre_pubkey = b64url_decode(j.at("pre_pubkey").get<std::string>());
    c.issuer_id = j.at("issuer_id").get<std::string>();
    c.signature = b64url_decode(j.at("sig").get<std::string>());
  } catch (const json::exception& e) {
    throw CodecError(std::string("malformed certificate: ") + e.what());
  }
  return c;
}

void sign_certificate(const SystemParams& params, const mpz_class& issuer_sk,
                      const std::string& issuer_id, Certificate& cert) {
  cert.issuer_id = issuer_id;
  json j = cert.to_json();
  sign_json(params, issuer_sk, j, kCertDomain);
  cert.signature = b64url_decode(j["sig"].get<std::string>());
}

bool verify_certificate_signature(const SystemParams& params,
                                  const Certificate& cert,
                                  const Element& issuer_pk) {
  return verify_json(params, issuer_pk, cert.to_json(), kCertDomain);
}

void CertStore::add(const Certificate& cert) { by_id_[cert.cert_id] = cert; }

const Certificate* CertStore::find(const std::string& cert_id) const {
  auto it = by_id_.find(cert_id);
  return it == by_id_.end() ? nullptr : &it->second;
}

bool role_may_issue(CertRole issuer, CertRole subject) {
  switch (issuer) {
    case CertRole::root:
      return subject == CertRole::smartcard_provider ||
             subject == CertRole::content_provider ||
             subject == CertRole::content_distributor;
    case CertRole::smartcard_provider:
      return subject == CertRole::smartcard;
    case CertRole::content_distributor:
      return subject == CertRole::content_distributor_ephemeral;
    default:
      return false;
  }
}

bool validate_chain(const SystemParams& params, const Certificate& leaf,
                    const CertStore& pool, const Certificate& trusted_root,
                    std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  if (trusted_root.role != CertRole::root) return fail("trust anchor is not a root");

  const Certificate* cur = &leaf;
  // Chains are short (depth <= 3); the bound guards against issuer cycles.
  for (int depth = 0; depth < 8; ++depth) {
    if (cur->role == CertRole::root) {
      if (*cur != trusted_root) return fail("root does not match the trust anchor");
      Element root_pk;
      try {
        root_pk = params.decode_element(cur->sig_pubkey);
      } catch (const Error&) {
        return fail("root public key is malformed");
      }
      if (cur->issuer_id != cur->cert_id) return fail("root must be self-issued");
      if (!verify_certificate_signature(params, *cur, root_pk))
        return fail("root self-signature is invalid");
      return true;
    }

    const Certificate* issuer = pool.find(cur->issuer_id);
    if (issuer == nullptr) return fail("issuer not found: " + cur->issuer_id);
    if (!role_may_issue(issuer->role, cur->role))
      return fail(std::string("role ") + cert_role_name(issuer->role) +
                  " may not issue " + cert_role_name(cur->role));
    Element issuer_pk;
    try {
      issuer_pk = params.decode_element(issuer->sig_pubkey);
    } catch (const Error&) {
      return fail("issuer public key is malformed");
    }
    if (!verify_certificate_signature(params, *cur, issuer_pk))
      return fail("signature check failed for " + cur->cert_id);
    cur = issuer;
  }
  return fail("certificate chain too deep");
}

// ---------------------------------------------------------------------------
// KEM-DEM hybrid.

HybridCiphertext hybrid_encrypt(const SystemParams& params, const PrePublicKey& pk,
                                const Bytes& plaintext, const Bytes& aad,
                                RandomSource& rng) {
  Element seed = pre_random_message(params, rng);
  ContentKey key = kdf_content_key(params, seed);
  HybridCiphertext out;
  out.kem = pre_encrypt_first(params, seed, pk, rng);
  out.dem = aead_encrypt(key.derived_key, plaintext, aad, rng);
  return out;
}

Bytes hybrid_decrypt(const SystemParams& params, const HybridCiphertext& c,
                     const mpz_class& a1, const Bytes& aad) {
  Element seed = pre_decrypt_first(params, c.kem, a1);
  ContentKey key = kdf_content_key(params, seed);
  return aead_decrypt(key.derived_key, c.dem, aad);
}

Bytes encode_hybrid_ciphertext(const SystemParams& params, const HybridCiphertext& c) {
  Bytes kem = encode_pre_ciphertext(params, c.kem);
  Bytes out;
  out.reserve(4 + kem.size() + c.dem.size());
  put_u32_be(out, (uint32_t)kem.size());
  out.insert(out.end(), kem.begin(), kem.end());
  out.insert(out.end(), c.dem.begin(), c.dem.end());
  return out;
}

HybridCiphertext decode_hybrid_ciphertext(const SystemParams& params, const Bytes& raw) {
  if (raw.size() < 4) throw CodecError("hybrid ciphertext too short");
  uint32_t kem_len = get_u32_be(raw.data());
  if (raw.size() - 4 < kem_len) throw CodecError("hybrid ciphertext truncated");
  Bytes kem(raw.begin() + 4, raw.begin() + 4 + kem_len);
  HybridCiphertext c;
  c.kem = decode_pre_ciphertext(params, kem);
  c.dem.assign(raw.begin() + 4 + kem_len, raw.end());
  return c;
}

}  // namespace drmmesh
