#pragma once

#include <functional>
#include <mutex>
#include <set>
#include <variant>
#include <vector>

#include "drmmesh/license.hpp"

namespace drmmesh {

// Card-holder identity attributes, signed by the card manufacturer at
// personalization time.  The card refuses category-restricted purchases
// when the signature does not verify.
struct HolderAttributes {
  CivilDate date_of_birth;
  std::string home_country;
  Bytes provider_sig;  // detached signature over the canonical attribute JSON
};

// ISO calendar-date text (YYYY-MM-DD) <-> CivilDate.
std::string date_string(const CivilDate& d);
CivilDate parse_date(const std::string& s);

json holder_attributes_json(const HolderAttributes& attrs);  // without the signature
void sign_holder_attributes(const SystemParams& params, const mpz_class& provider_sk,
                            HolderAttributes& attrs);
bool verify_holder_attributes(const SystemParams& params, const Element& provider_pk,
                              const HolderAttributes& attrs);

// Card operations share the protocol-wide result shape: rejections carry a
// reason string and are not exceptions.
template <typename T>
using CardResult = OpResult<T>;

// Opaque unlocked-session handle; a fresh PIN verification invalidates the
// previous session.
struct SessionToken {
  uint64_t id = 0;
};

// What the card hands back when a purchase is opened: the fresh temporary
// public key, its fingerprint, the card's signature binding the provider's
// nonce to that key, and the (shared) card certificate.
struct PurchaseAuth {
  PrePublicKey pk_tmp;
  Bytes fingerprint;  // stable identifier: SHA-256 of the encoded public key
  Bytes signature;    // encoded signature element over (nonce, pk_tmp)
  Certificate card_cert;
};

// Delegation credential for one authorized execution.
struct ExecutionGrantKey {
  ReEncryptionKey rk;
  Bytes pk_fingerprint;  // which stored purchase key the rk delegates from
};

enum class CategoryDecision { allow, deny };

// Pluggable key generation so tests can plant deliberately weak behavior
// (e.g. a reused key pair) and watch downstream defenses catch it.
using KeyGenFn = std::function<PreKeyPair(const SystemParams&, RandomSource&)>;

// Emulated tamper-resistant smartcard.  All cards share one signing secret
// and certificate, so card outputs never identify the individual card.  The
// card holds no clock: every timestamp it trusts arrives inside a signed
// artifact (license or distributor certificate), and its own notion of time
// only ratchets forward over those.
//
// All entry points are serialized by an internal mutex; state transitions
// are atomic per call.
class Smartcard {
 public:
  struct Init {
    SystemParams params = SystemParams::transparent();
    mpz_class sign_sk;             // shared signing secret of all cards
    Certificate card_cert;         // shared card certificate
    Certificate provider_cert;     // issuer of card_cert (card manufacturer)
    Certificate root_cert;         // trust anchor for every chain the card checks
    std::string pin;
    HolderAttributes attributes;
    std::map<std::string, int> min_age_by_rating;  // rating -> minimum holder age
    uint64_t rng_seed = 0;
    KeyGenFn keygen;  // defaults to pre_keygen
  };

  explicit Smartcard(Init init);

  // --- session ---
  // Wrong attempts increment a failure counter; kMaxPinFailures consecutive
  // failures brick the card permanently.  Success resets the counter and
  // replaces any previous session.
  CardResult<SessionToken> verify_pin(const std::string& attempt);
  bool locked() const;

  // --- purchase side ---
  CardResult<PurchaseAuth> begin_purchase(const SessionToken& session,
                                          const Bytes& challenge_nonce);
  // encrypted_license: hybrid ciphertext of the canonical license JSON under
  // one of the pending temporary keys.  license_sig: issuer's detached
  // signature element over that JSON.
  CardResult<std::monostate> store_license(const SessionToken& session,
                                           const Bytes& encrypted_license,
                                           const Bytes& license_sig);
  CardResult<CategoryDecision> check_authorization_category(const SessionToken& session,
                                                            const std::string& rating,
                                                            Millis now_ts);

  // --- execution side ---
  CardResult<std::vector<std::string>> list_content(const SessionToken& session) const;
  // cd_cert must be a distributor session certificate; supporting certs
  // (the issuing distributor's own certificate) complete the chain to the
  // card's trust anchor.
  CardResult<ExecutionGrantKey> authorize_execution(
      const SessionToken& session, const std::string& content_id,
      const Certificate& cd_cert, const std::vector<Certificate>& supporting);

  // --- emulator introspection (test/diagnostic surface, secret-free) ---
  const SystemParams& params() const { return params_; }
  Millis card_ts() const;
  int pin_failures() const;
  size_t pending_key_count() const;
  json debug_snapshot() const;  // ids, timestamps, counters; never key material

  static constexpr int kMaxPinFailures = 3;
  static constexpr size_t kMaxPendingKeys = 8;

 private:
  struct StoredLicense {
    License license;
    PreKeyPair key;  // the temporary key pair the license was bought under
  };

  bool session_ok(const SessionToken& session) const;
  CardResult<std::monostate> store_license_locked(const Bytes& encrypted_license,
                                                  const Bytes& license_sig);
  void advance_ts(Millis ts);

  mutable std::mutex mu_;
  SystemParams params_;
  mpz_class sign_sk_;
  Certificate card_cert_, provider_cert_, root_cert_;
  std::string pin_;
  HolderAttributes attributes_;
  std::map<std::string, int> min_age_by_rating_;
  SeededRng rng_;
  KeyGenFn keygen_;

  bool locked_ = false;
  int pin_failures_ = 0;
  uint64_t session_ = 0;  // 0 = none
  uint64_t next_session_ = 1;

  Millis card_ts_ = 0;
  std::vector<std::pair<std::string, PreKeyPair>> pending_;  // fp hex -> keypair
  std::map<std::string, StoredLicense> licenses_;            // by content_id
  std::set<std::string> seen_license_ids_;  // ids accepted at the current card_ts
  std::set<std::string> seen_cd_cert_ids_;
};

// Serialized command interface over the card: one length-prefixed canonical
// JSON command in, one length-prefixed canonical JSON response out.  This is
// the only card surface the rest of the device stack uses.
//
// Command:  {"op": ..., ...args}     Response: {"status": "ok", ...result}
//                                            | {"status": "reject", "reason": ...}
//                                            | {"status": "error", "reason": ...}
class CardChannel {
 public:
  explicit CardChannel(Smartcard& card) : card_(card) {}

  // Frames: 4-byte big-endian length prefix + canonical JSON bytes.
  Bytes transact(const Bytes& request_frame);

  // Convenience for in-process callers: JSON in, JSON out (unframed).
  json call(const json& command);

 private:
  Smartcard& card_;
  std::mutex mu_;
};

Bytes frame_payload(const Bytes& payload);
Bytes unframe_payload(const Bytes& frame);

}  // namespace drmmesh
