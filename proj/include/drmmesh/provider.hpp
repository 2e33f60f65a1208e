#pragma once

#include <memory>
#include <mutex>
#include <set>
#include <vector>

#include "drmmesh/smartcard.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Payment tokens.  A minimal anonymous-cash stand-in: the bank mints signed
// bearer tokens carrying a value; merchants verify the bank signature and
// keep their own spent-serial set.

struct PaymentToken {
  std::string serial;   // random identifier, unique per token
  int64_t amount = 0;   // currency minor units
  Bytes bank_signature; // encoded signature element over (serial, amount)

  json to_json() const;
  static PaymentToken from_json(const json& j);
};

class BankAuthority {
 public:
  BankAuthority(const SystemParams& params, uint64_t seed);

  PaymentToken issue(int64_t amount);
  bool verify(const PaymentToken& pt) const;
  const Element& pk() const { return key_.pk; }

 private:
  SystemParams params_;
  SigKeyPair key_;
  SeededRng rng_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Catalog.

struct ContentMeta {
  std::string content_id;
  std::string title;
  std::string rating;      // "" = unrated
  int64_t unit_price = 0;  // minor units per execution right
};

struct CatalogEntry {
  ContentMeta meta;
  ContentKey ck;            // never leaves the provider except inside a
                            // delegatable ciphertext bound to a card key
  Bytes encrypted_content;  // authenticated encryption under ck, made once
};

// Public listing row: everything a shopper may see.
struct CatalogItem {
  std::string content_id;
  std::string title;
  std::string rating;
  int64_t unit_price = 0;
};

// ---------------------------------------------------------------------------
// Purchase protocol messages (server side).

struct PurchaseOpen {
  uint64_t session_id = 0;
  Bytes nonce;  // challenge the card must sign together with its fresh key
};

struct PurchaseRequest {
  uint64_t session_id = 0;
  Certificate card_cert;
  Bytes pk_tmp;     // encoded temporary public key from the card
  Bytes signature;  // encoded card signature over (nonce, pk_tmp)
  std::string content_id;
  std::string model;     // license model name
  int64_t quantity = 1;  // execution cap for counted models; 1 otherwise
  Millis expiry_ts = 0;  // validity end for time-limited licenses
  PaymentToken payment;
};

struct PurchaseGrant {
  Bytes encrypted_license;   // hybrid ciphertext of the license JSON
  Bytes license_signature;   // encoded detached signature element
  Bytes encrypted_ck;        // encoded delegatable ciphertext of the key seed
};

// ---------------------------------------------------------------------------
// Content provider service: catalog, content-at-rest encryption, purchase
// protocol server side, payment verification.  Thread-safe; all entry
// points may be called concurrently.

class ContentProvider {
 public:
  struct Init {
    SystemParams params = SystemParams::transparent();
    SigKeyPair sign_key;               // matches cp_cert.sig_pubkey
    Certificate cp_cert;               // issued to this provider
    Certificate root_cert;             // trust anchor for card chains
    std::vector<Certificate> trust_pool;  // intermediates (card manufacturer)
    Element bank_pk;                   // payment verification key
    DiscountTable discounts;
    std::shared_ptr<Clock> clock;      // defaults to the system clock
    uint64_t rng_seed = 0;
    Millis session_ttl = 120'000;
  };

  explicit ContentProvider(Init init);

  // Encrypts the content under a fresh key and stores it.  Throws Error on
  // a duplicate content_id or empty plaintext.
  const CatalogEntry& ingest_content(const ContentMeta& meta, const Bytes& plaintext);

  std::vector<CatalogItem> list_catalog() const;

  // Price for one purchase; throws Error on unknown content or a quantity
  // the model disallows.
  PriceQuote quote(const std::string& content_id, const std::string& model,
                   int64_t quantity) const;

  // Starts a purchase: fresh session with a fresh challenge nonce.
  PurchaseOpen open_purchase();

  // Finishes a purchase: checks the session, the card's certificate chain,
  // the challenge signature, and the payment; then mints a license bound to
  // the card's temporary key and wraps the content key for it.
  OpResult<PurchaseGrant> complete_purchase(const PurchaseRequest& req);

  // The protected blob a distributor fetches; throws Error on unknown id.
  Bytes serve_encrypted_content(const std::string& content_id) const;

  const Certificate& cert() const { return cp_cert_; }
  const SystemParams& params() const { return params_; }
  json debug_snapshot() const;  // counters and session states, no secrets

 private:
  enum class SessionState { challenged, completed, aborted };
  struct Session {
    Bytes nonce;
    SessionState state = SessionState::challenged;
    Millis created_at = 0;
  };

  std::string next_license_id_locked();
  Millis next_license_ts_locked();

  mutable std::mutex mu_;
  SystemParams params_;
  SigKeyPair sign_key_;
  Certificate cp_cert_, root_cert_;
  std::vector<Certificate> trust_pool_;
  Element bank_pk_;
  DiscountTable discounts_;
  std::shared_ptr<Clock> clock_;
  SeededRng rng_;
  Millis session_ttl_;

  std::map<std::string, CatalogEntry> catalog_;
  std::map<uint64_t, Session> sessions_;
  uint64_t next_session_ = 1;
  std::set<std::string> spent_serials_;
  uint64_t licenses_issued_ = 0;
  Millis last_license_ts_ = 0;
};

}  // namespace drmmesh
