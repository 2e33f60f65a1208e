#pragma once

#include <filesystem>
#include <optional>

#include "drmmesh/distributor.hpp"
#include "drmmesh/provider.hpp"
#include "drmmesh/wire.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Transport ports.  The protocol logic in Client is transport-agnostic:
// the simulator implements these with direct calls (recording envelope
// frames on the way), the service mode with HTTP round-trips.

class ProviderPort {
 public:
  virtual ~ProviderPort() = default;
  virtual std::vector<CatalogItem> list_catalog() = 0;
  virtual PriceQuote quote(const std::string& content_id, const std::string& model,
                           int64_t quantity) = 0;
  virtual PurchaseOpen open_purchase() = 0;
  virtual OpResult<PurchaseGrant> complete_purchase(const PurchaseRequest& req) = 0;
  // Correlation id of the protocol run the last open_purchase started.
  virtual std::string session_tag() const = 0;
};

class DistributorPort {
 public:
  virtual ~DistributorPort() = default;
  // The distributor's own long-lived certificate (chain material the card
  // needs to validate session certificates).
  virtual Certificate distributor_cert() = 0;
  virtual Certificate issue_session_cert() = 0;
  virtual OpResult<ExecutionTicket> execute_content(const std::string& cert_id,
                                                    const Bytes& reencrypted_ck,
                                                    const std::string& content_id) = 0;
  virtual OpResult<StreamChunk> fetch_chunk(const std::string& resume_token,
                                            uint64_t seq) = 0;
  virtual std::string session_tag() const = 0;
};

// ---------------------------------------------------------------------------
// Key locker: the client-side store of purchase key material.  Each entry
// binds a temporary key (public half only; the secret never leaves the
// card) to the delegatable content-key ciphertext from its purchase.
// Deliberately no execution history: the locker looks the same however
// often its entries were used.

struct LockerEntry {
  Bytes fingerprint;   // identifies the card-held key pair
  Bytes pk_tmp;        // encoded temporary public key
  std::string content_id;
  Bytes encrypted_ck;  // delegatable ciphertext of the content key seed
};

class KeyLocker {
 public:
  KeyLocker() = default;  // in-memory only
  explicit KeyLocker(std::filesystem::path file);  // loads when present

  void add(LockerEntry entry);
  const LockerEntry* find_by_fingerprint(const Bytes& fingerprint) const;
  std::vector<const LockerEntry*> for_content(const std::string& content_id) const;
  size_t size() const { return entries_.size(); }
  const std::vector<LockerEntry>& entries() const { return entries_; }

  // Canonical JSON on disk; no-op for an in-memory locker.
  void save() const;

 private:
  std::optional<std::filesystem::path> file_;
  std::vector<LockerEntry> entries_;
};

// ---------------------------------------------------------------------------
// Client: drives purchases and executions against the ports, with the card
// holding every secret that matters.

struct PurchaseReceipt {
  std::string content_id;
  Bytes fingerprint;    // locker handle for the purchased key
  int64_t paid = 0;     // minor units actually spent
};

struct ExecutionSummary {
  std::string content_id;
  uint64_t bytes = 0;
  uint64_t chunks = 0;
  Bytes digest;  // SHA-256 of the streamed plaintext, in stream order
};

// Supplies a payment token for the quoted amount (a wallet, in effect).
using PaymentFn = std::function<PaymentToken(int64_t amount)>;
// Receives plaintext chunks in order during execution.
using ByteSink = std::function<void(const Bytes&)>;

class Client {
 public:
  struct Init {
    SystemParams params = SystemParams::transparent();
    Smartcard* card = nullptr;       // required; not owned
    KeyLocker* locker = nullptr;     // required; not owned
    std::shared_ptr<Clock> clock;    // defaults to the system clock
    uint64_t rng_seed = 0;
    Transcript* transcript = nullptr;  // optional: records the card leg
  };

  explicit Client(Init init);

  // Unlocks the card; the session lives until the next verify_pin.
  OpResult<SessionToken> unlock(const std::string& pin);

  // Full purchase: category gate, challenge, card key, payment, license
  // storage, locker update.  Rejections carry a stage-qualified reason,
  // e.g. "provider:wrong_amount" or "card:replayed_license_id".
  OpResult<PurchaseReceipt> purchase(const SessionToken& session, ProviderPort& provider,
                                     const std::string& content_id,
                                     const std::string& model, int64_t quantity,
                                     Millis expiry_ts, const PaymentFn& pay);

  // Full execution: session certificate, card authorization, local
  // re-randomization and re-encryption of the stored content-key
  // ciphertext, streaming.  The sink may be empty (discard).
  OpResult<ExecutionSummary> execute(const SessionToken& session,
                                     DistributorPort& distributor,
                                     const std::string& content_id,
                                     const ByteSink& sink = {});

 private:
  void record_card(const std::string& run, const json& request, const json& response);

  SystemParams params_;
  Smartcard* card_;
  KeyLocker* locker_;
  std::shared_ptr<Clock> clock_;
  SeededRng rng_;
  Transcript* transcript_;
};

}  // namespace drmmesh
