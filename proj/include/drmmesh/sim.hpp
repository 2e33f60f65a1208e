#pragma once

#include "drmmesh/client.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Deterministic simulation of the whole ecosystem: one trust hierarchy, a
// bank, a content provider, any number of distributors, one personalized
// card, and a client wired to them through transcript-recording ports.
// Same seed, same everything -- including the recorded frame bytes.

inline constexpr Millis kSimEpoch = 1735689600000;  // 2025-01-01T00:00:00Z

// Monotone simulated clock: every query advances time by a fixed tick, so
// no two protocol events ever tie on a timestamp and runs stay replayable.
class SimClock final : public Clock {
 public:
  explicit SimClock(Millis start = kSimEpoch, Millis tick = 7)
      : now_(start), tick_(tick) {}
  Millis now() override {
    Millis t = now_;
    now_ += tick_;
    return t;
  }
  Millis peek() const { return now_; }
  void set(Millis t) { now_ = t; }
  void advance(Millis delta) { now_ += delta; }

 private:
  Millis now_;
  Millis tick_;
};

// The offline ceremony that births a deployment: root authority, card
// manufacturer, the shared card identity, and one content provider.
struct TrustBootstrap {
  SigKeyPair root_key, scp_key, card_key, cp_key;
  PreKeyPair card_pre;
  Certificate root, scp, card, cp;

  static TrustBootstrap create(const SystemParams& params, uint64_t seed,
                               Millis ts_base);
};

struct DistributorIdentity {
  SigKeyPair key;
  Certificate cert;
};

DistributorIdentity make_distributor_identity(const SystemParams& params,
                                              const TrustBootstrap& trust,
                                              const std::string& cert_id,
                                              uint64_t seed, Millis ts);

// ---------------------------------------------------------------------------
// Transcript-recording ports over direct object calls.

class SimProviderPort final : public ProviderPort {
 public:
  SimProviderPort(ContentProvider& provider, Transcript& transcript,
                  std::shared_ptr<Clock> clock);
  std::vector<CatalogItem> list_catalog() override;
  PriceQuote quote(const std::string& content_id, const std::string& model,
                   int64_t quantity) override;
  PurchaseOpen open_purchase() override;
  OpResult<PurchaseGrant> complete_purchase(const PurchaseRequest& req) override;
  std::string session_tag() const override { return session_tag_; }

 private:
  ContentProvider& provider_;
  Transcript& transcript_;
  std::shared_ptr<Clock> clock_;
  std::string session_tag_;
};

class SimDistributorPort final : public DistributorPort {
 public:
  SimDistributorPort(ContentDistributor& distributor, Transcript& transcript,
                     std::shared_ptr<Clock> clock, uint64_t run_seed);
  Certificate distributor_cert() override;
  Certificate issue_session_cert() override;
  OpResult<ExecutionTicket> execute_content(const std::string& cert_id,
                                            const Bytes& reencrypted_ck,
                                            const std::string& content_id) override;
  OpResult<StreamChunk> fetch_chunk(const std::string& resume_token,
                                    uint64_t seq) override;
  std::string session_tag() const override { return session_tag_; }

 private:
  ContentDistributor& distributor_;
  Transcript& transcript_;
  std::shared_ptr<Clock> clock_;
  SeededRng run_ids_;
  std::string session_tag_;
};

// ---------------------------------------------------------------------------
// The assembled world.

class SimWorld {
 public:
  struct Options {
    SystemParams params = SystemParams::transparent((uint64_t{1} << 61) - 1);
    uint64_t seed = 20250101;
    size_t distributors = 2;
    std::string pin = "1234";
    CivilDate holder_dob{2000, 3, 15};
    std::string holder_country = "IE";
    std::map<std::string, int> min_age_by_rating = {{"X", 18}};
    Millis base_time = kSimEpoch;
    Millis clock_tick = 7;
    bool default_catalog = true;  // ingest the standard demo titles
    KeyGenFn card_keygen;         // override the card's key generator (tests)
  };

  explicit SimWorld(Options opt);

  // Actors and infrastructure.
  const TrustBootstrap& trust() const { return trust_; }
  std::shared_ptr<SimClock> clock() { return clock_; }
  BankAuthority& bank() { return *bank_; }
  ContentProvider& provider() { return *provider_; }
  ContentDistributor& distributor(size_t i = 0) { return *distributors_.at(i); }
  size_t distributor_count() const { return distributors_.size(); }
  Smartcard& card() { return *card_; }
  Client& client() { return *client_; }
  KeyLocker& locker() { return locker_; }
  Transcript& transcript() { return transcript_; }
  SimProviderPort& provider_port() { return *provider_port_; }
  SimDistributorPort& distributor_port(size_t i = 0) { return *distributor_ports_.at(i); }

  // The original plaintext of an ingested title (for end-to-end checks).
  const Bytes& plaintext_of(const std::string& content_id) const;

  // Canned flows against the unlocked card session.
  const SessionToken& session() const { return session_; }
  OpResult<PurchaseReceipt> purchase(const std::string& content_id,
                                     const std::string& model, int64_t quantity,
                                     Millis expiry_ts = 0);
  OpResult<ExecutionSummary> execute(const std::string& content_id,
                                     size_t distributor = 0);

  // Ingests extra content deterministically from the world seed.
  void ingest(const ContentMeta& meta, const Bytes& plaintext);
  Bytes random_plaintext(size_t size);

 private:
  Options opt_;
  std::shared_ptr<SimClock> clock_;
  SeededRng rng_;
  TrustBootstrap trust_;
  std::unique_ptr<BankAuthority> bank_;
  std::unique_ptr<ContentProvider> provider_;
  std::vector<std::unique_ptr<ContentDistributor>> distributors_;
  std::unique_ptr<Smartcard> card_;
  KeyLocker locker_;
  Transcript transcript_;
  std::unique_ptr<Client> client_;
  std::unique_ptr<SimProviderPort> provider_port_;
  std::vector<std::unique_ptr<SimDistributorPort>> distributor_ports_;
  SessionToken session_;
  std::map<std::string, Bytes> plaintexts_;
};

}  // namespace drmmesh
