#pragma once

#include <functional>
#include <memory>
#include <mutex>

#include "drmmesh/smartcard.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Content distributor service: one-shot session certificates, content-key
// decapsulation, one-time-key enforcement, chunked content delivery.

// One 64 KiB slice of a content stream.
struct StreamChunk {
  uint64_t seq = 0;
  bool last = false;
  Bytes data;
};

// Handed back when an execution is accepted; chunks are then pulled by
// sequence number, idempotently, until the stream window closes.
struct ExecutionTicket {
  std::string resume_token;
  uint64_t chunk_count = 0;
  uint64_t content_size = 0;
  uint64_t chunk_size = 0;
};

// How the distributor obtains a provider's protected blob on cache miss.
// Throws on unknown content.
using ContentFetchFn = std::function<Bytes(const std::string& content_id)>;

class ContentDistributor {
 public:
  struct Init {
    SystemParams params = SystemParams::transparent();
    SigKeyPair sign_key;       // matches cd_cert.sig_pubkey
    Certificate cd_cert;       // issued to this distributor
    ContentFetchFn fetch;      // provider lookup for protected blobs
    std::shared_ptr<Clock> clock;  // defaults to the system clock
    uint64_t rng_seed = 0;
    Millis grant_ttl = 300'000;    // unused session certs expire
    Millis stream_ttl = 300'000;   // resume window for an accepted stream
    uint64_t chunk_size = 64 * 1024;
  };

  explicit ContentDistributor(Init init);

  // Fresh one-shot session certificate: new signing and re-encryption keys,
  // random unique id, strictly increasing timestamp, signed by this
  // distributor's certificate.
  Certificate issue_session_cert();

  // Redeems a session certificate: decrypts the re-encrypted content-key
  // ciphertext with the session secret, unlocks the protected blob, and
  // opens a chunk stream.  The certificate is invalidated before any
  // content byte moves, so it can never pay for two executions.
  OpResult<ExecutionTicket> execute_content(const std::string& cert_id,
                                            const Bytes& reencrypted_ck,
                                            const std::string& content_id);

  // Pulls one chunk of an accepted stream.  Idempotent per seq so an
  // interrupted transfer can resume within the stream window.
  OpResult<StreamChunk> fetch_chunk(const std::string& resume_token, uint64_t seq);

  const Certificate& cert() const { return cd_cert_; }
  const SystemParams& params() const { return params_; }
  json debug_snapshot() const;  // grant states and counters, no secrets

 private:
  enum class GrantState { issued, spent, expired };
  struct Grant {
    PreKeyPair key;
    GrantState state = GrantState::issued;
    Millis issued_at = 0;
  };
  struct Stream {
    Bytes plaintext;
    Millis opened_at = 0;
  };

  Bytes protected_blob_locked(const std::string& content_id);

  mutable std::mutex mu_;
  SystemParams params_;
  SigKeyPair sign_key_;
  Certificate cd_cert_;
  ContentFetchFn fetch_;
  std::shared_ptr<Clock> clock_;
  SeededRng rng_;
  Millis grant_ttl_, stream_ttl_;
  uint64_t chunk_size_;

  std::map<std::string, Grant> grants_;          // by cert_id
  std::map<std::string, Bytes> blob_cache_;      // by content_id
  std::map<std::string, Stream> streams_;        // by resume token
  Millis last_cert_ts_ = 0;
  uint64_t certs_issued_ = 0;
  uint64_t executions_ = 0;
};

}  // namespace drmmesh
