#include "drmmesh/distributor.hpp"

#include <algorithm>

namespace drmmesh {

ContentDistributor::ContentDistributor(Init init)
    : params_(std::move(init.params)),
      sign_key_(std::move(init.sign_key)),
      cd_cert_(std::move(init.cd_cert)),
      fetch_(std::move(init.fetch)),
      clock_(init.clock ? std::move(init.clock) : std::make_shared<SystemClock>()),
      rng_(init.rng_seed),
      grant_ttl_(init.grant_ttl),
      stream_ttl_(init.stream_ttl),
      chunk_size_(init.chunk_size) {
  if (chunk_size_ == 0) throw Error("chunk size must be positive");
}

Certificate ContentDistributor::issue_session_cert() {
  std::lock_guard lk(mu_);
  Millis now = clock_->now();

  // Grant-table hygiene: retire session keys that were never redeemed.
  for (auto& [id, grant] : grants_) {
    if (grant.state == GrantState::issued && now - grant.issued_at >= grant_ttl_)
      grant.state = GrantState::expired;
  }

  PreKeyPair key = pre_keygen(params_, rng_);
  std::string cert_id = to_hex(rng_.bytes(16));
  while (grants_.count(cert_id)) cert_id = to_hex(rng_.bytes(16));

  Certificate cert;
  cert.cert_id = cert_id;
  cert.role = CertRole::content_distributor_ephemeral;
  cert.subject = "session";
  cert.ts = std::max(now, last_cert_ts_ + 1);
  last_cert_ts_ = cert.ts;
  SeededRng sig_seed(rng_.u64());
  SigKeyPair session_sig = sig_keygen(params_, sig_seed);
  cert.sig_pubkey = params_.encode_element(session_sig.pk);
  cert.pre_pubkey = encode_pre_public_key(params_, key.pub);
  sign_certificate(params_, sign_key_.sk, cd_cert_.cert_id, cert);

  grants_[cert_id] = Grant{std::move(key), GrantState::issued, now};
  certs_issued_++;
  return cert;
}

Bytes ContentDistributor::protected_blob_locked(const std::string& content_id) {
  auto it = blob_cache_.find(content_id);
  if (it != blob_cache_.end()) return it->second;
  if (!fetch_) throw Error("no content source configured");
  Bytes blob = fetch_(content_id);  // throws on unknown content
  blob_cache_[content_id] = blob;
  return blob;
}

OpResult<ExecutionTicket> ContentDistributor::execute_content(const std::string& cert_id,
                                                              const Bytes& reencrypted_ck,
                                                              const std::string& content_id) {
  std::lock_guard lk(mu_);
  using R = OpResult<ExecutionTicket>;
  Millis now = clock_->now();

  auto git = grants_.find(cert_id);
  if (git == grants_.end()) return R::reject("unknown_grant");
  Grant& grant = git->second;
  if (grant.state == GrantState::issued && now - grant.issued_at >= grant_ttl_)
    grant.state = GrantState::expired;
  if (grant.state == GrantState::expired) return R::reject("grant_expired");
  if (grant.state == GrantState::spent) return R::reject("grant_spent");

  // Failures a client can repair keep the session key alive: missing
  // content and malformed ciphertexts are caught before the key burns.
  Bytes blob;
  try {
    blob = protected_blob_locked(content_id);
  } catch (const Error&) {
    return R::reject("unknown_content");
  }

  PreCiphertext ct;
  try {
    ct = decode_pre_ciphertext(params_, reencrypted_ck);
  } catch (const CodecError&) {
    return R::reject("malformed_ciphertext");
  }
  if (ct.kind != CiphertextKind::Reencrypted) return R::reject("malformed_ciphertext");

  // Point of no return: this session key never opens anything again, even
  // if the decryption below fails.
  grant.state = GrantState::spent;

  Bytes plaintext;
  try {
    Element seed = pre_decrypt_first(params_, ct, grant.key);
    plaintext = decrypt_content(blob, kdf_content_key(params_, seed));
  } catch (const CryptoError&) {
    return R::reject("no_valid_license");
  }

  ExecutionTicket ticket;
  ticket.resume_token = to_hex(rng_.bytes(16));
  ticket.content_size = plaintext.size();
  ticket.chunk_size = chunk_size_;
  ticket.chunk_count = (plaintext.size() + chunk_size_ - 1) / chunk_size_;
  streams_[ticket.resume_token] = Stream{std::move(plaintext), now};
  executions_++;
  return R::success(std::move(ticket));
}

OpResult<StreamChunk> ContentDistributor::fetch_chunk(const std::string& resume_token,
                                                      uint64_t seq) {
  std::lock_guard lk(mu_);
  using R = OpResult<StreamChunk>;
  Millis now = clock_->now();

  auto it = streams_.find(resume_token);
  if (it == streams_.end()) return R::reject("unknown_stream");
  if (now - it->second.opened_at >= stream_ttl_) {
    streams_.erase(it);
    return R::reject("stream_expired");
  }

  const Bytes& data = it->second.plaintext;
  uint64_t count = (data.size() + chunk_size_ - 1) / chunk_size_;
  if (seq >= count) return R::reject("bad_chunk_seq");

  StreamChunk chunk;
  chunk.seq = seq;
  chunk.last = seq + 1 == count;
  size_t begin = static_cast<size_t>(seq * chunk_size_);
  size_t end = std::min(data.size(), begin + static_cast<size_t>(chunk_size_));
  chunk.data.assign(data.begin() + begin, data.begin() + end);
  return R::success(std::move(chunk));
}

json ContentDistributor::debug_snapshot() const {
  std::lock_guard lk(mu_);
  size_t issued = 0, spent = 0, expired = 0;
  for (const auto& [id, grant] : grants_) {
    if (grant.state == GrantState::issued)
      issued++;
    else if (grant.state == GrantState::spent)
      spent++;
    else
      expired++;
  }
  return json{{"grants_issued", issued},
              {"grants_spent", spent},
              {"grants_expired", expired},
              {"certs_issued", certs_issued_},
              {"executions", executions_},
              {"open_streams", streams_.size()},
              {"cached_blobs", blob_cache_.size()}};
}

}  // namespace drmmesh
