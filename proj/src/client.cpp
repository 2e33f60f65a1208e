#include "drmmesh/client.hpp"

#include <fstream>

namespace drmmesh {

// ---------------------------------------------------------------------------
// Key locker.

namespace {

json locker_entry_json(const LockerEntry& e) {
  return json{{"content_id", e.content_id},
              {"encrypted_ck", b64url_encode(e.encrypted_ck)},
              {"fingerprint", b64url_encode(e.fingerprint)},
              {"pk_tmp", b64url_encode(e.pk_tmp)}};
}

LockerEntry locker_entry_from_json(const json& j) {
  if (!j.is_object() || !j.contains("content_id") || !j.contains("encrypted_ck") ||
      !j.contains("fingerprint") || !j.contains("pk_tmp"))
    throw CodecError("locker entry: missing field");
  LockerEntry e;
  e.content_id = j.at("content_id").get<std::string>();
  e.encrypted_ck = b64url_decode(j.at("encrypted_ck").get<std::string>());
  e.fingerprint = b64url_decode(j.at("fingerprint").get<std::string>());
  e.pk_tmp = b64url_decode(j.at("pk_tmp").get<std::string>());
  return e;
}

}  // namespace

KeyLocker::KeyLocker(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(*file_, std::ios::binary);
  if (!in) return;  // fresh locker
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CodecError(std::string("locker file: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array())
    throw CodecError("locker file: wrong shape");
  for (const auto& row : j.at("entries")) entries_.push_back(locker_entry_from_json(row));
}

void KeyLocker::add(LockerEntry entry) {
  for (auto& existing : entries_) {
    if (existing.fingerprint == entry.fingerprint) {
      existing = std::move(entry);
      return;
    }
  }
  entries_.push_back(std::move(entry));
}

const LockerEntry* KeyLocker::find_by_fingerprint(const Bytes& fingerprint) const {
  for (const auto& e : entries_)
    if (e.fingerprint == fingerprint) return &e;
  return nullptr;
}

std::vector<const LockerEntry*> KeyLocker::for_content(const std::string& content_id) const {
  std::vector<const LockerEntry*> out;
  for (const auto& e : entries_)
    if (e.content_id == content_id) out.push_back(&e);
  return out;
}

void KeyLocker::save() const {
  if (!file_) return;
  json rows = json::array();
  for (const auto& e : entries_) rows.push_back(locker_entry_json(e));
  json j{{"entries", rows}};
  std::ofstream out(*file_, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("locker file: cannot write " + file_->string());
  out << j.dump();
}

// ---------------------------------------------------------------------------
// Client.

Client::Client(Init init)
    : params_(init.params),
      card_(init.card),
      locker_(init.locker),
      clock_(init.clock ? std::move(init.clock) : std::make_shared<SystemClock>()),
      rng_(init.rng_seed),
      transcript_(init.transcript) {
  if (!card_ || !locker_) throw Error("client: card and locker are required");
}

void Client::record_card(const std::string& run, const json& request,
                         const json& response) {
  if (!transcript_) return;
  Envelope req;
  req.message_type = MessageType::card_command;
  req.session_id = run;
  req.body = request;
  transcript_->append(Role::client, Role::card, req, clock_->now());
  Envelope resp;
  resp.message_type = MessageType::card_command;
  resp.session_id = run;
  resp.body = response;
  transcript_->append(Role::card, Role::client, resp, clock_->now());
}

OpResult<SessionToken> Client::unlock(const std::string& pin) {
  auto r = card_->verify_pin(pin);
  if (!r.ok) return OpResult<SessionToken>::reject("card:" + r.reason);
  return OpResult<SessionToken>::success(r.value);
}

OpResult<PurchaseReceipt> Client::purchase(const SessionToken& session,
                                           ProviderPort& provider,
                                           const std::string& content_id,
                                           const std::string& model, int64_t quantity,
                                           Millis expiry_ts, const PaymentFn& pay) {
  using R = OpResult<PurchaseReceipt>;

  // The shopper first learns what the title is rated, then asks the card
  // whether the holder may buy it at all -- before any key material moves.
  auto catalog = provider.list_catalog();
  const CatalogItem* row = nullptr;
  for (const auto& item : catalog)
    if (item.content_id == content_id) row = &item;
  if (!row) return R::reject("client:unknown_content");

  if (!row->rating.empty()) {
    // Device-local gate before any protocol run exists; recorded untagged.
    auto gate = card_->check_authorization_category(session, row->rating, clock_->now());
    record_card("", json{{"op", "check_category"}, {"rating", row->rating}},
                json{{"status", gate.ok ? "ok" : "reject"}});
    if (!gate.ok) return R::reject("card:" + gate.reason);
    if (gate.value == CategoryDecision::deny) return R::reject("card:category_denied");
  }

  PriceQuote price;
  try {
    price = provider.quote(content_id, model, quantity);
  } catch (const Error&) {
    return R::reject("client:bad_terms");
  }

  PurchaseOpen open = provider.open_purchase();
  const std::string run = provider.session_tag();

  auto auth = card_->begin_purchase(session, open.nonce);
  record_card(run, json{{"op", "begin_purchase"}},
              json{{"status", auth.ok ? "ok" : "reject"}});
  if (!auth.ok) return R::reject("card:" + auth.reason);

  PurchaseRequest req;
  req.session_id = open.session_id;
  req.card_cert = auth.value.card_cert;
  req.pk_tmp = encode_pre_public_key(params_, auth.value.pk_tmp);
  req.signature = auth.value.signature;
  req.content_id = content_id;
  req.model = model;
  req.quantity = quantity;
  req.expiry_ts = expiry_ts;
  req.payment = pay(price.total);

  auto grant = provider.complete_purchase(req);
  if (!grant.ok) return R::reject("provider:" + grant.reason);

  auto stored = card_->store_license(session, grant.value.encrypted_license,
                                     grant.value.license_signature);
  record_card(run, json{{"op", "store_license"}},
              json{{"status", stored.ok ? "ok" : "reject"}});
  if (!stored.ok) return R::reject("card:" + stored.reason);

  LockerEntry entry;
  entry.fingerprint = auth.value.fingerprint;
  entry.pk_tmp = req.pk_tmp;
  entry.content_id = content_id;
  entry.encrypted_ck = grant.value.encrypted_ck;
  locker_->add(std::move(entry));
  locker_->save();

  PurchaseReceipt receipt;
  receipt.content_id = content_id;
  receipt.fingerprint = auth.value.fingerprint;
  receipt.paid = price.total;
  return R::success(std::move(receipt));
}

OpResult<ExecutionSummary> Client::execute(const SessionToken& session,
                                           DistributorPort& distributor,
                                           const std::string& content_id,
                                           const ByteSink& sink) {
  using R = OpResult<ExecutionSummary>;

  Certificate cd_cert = distributor.distributor_cert();
  Certificate session_cert = distributor.issue_session_cert();
  const std::string run = distributor.session_tag();

  auto auth = card_->authorize_execution(session, content_id, session_cert, {cd_cert});
  record_card(run, json{{"op", "authorize_execution"}, {"content_id", content_id}},
              json{{"status", auth.ok ? "ok" : "reject"}});
  if (!auth.ok) return R::reject("card:" + auth.reason);

  const LockerEntry* entry = locker_->find_by_fingerprint(auth.value.pk_fingerprint);
  if (!entry || entry->content_id != content_id)
    return R::reject("client:no_purchased_key");

  // Refresh the stored ciphertext before delegating it, so what the
  // distributor receives shares no bytes with any previous execution.
  Bytes delegated;
  try {
    PreCiphertext stored = decode_pre_ciphertext(params_, entry->encrypted_ck);
    PrePublicKey pk = decode_pre_public_key(params_, entry->pk_tmp);
    PreCiphertext refreshed = pre_rerandomize_second(params_, stored, pk, rng_);
    delegated = encode_pre_ciphertext(
        params_, pre_reencrypt(params_, refreshed, auth.value.rk.rk));
  } catch (const Error&) {
    return R::reject("client:bad_locker_entry");
  }

  auto ticket = distributor.execute_content(session_cert.cert_id, delegated, content_id);
  if (!ticket.ok) return R::reject("distributor:" + ticket.reason);

  ExecutionSummary summary;
  summary.content_id = content_id;
  Bytes streamed;
  streamed.reserve(ticket.value.content_size);
  for (uint64_t seq = 0; seq < ticket.value.chunk_count; ++seq) {
    auto chunk = distributor.fetch_chunk(ticket.value.resume_token, seq);
    if (!chunk.ok) return R::reject("distributor:" + chunk.reason);
    if (chunk.value.seq != seq ||
        chunk.value.last != (seq + 1 == ticket.value.chunk_count))
      return R::reject("distributor:bad_stream");
    if (sink) sink(chunk.value.data);
    streamed.insert(streamed.end(), chunk.value.data.begin(), chunk.value.data.end());
    ++summary.chunks;
  }
  if (streamed.size() != ticket.value.content_size)
    return R::reject("distributor:bad_stream");
  summary.bytes = streamed.size();
  summary.digest = sha256(streamed);
  return R::success(std::move(summary));
}

}  // namespace drmmesh
