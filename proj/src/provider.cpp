#include "drmmesh/provider.hpp"

#include <algorithm>

namespace drmmesh {

namespace {

const std::string kPaymentDomain = "payment-token";
const std::string kPurchaseAuthPrefix = "purchase-auth\n";
const std::string kLicenseDomain = "license";
const Bytes kLicenseAad = str_bytes("license");

json payment_body(const PaymentToken& pt) {
  json j;
  j["serial"] = pt.serial;
  j["amount"] = pt.amount;
  return j;
}

}  // namespace

json PaymentToken::to_json() const {
  json j = payment_body(*this);
  j["sig"] = b64url_encode(bank_signature);
  return j;
}

PaymentToken PaymentToken::from_json(const json& j) {
  PaymentToken pt;
  if (!j.is_object() || !j.contains("serial") || !j.contains("amount") || !j.contains("sig"))
    throw CodecError("payment token: missing fields");
  if (!j["serial"].is_string() || !j["amount"].is_number_integer() || !j["sig"].is_string())
    throw CodecError("payment token: wrong field types");
  pt.serial = j["serial"].get<std::string>();
  pt.amount = j["amount"].get<int64_t>();
  pt.bank_signature = b64url_decode(j["sig"].get<std::string>());
  return pt;
}

BankAuthority::BankAuthority(const SystemParams& params, uint64_t seed)
    : params_(params), rng_(seed) {
  key_ = sig_keygen(params_, rng_);
}

PaymentToken BankAuthority::issue(int64_t amount) {
  if (amount < 0) throw Error("payment amount must be non-negative");
  std::lock_guard lk(mu_);
  PaymentToken pt;
  pt.serial = to_hex(rng_.bytes(16));
  pt.amount = amount;
  Element sig = detached_sign_json(params_, key_.sk, payment_body(pt), kPaymentDomain);
  pt.bank_signature = params_.encode_element(sig);
  return pt;
}

bool BankAuthority::verify(const PaymentToken& pt) const {
  Element sig;
  try {
    sig = params_.decode_element(pt.bank_signature);
  } catch (const CodecError&) {
    return false;
  }
  return detached_verify_json(params_, key_.pk, payment_body(pt), kPaymentDomain, sig);
}

// ---------------------------------------------------------------------------

ContentProvider::ContentProvider(Init init)
    : params_(std::move(init.params)),
      sign_key_(std::move(init.sign_key)),
      cp_cert_(std::move(init.cp_cert)),
      root_cert_(std::move(init.root_cert)),
      trust_pool_(std::move(init.trust_pool)),
      bank_pk_(std::move(init.bank_pk)),
      discounts_(std::move(init.discounts)),
      clock_(init.clock ? std::move(init.clock) : std::make_shared<SystemClock>()),
      rng_(init.rng_seed),
      session_ttl_(init.session_ttl) {}

const CatalogEntry& ContentProvider::ingest_content(const ContentMeta& meta,
                                                    const Bytes& plaintext) {
  if (plaintext.empty()) throw Error("refusing to ingest empty content");
  if (meta.content_id.empty()) throw Error("content id must be nonempty");
  if (meta.unit_price < 0) throw Error("unit price must be non-negative");
  std::lock_guard lk(mu_);
  if (catalog_.count(meta.content_id))
    throw Error("content already ingested: " + meta.content_id);

  CatalogEntry entry;
  entry.meta = meta;
  entry.ck = kdf_content_key(params_, pre_random_message(params_, rng_));
  entry.encrypted_content = encrypt_content(plaintext, entry.ck, rng_);
  auto [it, _] = catalog_.emplace(meta.content_id, std::move(entry));
  return it->second;
}

std::vector<CatalogItem> ContentProvider::list_catalog() const {
  std::lock_guard lk(mu_);
  std::vector<CatalogItem> rows;
  rows.reserve(catalog_.size());
  for (const auto& [id, entry] : catalog_)
    rows.push_back({id, entry.meta.title, entry.meta.rating, entry.meta.unit_price});
  return rows;
}

PriceQuote ContentProvider::quote(const std::string& content_id, const std::string& model,
                                  int64_t quantity) const {
  std::lock_guard lk(mu_);
  auto it = catalog_.find(content_id);
  if (it == catalog_.end()) throw Error("unknown content id: " + content_id);
  LicenseModel m = license_model_from_name(model);  // throws on unknown name
  if (m != LicenseModel::execute_at_most_n && quantity != 1)
    throw Error("quantity must be 1 for model " + model);
  return quote_price(it->second.meta.unit_price, quantity, discounts_);
}

PurchaseOpen ContentProvider::open_purchase() {
  std::lock_guard lk(mu_);
  Millis now = clock_->now();
  // Session-table hygiene: drop entries that can no longer complete.
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second.created_at >= session_ttl_ &&
        it->second.state == SessionState::challenged)
      it = sessions_.erase(it);
    else
      ++it;
  }
  PurchaseOpen open;
  open.session_id = next_session_++;
  open.nonce = rng_.bytes(32);
  sessions_[open.session_id] = Session{open.nonce, SessionState::challenged, now};
  return open;
}

std::string ContentProvider::next_license_id_locked() {
  return cp_cert_.cert_id + ":lic:" + std::to_string(++licenses_issued_);
}

Millis ContentProvider::next_license_ts_locked() {
  Millis ts = std::max(clock_->now(), last_license_ts_ + 1);
  last_license_ts_ = ts;
  return ts;
}

OpResult<PurchaseGrant> ContentProvider::complete_purchase(const PurchaseRequest& req) {
  std::lock_guard lk(mu_);
  using R = OpResult<PurchaseGrant>;
  Millis now = clock_->now();

  auto sit = sessions_.find(req.session_id);
  if (sit == sessions_.end()) return R::reject("unknown_session");
  Session& session = sit->second;
  if (session.state == SessionState::completed) return R::reject("session_replayed");
  if (session.state == SessionState::aborted || now - session.created_at >= session_ttl_) {
    session.state = SessionState::aborted;
    return R::reject("session_expired");
  }

  auto cit = catalog_.find(req.content_id);
  if (cit == catalog_.end()) return R::reject("unknown_content");
  const CatalogEntry& entry = cit->second;

  // Terms must make sense before anything is charged for them.
  LicenseTerms terms;
  try {
    terms.model = license_model_from_name(req.model);
    if (terms.model != LicenseModel::execute_at_most_n && req.quantity != 1)
      throw Error("bad quantity");
    terms.n = is_counted_model(terms.model) ? req.quantity : 0;
    if (terms.model == LicenseModel::pay_per_execute) terms.n = 1;
    terms.expiry_ts = terms.model == LicenseModel::execute_until ? req.expiry_ts : 0;
    if (terms.model == LicenseModel::execute_until && terms.expiry_ts <= now)
      throw Error("expiry in the past");
    validate_terms(terms);
  } catch (const Error&) {
    return R::reject("bad_terms");
  }

  // Only a certificate on the smartcard chain may answer the challenge.
  if (req.card_cert.role != CertRole::smartcard) return R::reject("bad_card_chain");
  CertStore pool;
  pool.add(root_cert_);
  for (const auto& c : trust_pool_) pool.add(c);
  pool.add(req.card_cert);
  if (!validate_chain(params_, req.card_cert, pool, root_cert_))
    return R::reject("bad_card_chain");

  Element card_pk, challenge_sig;
  PrePublicKey pk_tmp;
  try {
    card_pk = params_.decode_element(req.card_cert.sig_pubkey);
    challenge_sig = params_.decode_element(req.signature);
    pk_tmp = decode_pre_public_key(params_, req.pk_tmp);
  } catch (const CodecError&) {
    return R::reject("malformed_request");
  }

  Bytes msg = str_bytes(kPurchaseAuthPrefix);
  msg.insert(msg.end(), session.nonce.begin(), session.nonce.end());
  msg.insert(msg.end(), req.pk_tmp.begin(), req.pk_tmp.end());
  if (!sig_verify(params_, card_pk, msg, challenge_sig)) return R::reject("bad_signature");

  // Payment: a bank-signed bearer token for the exact quoted price, spent
  // at most once across all sessions.
  bool payment_ok = false;
  try {
    Element bank_sig = params_.decode_element(req.payment.bank_signature);
    payment_ok = detached_verify_json(params_, bank_pk_, payment_body(req.payment),
                                      kPaymentDomain, bank_sig);
  } catch (const CodecError&) {
  }
  if (!payment_ok) return R::reject("payment_invalid");
  PriceQuote price = quote_price(entry.meta.unit_price,
                                 is_counted_model(terms.model) ? terms.n : 1, discounts_);
  if (req.payment.amount != price.total) return R::reject("wrong_amount");
  if (spent_serials_.count(req.payment.serial)) return R::reject("payment_double_spent");
  spent_serials_.insert(req.payment.serial);

  // Mint the license and bind everything to the card's temporary key.
  License lic;
  lic.license_id = next_license_id_locked();
  lic.ts = next_license_ts_locked();
  lic.content_id = req.content_id;
  lic.terms = terms;
  lic.issuer_cert = cp_cert_;

  json lic_json = license_to_json(lic);
  PurchaseGrant grant;
  grant.encrypted_license = encode_hybrid_ciphertext(
      params_,
      hybrid_encrypt(params_, pk_tmp, str_bytes(lic_json.dump()), kLicenseAad, rng_));
  grant.license_signature =
      params_.encode_element(detached_sign_json(params_, sign_key_.sk, lic_json, kLicenseDomain));
  grant.encrypted_ck = encode_pre_ciphertext(
      params_, pre_encrypt_second(params_, entry.ck.g2_seed, pk_tmp, rng_));

  session.state = SessionState::completed;
  return R::success(std::move(grant));
}

Bytes ContentProvider::serve_encrypted_content(const std::string& content_id) const {
  std::lock_guard lk(mu_);
  auto it = catalog_.find(content_id);
  if (it == catalog_.end()) throw Error("unknown content id: " + content_id);
  return it->second.encrypted_content;
}

json ContentProvider::debug_snapshot() const {
  std::lock_guard lk(mu_);
  json sessions = json::object();
  for (const auto& [id, s] : sessions_) {
    const char* state = s.state == SessionState::challenged ? "challenged"
                        : s.state == SessionState::completed ? "completed"
                                                             : "aborted";
    sessions[std::to_string(id)] = state;
  }
  return json{{"catalog_size", catalog_.size()},
              {"sessions", sessions},
              {"licenses_issued", licenses_issued_},
              {"last_license_ts", last_license_ts_},
              {"spent_serials", spent_serials_.size()}};
}

}  // namespace drmmesh
