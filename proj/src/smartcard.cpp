#include "drmmesh/smartcard.hpp"

#include <algorithm>

namespace drmmesh {

namespace {

const std::string kAttrDomain = "holder-attributes";
const std::string kPurchaseAuthDomain = "purchase-auth";
const std::string kLicenseDomain = "license";
const Bytes kLicenseAad = str_bytes("license");

std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

std::string date_string(const CivilDate& d) {
  return std::to_string(d.year) + "-" + two_digits(d.month) + "-" + two_digits(d.day);
}

CivilDate parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw CodecError("date must be YYYY-MM-DD");
  CivilDate d;
  try {
    d.year = std::stoi(s.substr(0, 4));
    d.month = std::stoi(s.substr(5, 2));
    d.day = std::stoi(s.substr(8, 2));
  } catch (const std::exception&) {
    throw CodecError("date must be numeric YYYY-MM-DD");
  }
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    throw CodecError("no such calendar date: " + s);
  return d;
}

json holder_attributes_json(const HolderAttributes& attrs) {
  json j;
  j["date_of_birth"] = date_string(attrs.date_of_birth);
  j["home_country"] = attrs.home_country;
  return j;
}

void sign_holder_attributes(const SystemParams& params, const mpz_class& provider_sk,
                            HolderAttributes& attrs) {
  Element sig = detached_sign_json(params, provider_sk, holder_attributes_json(attrs),
                                   kAttrDomain);
  attrs.provider_sig = params.encode_element(sig);
}

bool verify_holder_attributes(const SystemParams& params, const Element& provider_pk,
                              const HolderAttributes& attrs) {
  if (attrs.provider_sig.empty()) return false;
  Element sig;
  try {
    sig = params.decode_element(attrs.provider_sig);
  } catch (const Error&) {
    return false;
  }
  return detached_verify_json(params, provider_pk, holder_attributes_json(attrs),
                              kAttrDomain, sig);
}

// ---------------------------------------------------------------------------

Smartcard::Smartcard(Init init)
    : params_(init.params),
      sign_sk_(init.sign_sk),
      card_cert_(std::move(init.card_cert)),
      provider_cert_(std::move(init.provider_cert)),
      root_cert_(std::move(init.root_cert)),
      pin_(std::move(init.pin)),
      attributes_(std::move(init.attributes)),
      min_age_by_rating_(std::move(init.min_age_by_rating)),
      rng_(init.rng_seed),
      keygen_(init.keygen ? std::move(init.keygen)
                          : [](const SystemParams& p, RandomSource& r) {
                              return pre_keygen(p, r);
                            }) {}

bool Smartcard::locked() const {
  std::lock_guard lock(mu_);
  return locked_;
}

bool Smartcard::session_ok(const SessionToken& session) const {
  return !locked_ && session_ != 0 && session.id == session_;
}

CardResult<SessionToken> Smartcard::verify_pin(const std::string& attempt) {
  std::lock_guard lock(mu_);
  if (locked_) return CardResult<SessionToken>::reject("card_locked");
  if (attempt != pin_) {
    if (++pin_failures_ >= kMaxPinFailures) {
      locked_ = true;
      session_ = 0;
      return CardResult<SessionToken>::reject("card_locked");
    }
    return CardResult<SessionToken>::reject("bad_pin");
  }
  pin_failures_ = 0;
  session_ = next_session_++;
  return CardResult<SessionToken>::success(SessionToken{session_});
}

CardResult<PurchaseAuth> Smartcard::begin_purchase(const SessionToken& session,
                                                   const Bytes& challenge_nonce) {
  std::lock_guard lock(mu_);
  if (!session_ok(session)) return CardResult<PurchaseAuth>::reject("no_session");

  PreKeyPair key = keygen_(params_, rng_);
  Bytes fp = pre_public_key_fingerprint(params_, key.pub);
  std::string fp_hex = to_hex(fp);

  // A repeated fingerprint replaces the old pending entry; otherwise the
  // oldest pending purchase is evicted once the card-side buffer is full.
  auto same = std::find_if(pending_.begin(), pending_.end(),
                           [&](const auto& p) { return p.first == fp_hex; });
  if (same != pending_.end()) pending_.erase(same);
  if (pending_.size() >= kMaxPendingKeys) pending_.erase(pending_.begin());
  pending_.emplace_back(fp_hex, key);

  Bytes msg = str_bytes(kPurchaseAuthDomain + "\n");
  msg.insert(msg.end(), challenge_nonce.begin(), challenge_nonce.end());
  Bytes pk_enc = encode_pre_public_key(params_, key.pub);
  msg.insert(msg.end(), pk_enc.begin(), pk_enc.end());

  PurchaseAuth auth;
  auth.pk_tmp = key.pub;
  auth.fingerprint = fp;
  auth.signature = params_.encode_element(sig_sign(params_, sign_sk_, msg));
  auth.card_cert = card_cert_;
  return CardResult<PurchaseAuth>::success(std::move(auth));
}

void Smartcard::advance_ts(Millis ts) {
  // Strictly increasing by contract of the callers.
  card_ts_ = ts;
  seen_license_ids_.clear();
  seen_cd_cert_ids_.clear();
}

CardResult<std::monostate> Smartcard::store_license(const SessionToken& session,
                                                    const Bytes& encrypted_license,
                                                    const Bytes& license_sig) {
  std::lock_guard lock(mu_);
  if (!session_ok(session)) return CardResult<std::monostate>::reject("no_session");
  return store_license_locked(encrypted_license, license_sig);
}

CardResult<std::monostate> Smartcard::store_license_locked(const Bytes& encrypted_license,
                                                           const Bytes& license_sig) {
  using R = CardResult<std::monostate>;

  HybridCiphertext blob;
  try {
    blob = decode_hybrid_ciphertext(params_, encrypted_license);
  } catch (const Error&) {
    return R::reject("malformed_license_blob");
  }

  // Find the purchase key that opens this blob: pending keys newest first,
  // then keys already bound to stored licenses (so a replayed delivery is
  // still decryptable and can be rejected for the precise reason).
  Bytes plain;
  PreKeyPair opener;
  bool found = false;
  size_t pending_index = pending_.size();
  for (size_t i = pending_.size(); i-- > 0;) {
    try {
      plain = hybrid_decrypt(params_, blob, pending_[i].second.a1, kLicenseAad);
      opener = pending_[i].second;
      pending_index = i;
      found = true;
      break;
    } catch (const CryptoError&) {
      continue;
    }
  }
  if (!found) {
    for (const auto& [cid, stored] : licenses_) {
      try {
        plain = hybrid_decrypt(params_, blob, stored.key.a1, kLicenseAad);
        opener = stored.key;
        found = true;
        break;
      } catch (const CryptoError&) {
        continue;
      }
    }
  }
  if (!found) return R::reject("no_pending_key");

  License lic;
  json lic_json;
  try {
    lic_json = json::parse(plain.begin(), plain.end());
    lic = license_from_json(lic_json);
  } catch (const json::exception&) {
    return R::reject("malformed_license");
  } catch (const Error&) {
    return R::reject("malformed_license");
  }

  // Issuer must be a content provider anchored at the card's root.
  if (lic.issuer_cert.role != CertRole::content_provider)
    return R::reject("issuer_not_a_provider");
  CertStore pool;
  pool.add(root_cert_);
  pool.add(lic.issuer_cert);
  if (!validate_chain(params_, lic.issuer_cert, pool, root_cert_))
    return R::reject("bad_issuer_chain");

  Element issuer_pk, sig;
  try {
    issuer_pk = params_.decode_element(lic.issuer_cert.sig_pubkey);
    sig = params_.decode_element(license_sig);
  } catch (const Error&) {
    return R::reject("bad_signature");
  }
  if (!detached_verify_json(params_, issuer_pk, lic_json, kLicenseDomain, sig))
    return R::reject("bad_signature");

  // Freshness: a license id is accepted at most once, and issuance
  // timestamps must move the card's clock strictly forward.
  if (seen_license_ids_.count(lic.license_id)) return R::reject("replayed_license_id");
  if (lic.ts <= card_ts_) return R::reject("stale_license");

  advance_ts(lic.ts);
  seen_license_ids_.insert(lic.license_id);
  licenses_[lic.content_id] = StoredLicense{lic, opener};
  if (pending_index < pending_.size())
    pending_.erase(pending_.begin() + (ptrdiff_t)pending_index);
  return R::success({});
}

CardResult<CategoryDecision> Smartcard::check_authorization_category(
    const SessionToken& session, const std::string& rating, Millis now_ts) {
  std::lock_guard lock(mu_);
  using R = CardResult<CategoryDecision>;
  if (!session_ok(session)) return R::reject("no_session");

  Element provider_pk;
  try {
    provider_pk = params_.decode_element(provider_cert_.sig_pubkey);
  } catch (const Error&) {
    throw AuthError("card personalization is broken: provider key unreadable");
  }
  if (!verify_holder_attributes(params_, provider_pk, attributes_))
    throw AuthError("holder attribute signature is invalid");

  auto it = min_age_by_rating_.find(rating);
  if (it == min_age_by_rating_.end())
    return R::success(CategoryDecision::allow);  // unrestricted category

  Millis threshold = anniversary_ms(attributes_.date_of_birth, it->second);
  return R::success(now_ts >= threshold ? CategoryDecision::allow
                                        : CategoryDecision::deny);
}

CardResult<std::vector<std::string>> Smartcard::list_content(
    const SessionToken& session) const {
  std::lock_guard lock(mu_);
  using R = CardResult<std::vector<std::string>>;
  if (!session_ok(session)) return R::reject("no_session");
  std::vector<std::string> ids;
  ids.reserve(licenses_.size());
  for (const auto& [content_id, entry] : licenses_) ids.push_back(content_id);
  return R::success(std::move(ids));
}

CardResult<ExecutionGrantKey> Smartcard::authorize_execution(
    const SessionToken& session, const std::string& content_id,
    const Certificate& cd_cert, const std::vector<Certificate>& supporting) {
  std::lock_guard lock(mu_);
  using R = CardResult<ExecutionGrantKey>;
  if (!session_ok(session)) return R::reject("no_session");

  auto lic_it = licenses_.find(content_id);
  if (lic_it == licenses_.end()) return R::reject("unknown_content");

  // The presented certificate must be a distributor session certificate
  // whose chain reaches the card's trust anchor through a distributor.
  if (cd_cert.role != CertRole::content_distributor_ephemeral)
    return R::reject("not_a_distributor");
  CertStore pool;
  pool.add(root_cert_);
  for (const Certificate& c : supporting) pool.add(c);
  if (!validate_chain(params_, cd_cert, pool, root_cert_))
    return R::reject("not_a_distributor");

  if (seen_cd_cert_ids_.count(cd_cert.cert_id)) return R::reject("replayed_cert_id");
  if (cd_cert.ts <= card_ts_) return R::reject("stale_cert");

  PrePublicKey cd_pk;
  try {
    cd_pk = decode_pre_public_key(params_, cd_cert.pre_pubkey);
  } catch (const Error&) {
    return R::reject("bad_distributor_key");
  }

  advance_ts(cd_cert.ts);
  seen_cd_cert_ids_.insert(cd_cert.cert_id);

  StoredLicense& stored = lic_it->second;
  TermsDecision decision = check_terms(stored.license.terms, card_ts_);
  if (!decision.allow)
    return R::reject(std::string("terms_") + deny_reason_name(decision.reason));
  stored.license.terms = consume(stored.license.terms);

  ExecutionGrantKey grant;
  grant.rk.rk = pre_rekeygen(params_, stored.key, cd_pk);
  grant.rk.from_hint = to_hex(pre_public_key_fingerprint(params_, stored.key.pub));
  grant.rk.to_hint = cd_cert.cert_id;
  grant.pk_fingerprint = pre_public_key_fingerprint(params_, stored.key.pub);
  return R::success(std::move(grant));
}

Millis Smartcard::card_ts() const {
  std::lock_guard lock(mu_);
  return card_ts_;
}

int Smartcard::pin_failures() const {
  std::lock_guard lock(mu_);
  return pin_failures_;
}

size_t Smartcard::pending_key_count() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

json Smartcard::debug_snapshot() const {
  std::lock_guard lock(mu_);
  json licenses = json::array();
  for (const auto& [content_id, stored] : licenses_) {
    licenses.push_back({
        {"content_id", content_id},
        {"license_id", stored.license.license_id},
        {"ts", stored.license.ts},
        {"model", license_model_name(stored.license.terms.model)},
        {"n", stored.license.terms.n},
        {"expiry_ts", stored.license.terms.expiry_ts},
        {"used", stored.license.terms.used},
    });
  }
  json pending = json::array();
  for (const auto& [fp_hex, key] : pending_) pending.push_back(fp_hex);
  return json{
      {"card_ts", card_ts_},
      {"locked", locked_},
      {"pin_failures", pin_failures_},
      {"pending", pending},
      {"licenses", licenses},
  };
}

// ---------------------------------------------------------------------------
// Length-prefixed JSON command channel.

Bytes frame_payload(const Bytes& payload) {
  Bytes out;
  out.reserve(4 + payload.size());
  put_u32_be(out, (uint32_t)payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes unframe_payload(const Bytes& frame) {
  if (frame.size() < 4) throw CodecError("frame shorter than its length prefix");
  uint32_t len = get_u32_be(frame.data());
  if (frame.size() != 4u + len) throw CodecError("frame length mismatch");
  return Bytes(frame.begin() + 4, frame.end());
}

json CardChannel::call(const json& command) {
  std::lock_guard lock(mu_);
  try {
    if (!command.is_object() || !command.contains("op") || !command["op"].is_string())
      throw CodecError("card command needs an op");
    const std::string op = command["op"].get<std::string>();
    auto session = [&]() -> SessionToken {
      return SessionToken{command.at("session").get<uint64_t>()};
    };

    if (op == "verify_pin") {
      auto r = card_.verify_pin(command.at("pin").get<std::string>());
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"}, {"session", r.value.id}};
    }
    if (op == "begin_purchase") {
      Bytes nonce = b64url_decode(command.at("nonce").get<std::string>());
      auto r = card_.begin_purchase(session(), nonce);
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"},
              {"pk_tmp",
               b64url_encode(encode_pre_public_key(card_.params(), r.value.pk_tmp))},
              {"fingerprint", to_hex(r.value.fingerprint)},
              {"sig", b64url_encode(r.value.signature)},
              {"card_cert", r.value.card_cert.to_json()}};
    }
    if (op == "store_license") {
      auto r = card_.store_license(session(),
                                   b64url_decode(command.at("blob").get<std::string>()),
                                   b64url_decode(command.at("sig").get<std::string>()));
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"}};
    }
    if (op == "list_content") {
      auto r = card_.list_content(session());
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"}, {"content_ids", r.value}};
    }
    if (op == "authorize_execution") {
      const json& certs = command.at("certs");
      if (!certs.is_array() || certs.empty())
        throw CodecError("authorize_execution needs a certificate list");
      Certificate leaf = Certificate::from_json(certs[0]);
      std::vector<Certificate> supporting;
      for (size_t i = 1; i < certs.size(); ++i)
        supporting.push_back(Certificate::from_json(certs[i]));
      auto r = card_.authorize_execution(session(),
                                         command.at("content_id").get<std::string>(),
                                         leaf, supporting);
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"},
              {"rk", b64url_encode(card_.params().encode_element(r.value.rk.rk))},
              {"from", r.value.rk.from_hint},
              {"to", r.value.rk.to_hint},
              {"fingerprint", to_hex(r.value.pk_fingerprint)}};
    }
    if (op == "check_category") {
      auto r = card_.check_authorization_category(
          session(), command.at("rating").get<std::string>(),
          command.at("now_ts").get<Millis>());
      if (!r.ok) return {{"status", "reject"}, {"reason", r.reason}};
      return {{"status", "ok"},
              {"decision", r.value == CategoryDecision::allow ? "allow" : "deny"}};
    }
    if (op == "snapshot") {
      json snap = card_.debug_snapshot();
      snap["status"] = "ok";
      return snap;
    }
    throw CodecError("unknown card op: " + op);
  } catch (const json::exception& e) {
    return {{"status", "error"}, {"reason", std::string("bad command: ") + e.what()}};
  } catch (const Error& e) {
    return {{"status", "error"}, {"reason", e.what()}};
  }
}

Bytes CardChannel::transact(const Bytes& request_frame) {
  json response;
  try {
    Bytes payload = unframe_payload(request_frame);
    response = call(json::parse(payload.begin(), payload.end()));
  } catch (const json::exception& e) {
    response = {{"status", "error"}, {"reason", std::string("bad frame: ") + e.what()}};
  } catch (const Error& e) {
    response = {{"status", "error"}, {"reason", e.what()}};
  }
  return frame_payload(str_bytes(response.dump()));
}

}  // namespace drmmesh
