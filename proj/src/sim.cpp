#include "drmmesh/sim.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Trust bootstrap.

TrustBootstrap TrustBootstrap::create(const SystemParams& params, uint64_t seed,
                                      Millis ts_base) {
  TrustBootstrap t;
  SeededRng root_rng(derive_seed(seed, "root"));
  SeededRng scp_rng(derive_seed(seed, "card-maker"));
  SeededRng card_rng(derive_seed(seed, "card"));
  SeededRng cp_rng(derive_seed(seed, "provider"));
  t.root_key = sig_keygen(params, root_rng);
  t.scp_key = sig_keygen(params, scp_rng);
  t.card_key = sig_keygen(params, card_rng);
  t.cp_key = sig_keygen(params, cp_rng);
  t.card_pre = pre_keygen(params, card_rng);

  auto base = [&](CertRole role, const std::string& subject, const std::string& id,
                  Millis ts, const Element& pk) {
    Certificate c;
    c.cert_id = id;
    c.role = role;
    c.subject = subject;
    c.ts = ts;
    c.sig_pubkey = params.encode_element(pk);
    return c;
  };

  t.root = base(CertRole::root, "root-authority", "root-ca", ts_base, t.root_key.pk);
  sign_certificate(params, t.root_key.sk, "root-ca", t.root);

  t.scp = base(CertRole::smartcard_provider, "card-maker", "card-maker-1", ts_base + 1,
               t.scp_key.pk);
  sign_certificate(params, t.root_key.sk, "root-ca", t.scp);

  t.card = base(CertRole::smartcard, "smartcard", "card-shared", ts_base + 2,
                t.card_key.pk);
  t.card.pre_pubkey = encode_pre_public_key(params, t.card_pre.pub);
  sign_certificate(params, t.scp_key.sk, "card-maker-1", t.card);

  t.cp = base(CertRole::content_provider, "studio", "provider-main", ts_base + 1,
              t.cp_key.pk);
  sign_certificate(params, t.root_key.sk, "root-ca", t.cp);
  return t;
}

DistributorIdentity make_distributor_identity(const SystemParams& params,
                                              const TrustBootstrap& trust,
                                              const std::string& cert_id,
                                              uint64_t seed, Millis ts) {
  SeededRng rng(seed);
  DistributorIdentity id;
  id.key = sig_keygen(params, rng);
  Certificate c;
  c.cert_id = cert_id;
  c.role = CertRole::content_distributor;
  c.subject = "cdn";
  c.ts = ts;
  c.sig_pubkey = params.encode_element(id.key.pk);
  sign_certificate(params, trust.root_key.sk, trust.root.cert_id, c);
  id.cert = c;
  return id;
}

// ---------------------------------------------------------------------------
// Recording ports.

namespace {

Envelope env_of(MessageType t, const std::string& session_id, json body) {
  Envelope env;
  env.message_type = t;
  env.session_id = session_id;
  env.body = std::move(body);
  return env;
}

}  // namespace

SimProviderPort::SimProviderPort(ContentProvider& provider, Transcript& transcript,
                                 std::shared_ptr<Clock> clock)
    : provider_(provider), transcript_(transcript), clock_(std::move(clock)) {}

std::vector<CatalogItem> SimProviderPort::list_catalog() { return provider_.list_catalog(); }

PriceQuote SimProviderPort::quote(const std::string& content_id, const std::string& model,
                                  int64_t quantity) {
  return provider_.quote(content_id, model, quantity);
}

PurchaseOpen SimProviderPort::open_purchase() {
  PurchaseOpen open = provider_.open_purchase();
  session_tag_ = "p" + std::to_string(open.session_id);
  transcript_.append(Role::client, Role::provider,
                     env_of(MessageType::purchase_open, session_tag_, json::object()),
                     clock_->now());
  transcript_.append(Role::provider, Role::client,
                     env_of(MessageType::purchase_challenge, session_tag_,
                            {{"nonce", b64url_encode(open.nonce)}}),
                     clock_->now());
  return open;
}

OpResult<PurchaseGrant> SimProviderPort::complete_purchase(const PurchaseRequest& req) {
  json body = {{"card_cert", req.card_cert.to_json()},
               {"content_id", req.content_id},
               {"expiry_ts", req.expiry_ts},
               {"model", req.model},
               {"payment", req.payment.to_json()},
               {"pk_tmp", b64url_encode(req.pk_tmp)},
               {"quantity", req.quantity},
               {"signature", b64url_encode(req.signature)}};
  transcript_.append(Role::client, Role::provider,
                     env_of(MessageType::purchase_complete_request, session_tag_, body),
                     clock_->now());

  auto r = provider_.complete_purchase(req);
  if (r.ok) {
    json resp = {{"encrypted_ck", b64url_encode(r.value.encrypted_ck)},
                 {"encrypted_license", b64url_encode(r.value.encrypted_license)},
                 {"license_signature", b64url_encode(r.value.license_signature)}};
    transcript_.append(Role::provider, Role::client,
                       env_of(MessageType::purchase_complete_response, session_tag_, resp),
                       clock_->now());
  } else {
    transcript_.append(Role::provider, Role::client,
                       env_of(MessageType::error, session_tag_, {{"reason", r.reason}}),
                       clock_->now());
  }
  return r;
}

SimDistributorPort::SimDistributorPort(ContentDistributor& distributor,
                                       Transcript& transcript,
                                       std::shared_ptr<Clock> clock, uint64_t run_seed)
    : distributor_(distributor),
      transcript_(transcript),
      clock_(std::move(clock)),
      run_ids_(run_seed) {}

Certificate SimDistributorPort::distributor_cert() { return distributor_.cert(); }

Certificate SimDistributorPort::issue_session_cert() {
  session_tag_ = "d" + to_hex(run_ids_.bytes(4));
  transcript_.append(Role::client, Role::distributor,
                     env_of(MessageType::cert_request, session_tag_, json::object()),
                     clock_->now());
  Certificate cert = distributor_.issue_session_cert();
  transcript_.append(Role::distributor, Role::client,
                     env_of(MessageType::cert_response, session_tag_,
                            {{"cert", cert.to_json()}}),
                     clock_->now());
  return cert;
}

OpResult<ExecutionTicket> SimDistributorPort::execute_content(
    const std::string& cert_id, const Bytes& reencrypted_ck,
    const std::string& content_id) {
  json body = {{"cert_id", cert_id},
               {"content_id", content_id},
               {"reencrypted_ck", b64url_encode(reencrypted_ck)}};
  transcript_.append(Role::client, Role::distributor,
                     env_of(MessageType::execute_request, session_tag_, body),
                     clock_->now());
  auto r = distributor_.execute_content(cert_id, reencrypted_ck, content_id);
  if (!r.ok)
    transcript_.append(Role::distributor, Role::client,
                       env_of(MessageType::error, session_tag_, {{"reason", r.reason}}),
                       clock_->now());
  return r;
}

OpResult<StreamChunk> SimDistributorPort::fetch_chunk(const std::string& resume_token,
                                                      uint64_t seq) {
  auto r = distributor_.fetch_chunk(resume_token, seq);
  if (r.ok) {
    json body = {{"data", b64url_encode(r.value.data)},
                 {"last", r.value.last},
                 {"seq", static_cast<int64_t>(r.value.seq)}};
    transcript_.append(Role::distributor, Role::client,
                       env_of(MessageType::stream_chunk, session_tag_, body),
                       clock_->now());
  } else {
    transcript_.append(Role::distributor, Role::client,
                       env_of(MessageType::error, session_tag_, {{"reason", r.reason}}),
                       clock_->now());
  }
  return r;
}

// ---------------------------------------------------------------------------
// World assembly.

SimWorld::SimWorld(Options opt)
    : opt_(std::move(opt)),
      clock_(std::make_shared<SimClock>(opt_.base_time, opt_.clock_tick)),
      rng_(derive_seed(opt_.seed, "world")),
      trust_(TrustBootstrap::create(opt_.params, derive_seed(opt_.seed, "trust"),
                                    opt_.base_time - 86'400'000)) {
  bank_ = std::make_unique<BankAuthority>(opt_.params, derive_seed(opt_.seed, "bank"));

  ContentProvider::Init cp_init;
  cp_init.params = opt_.params;
  cp_init.sign_key = trust_.cp_key;
  cp_init.cp_cert = trust_.cp;
  cp_init.root_cert = trust_.root;
  cp_init.trust_pool = {trust_.scp};
  cp_init.bank_pk = bank_->pk();
  cp_init.discounts.bp_by_min_qty = {{3, 1000}, {10, 2500}};
  cp_init.clock = clock_;
  cp_init.rng_seed = derive_seed(opt_.seed, "provider-rng");
  provider_ = std::make_unique<ContentProvider>(std::move(cp_init));

  for (size_t i = 0; i < opt_.distributors; ++i) {
    std::string label = "cdn-" + std::to_string(i + 1);
    DistributorIdentity id = make_distributor_identity(
        opt_.params, trust_, label, derive_seed(opt_.seed, label), clock_->now());
    ContentDistributor::Init cd_init;
    cd_init.params = opt_.params;
    cd_init.sign_key = id.key;
    cd_init.cd_cert = id.cert;
    cd_init.fetch = [this](const std::string& content_id) {
      return provider_->serve_encrypted_content(content_id);
    };
    cd_init.clock = clock_;
    cd_init.rng_seed = derive_seed(opt_.seed, label + "-rng");
    distributors_.push_back(std::make_unique<ContentDistributor>(std::move(cd_init)));
  }

  HolderAttributes attrs;
  attrs.date_of_birth = opt_.holder_dob;
  attrs.home_country = opt_.holder_country;
  sign_holder_attributes(opt_.params, trust_.scp_key.sk, attrs);

  Smartcard::Init card_init;
  card_init.params = opt_.params;
  card_init.sign_sk = trust_.card_key.sk;
  card_init.card_cert = trust_.card;
  card_init.provider_cert = trust_.scp;
  card_init.root_cert = trust_.root;
  card_init.pin = opt_.pin;
  card_init.attributes = attrs;
  card_init.min_age_by_rating = opt_.min_age_by_rating;
  card_init.rng_seed = derive_seed(opt_.seed, "card-rng");
  card_init.keygen = opt_.card_keygen;
  card_ = std::make_unique<Smartcard>(std::move(card_init));

  Client::Init cl_init;
  cl_init.params = opt_.params;
  cl_init.card = card_.get();
  cl_init.locker = &locker_;
  cl_init.clock = clock_;
  cl_init.rng_seed = derive_seed(opt_.seed, "client-rng");
  cl_init.transcript = &transcript_;
  client_ = std::make_unique<Client>(std::move(cl_init));

  provider_port_ = std::make_unique<SimProviderPort>(*provider_, transcript_, clock_);
  for (size_t i = 0; i < distributors_.size(); ++i)
    distributor_ports_.push_back(std::make_unique<SimDistributorPort>(
        *distributors_[i], transcript_, clock_,
        derive_seed(opt_.seed, "port-cdn-" + std::to_string(i + 1))));

  auto unlocked = client_->unlock(opt_.pin);
  if (!unlocked.ok) throw Error("sim: card refused its own pin: " + unlocked.reason);
  session_ = unlocked.value;

  if (opt_.default_catalog) {
    ingest({"movie-1", "First Film", "", 500}, random_plaintext(150'000));
    ingest({"movie-2", "Second Film", "", 750}, random_plaintext(90'000));
    ingest({"movie-x", "Late Film", "X", 900}, random_plaintext(60'000));
  }
}

void SimWorld::ingest(const ContentMeta& meta, const Bytes& plaintext) {
  provider_->ingest_content(meta, plaintext);
  plaintexts_[meta.content_id] = plaintext;
}

Bytes SimWorld::random_plaintext(size_t size) { return rng_.bytes(size); }

const Bytes& SimWorld::plaintext_of(const std::string& content_id) const {
  auto it = plaintexts_.find(content_id);
  if (it == plaintexts_.end()) throw Error("sim: unknown content " + content_id);
  return it->second;
}

OpResult<PurchaseReceipt> SimWorld::purchase(const std::string& content_id,
                                             const std::string& model, int64_t quantity,
                                             Millis expiry_ts) {
  return client_->purchase(session_, *provider_port_, content_id, model, quantity,
                           expiry_ts,
                           [this](int64_t amount) { return bank_->issue(amount); });
}

OpResult<ExecutionSummary> SimWorld::execute(const std::string& content_id,
                                             size_t distributor) {
  return client_->execute(session_, *distributor_ports_.at(distributor), content_id);
}

}  // namespace drmmesh
