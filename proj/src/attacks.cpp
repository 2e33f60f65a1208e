#include "drmmesh/attacks.hpp"

#include <sstream>

namespace drmmesh {

namespace {

SimWorld::Options scenario_options(const SystemParams& params, uint64_t seed,
                                   const std::string& label) {
  SimWorld::Options opt;
  opt.params = params;
  opt.seed = derive_seed(seed, label);
  opt.distributors = 1;
  return opt;
}

std::optional<Envelope> last_envelope_of(const Transcript& t, MessageType type) {
  const auto& entries = t.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it)
    if (it->env.message_type == type) return it->env;
  return std::nullopt;
}

// Collects step verdicts; the attack counts as rejected only if every
// illegitimate step was refused for the right reason and every liveness
// probe succeeded.
class Verdict {
 public:
  void refused(const std::string& step, bool ok, const std::string& reason,
               const std::string& want) {
    bool good = !ok && reason == want;
    all_ &= good;
    note(step + (good ? ": refused (" + reason + ")"
                      : ok ? ": ACCEPTED" : ": wrong refusal (" + reason + ")"));
  }
  void alive(const std::string& step, bool ok, const std::string& reason = "") {
    all_ &= ok;
    note(step + (ok ? ": ok" : ": BROKEN (" + reason + ")"));
  }
  void fail(const std::string& why) {
    all_ = false;
    note(why);
  }
  bool all() const { return all_; }
  std::string detail() const { return detail_; }

 private:
  void note(const std::string& line) {
    if (!detail_.empty()) detail_ += "; ";
    detail_ += line;
  }
  bool all_ = true;
  std::string detail_;
};

// --- scenario bodies -------------------------------------------------------

// A distributor session certificate that predates the card's ratcheted
// clock must be refused: old grants cannot be warmed up later.
AttackOutcome stale_cd_cert(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "stale-cd-cert"));
  Verdict v;

  auto bought = w.purchase("movie-1", "execute_at_most_n", 3);
  v.alive("setup purchase", bought.ok, bought.reason);

  Certificate early = w.distributor(0).issue_session_cert();
  auto ratchet = w.execute("movie-1");  // fresh cert moves the card clock past `early`
  v.alive("setup execution", ratchet.ok, ratchet.reason);

  auto replay = w.card().authorize_execution(w.session(), "movie-1", early,
                                             {w.distributor(0).cert()});
  v.refused("stale certificate", replay.ok, replay.reason, "stale_cert");

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"stale-cd-cert",
          "present an outdated distributor session certificate to the card",
          v.all(), v.detail()};
}

// A session certificate is single-use at the card: its id is remembered
// and a second authorization against it must be refused.
AttackOutcome reused_cert_id(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "reused-cert-id"));
  Verdict v;

  auto bought = w.purchase("movie-1", "execute_at_most_n", 3);
  v.alive("setup purchase", bought.ok, bought.reason);

  Certificate cert = w.distributor(0).issue_session_cert();
  auto first = w.card().authorize_execution(w.session(), "movie-1", cert,
                                            {w.distributor(0).cert()});
  v.alive("first authorization", first.ok, first.reason);

  auto second = w.card().authorize_execution(w.session(), "movie-1", cert,
                                             {w.distributor(0).cert()});
  v.refused("repeated certificate id", second.ok, second.reason, "replayed_cert_id");

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"reused-cert-id",
          "replay one distributor session certificate for a second authorization",
          v.all(), v.detail()};
}

// Re-encrypted key material captured on the wire buys nothing twice: the
// same grant is spent, and a fresh grant uses a different session key.
AttackOutcome rk_reuse(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "rk-reuse"));
  Verdict v;

  auto bought = w.purchase("movie-1", "execute_at_most_n", 3);
  v.alive("setup purchase", bought.ok, bought.reason);
  auto ran = w.execute("movie-1");
  v.alive("setup execution", ran.ok, ran.reason);

  auto captured = last_envelope_of(w.transcript(), MessageType::execute_request);
  if (!captured) {
    v.fail("no execution request observed on the wire");
    return {"rk-reuse", "replay captured re-encrypted key material", false,
            v.detail()};
  }
  std::string cert_id = captured->body.at("cert_id").get<std::string>();
  Bytes rk_ct = b64url_decode(captured->body.at("reencrypted_ck").get<std::string>());

  auto same_grant = w.distributor(0).execute_content(cert_id, rk_ct, "movie-1");
  v.refused("replay against the spent grant", same_grant.ok, same_grant.reason,
            "grant_spent");

  Certificate fresh = w.distributor(0).issue_session_cert();
  auto cross_grant = w.distributor(0).execute_content(fresh.cert_id, rk_ct, "movie-1");
  v.refused("replay against a fresh grant", cross_grant.ok, cross_grant.reason,
            "no_valid_license");

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"rk-reuse",
          "replay a captured re-encrypted content key for extra executions",
          v.all(), v.detail()};
}

// Redelivering a license the card has already accepted must be refused by
// its id, even though the card can still decrypt the blob.
AttackOutcome license_replay(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "license-replay"));
  Verdict v;

  auto bought = w.purchase("movie-1", "execute_at_most_n", 2);
  v.alive("setup purchase", bought.ok, bought.reason);

  auto grant =
      last_envelope_of(w.transcript(), MessageType::purchase_complete_response);
  if (!grant) {
    v.fail("no purchase grant observed on the wire");
    return {"license-replay", "redeliver an already-stored license", false,
            v.detail()};
  }
  Bytes lic = b64url_decode(grant->body.at("encrypted_license").get<std::string>());
  Bytes sig = b64url_decode(grant->body.at("license_signature").get<std::string>());

  auto replay = w.card().store_license(w.session(), lic, sig);
  v.refused("license redelivery", replay.ok, replay.reason, "replayed_license_id");

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"license-replay",
          "redeliver a captured license grant to the card a second time", v.all(),
          v.detail()};
}

// A payment token's serial is spent exactly once, so paying for a second
// purchase with a captured token must be refused.
AttackOutcome overspend_pt(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "overspend-pt"));
  Verdict v;

  PaymentToken captured;
  PaymentFn capture_pay = [&](int64_t amount) {
    captured = w.bank().issue(amount);
    return captured;
  };
  auto first = w.client().purchase(w.session(), w.provider_port(), "movie-1",
                                   "execute_at_most_n", 1, 0, capture_pay);
  v.alive("setup purchase", first.ok, first.reason);

  PaymentFn replay_pay = [&](int64_t) { return captured; };
  auto second = w.client().purchase(w.session(), w.provider_port(), "movie-1",
                                    "execute_at_most_n", 1, 0, replay_pay);
  v.refused("double-spent payment token", second.ok, second.reason,
            "provider:payment_double_spent");

  // The counter-probe: an honest rebuy with a freshly issued token is
  // clean, so the refusal above is about the serial, not the buyer.
  auto honest = w.purchase("movie-1", "execute_at_most_n", 1);
  v.alive("honest rebuy with a fresh token", honest.ok, honest.reason);

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"overspend-pt", "pay for a second purchase with an already-spent token",
          v.all(), v.detail()};
}

// Certificates assembled outside the pinned trust tree: a parallel root,
// and a session certificate falsely claiming an honest issuer.
AttackOutcome fake_cd_cert(const SystemParams& params, uint64_t seed) {
  SimWorld w(scenario_options(params, seed, "fake-cd-cert"));
  Verdict v;

  auto bought = w.purchase("movie-1", "execute_at_most_n", 3);
  v.alive("setup purchase", bought.ok, bought.reason);

  SeededRng evil_rng(derive_seed(seed, "fake-cd-cert-keys"));
  SigKeyPair evil_root = sig_keygen(params, evil_rng);
  SigKeyPair evil_cd = sig_keygen(params, evil_rng);
  SigKeyPair evil_session = sig_keygen(params, evil_rng);
  PreKeyPair evil_pre = pre_keygen(params, evil_rng);
  Millis future = w.card().card_ts() + 10'000;

  Certificate parent;
  parent.cert_id = "evil-cdn";
  parent.role = CertRole::content_distributor;
  parent.subject = "evil-cdn";
  parent.ts = future;
  parent.sig_pubkey = params.encode_element(evil_cd.pk);
  sign_certificate(params, evil_root.sk, "root-ca", parent);

  Certificate forged;
  forged.cert_id = "evil-session-1";
  forged.role = CertRole::content_distributor_ephemeral;
  forged.subject = "evil-cdn";
  forged.ts = future + 1;
  forged.sig_pubkey = params.encode_element(evil_session.pk);
  forged.pre_pubkey = encode_pre_public_key(params, evil_pre.pub);
  sign_certificate(params, evil_cd.sk, "evil-cdn", forged);

  // Leg one: a chain rooted in the attacker's own authority.
  auto own_root = w.card().authorize_execution(w.session(), "movie-1", forged, {parent});
  v.refused("parallel trust tree", own_root.ok, own_root.reason, "not_a_distributor");

  // Leg two: the same forged certificate claiming the honest distributor
  // as issuer (signature cannot verify against the honest key).
  Certificate liar = forged;
  liar.cert_id = "evil-session-2";
  sign_certificate(params, evil_cd.sk, w.distributor(0).cert().cert_id, liar);
  auto claimed = w.card().authorize_execution(w.session(), "movie-1", liar,
                                              {w.distributor(0).cert()});
  v.refused("forged issuer claim", claimed.ok, claimed.reason, "not_a_distributor");

  auto after = w.execute("movie-1");
  v.alive("later legitimate execution", after.ok, after.reason);

  return {"fake-cd-cert",
          "authorize against distributor certificates outside the trust tree",
          v.all(), v.detail()};
}

}  // namespace

std::vector<std::string> attack_names() {
  return {"stale-cd-cert", "reused-cert-id", "rk-reuse",
          "license-replay", "overspend-pt", "fake-cd-cert"};
}

AttackOutcome run_attack(const std::string& name, const SystemParams& params,
                         uint64_t seed) {
  if (name == "stale-cd-cert") return stale_cd_cert(params, seed);
  if (name == "reused-cert-id") return reused_cert_id(params, seed);
  if (name == "rk-reuse") return rk_reuse(params, seed);
  if (name == "license-replay") return license_replay(params, seed);
  if (name == "overspend-pt") return overspend_pt(params, seed);
  if (name == "fake-cd-cert") return fake_cd_cert(params, seed);
  throw Error("unknown attack scenario: " + name);
}

std::vector<AttackOutcome> run_attack_suite(const SystemParams& params, uint64_t seed) {
  std::vector<AttackOutcome> out;
  for (const std::string& name : attack_names())
    out.push_back(run_attack(name, params, seed));
  return out;
}

std::vector<MatrixRow> run_protocol_matrix(const SystemParams& params, uint64_t seed) {
  std::vector<MatrixRow> rows;
  auto row = [&rows](const std::string& name, bool pass, const std::string& detail) {
    rows.push_back({name, pass, detail});
  };

  {
    SimWorld::Options opt;
    opt.params = params;
    opt.seed = derive_seed(seed, "matrix-main");
    SimWorld w(std::move(opt));

    auto bought = w.purchase("movie-1", "execute_at_most_n", 3);
    row("purchase-completes", bought.ok && bought.value.paid == 1350,
        bought.ok ? "paid " + std::to_string(bought.value.paid) : bought.reason);

    Bytes want = sha256(w.plaintext_of("movie-1"));
    auto near = w.execute("movie-1", 0);
    row("execution-round-trips", near.ok && near.value.digest == want,
        near.ok ? "digest match" : near.reason);

    auto far = w.execute("movie-1", 1);
    row("roaming-across-distributors", far.ok && far.value.digest == want,
        far.ok ? "digest match" : far.reason);

    auto third = w.execute("movie-1", 0);
    auto spent = w.execute("movie-1", 1);
    row("usage-cap-enforced",
        third.ok && !spent.ok && spent.reason == "card:terms_exhausted",
        spent.ok ? "over-cap execution accepted" : spent.reason);

    PaymentFn shorted = [&w](int64_t amount) { return w.bank().issue(amount - 1); };
    auto under = w.client().purchase(w.session(), w.provider_port(), "movie-2",
                                     "execute_at_most_n", 1, 0, shorted);
    row("underpayment-refused", !under.ok && under.reason == "provider:wrong_amount",
        under.ok ? "underpayment accepted" : under.reason);

    auto ghost = w.purchase("ghost", "execute_at_most_n", 1);
    row("unknown-content-refused",
        !ghost.ok && ghost.reason == "client:unknown_content",
        ghost.ok ? "phantom purchase accepted" : ghost.reason);
  }

  {
    SimWorld::Options opt;
    opt.params = params;
    opt.seed = derive_seed(seed, "matrix-minor");
    opt.holder_dob = {2010, 6, 1};
    opt.distributors = 1;
    SimWorld minor(std::move(opt));
    auto rated = minor.purchase("movie-x", "execute_at_most_n", 1);
    row("minor-blocked-from-rated-content",
        !rated.ok && rated.reason == "card:category_denied",
        rated.ok ? "rated purchase accepted" : rated.reason);
  }

  for (const AttackOutcome& a : run_attack_suite(params, seed))
    row("attack-" + a.name + "-rejected", a.rejected, a.detail);

  return rows;
}

}  // namespace drmmesh
