// Oracles for the two server-side actors: the content provider (catalog,
// purchase protocol, payment verification) and the content distributor
// (one-shot session certificates, key decapsulation, chunked delivery).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>
#include "drmmesh/distributor.hpp"
#include "drmmesh/provider.hpp"
#include "test_fixtures.hpp"

using namespace drmmesh;
using namespace drmmesh::testing;

namespace {

const SystemParams& tp() {
  static SystemParams p = SystemParams::transparent();
  return p;
}

struct ManualClock final : Clock {
  Millis t = 1'000'000;
  Millis now() override { return t; }
};

// A provider + bank + personalized card wired to one shared PKI.
struct ShopRig {
  MiniPki pki;
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  BankAuthority bank;
  ContentProvider provider;
  Smartcard card;
  SessionToken session;

  explicit ShopRig(const SystemParams& params, uint64_t seed = 50001)
      : pki(params, seed),
        bank(params, seed + 1),
        provider(ContentProvider::Init{
            .params = params,
            .sign_key = pki.cp_key,
            .cp_cert = pki.cp,
            .root_cert = pki.root,
            .trust_pool = {pki.scp},
            .bank_pk = bank.pk(),
            .discounts = {.bp_by_min_qty = {{3, 1000}}},
            .clock = clock,
            .rng_seed = seed + 2,
            .session_ttl = 120'000,
        }),
        card(Smartcard::Init{
            .params = params,
            .sign_sk = pki.card_key.sk,
            .card_cert = pki.card,
            .provider_cert = pki.scp,
            .root_cert = pki.root,
            .pin = "1234",
            .attributes = make_attributes(pki, {2000, 3, 15}),
            .min_age_by_rating = {{"X", 18}},
            .rng_seed = seed + 3,
            .keygen = {},
        }) {
    auto r = card.verify_pin("1234");
    if (!r.ok) throw Error("fixture: pin rejected");
    session = r.value;
    provider.ingest_content(
        {.content_id = "movie-1", .title = "First Film", .rating = "", .unit_price = 500},
        str_bytes("the first film's raw bits 0123456789"));
  }

  struct Bought {
    PurchaseAuth auth;
    PurchaseGrant grant;
  };

  // Drives one complete purchase; throws on any rejection so tests read
  // linearly.  pay < 0 means "pay the quoted price".  Each purchase happens
  // one millisecond after whatever came before, as wall time would have it.
  Bought buy(const std::string& content_id, const std::string& model, int64_t qty,
             Millis expiry = 0, int64_t pay = -1) {
    clock->t += 1;
    auto open = provider.open_purchase();
    auto auth = card.begin_purchase(session, open.nonce);
    if (!auth.ok) throw Error("begin_purchase: " + auth.reason);
    int64_t amount = pay >= 0 ? pay : provider.quote(content_id, model, qty).total;
    auto res = provider.complete_purchase(request(open, auth.value, content_id, model,
                                                  qty, expiry, bank.issue(amount)));
    if (!res.ok) throw Error("complete_purchase: " + res.reason);
    auto stored =
        card.store_license(session, res.value.encrypted_license, res.value.license_signature);
    if (!stored.ok) throw Error("store_license: " + stored.reason);
    return {auth.value, res.value};
  }

  PurchaseRequest request(const PurchaseOpen& open, const PurchaseAuth& auth,
                          const std::string& content_id, const std::string& model,
                          int64_t qty, Millis expiry, PaymentToken pt) {
    return PurchaseRequest{
        .session_id = open.session_id,
        .card_cert = auth.card_cert,
        .pk_tmp = encode_pre_public_key(pki.params, auth.pk_tmp),
        .signature = auth.signature,
        .content_id = content_id,
        .model = model,
        .quantity = qty,
        .expiry_ts = expiry,
        .payment = std::move(pt),
    };
  }

  // A session certificate minted strictly after every earlier protocol step.
  Certificate session_cert(ContentDistributor& dist) {
    clock->t += 1;
    return dist.issue_session_cert();
  }

  ContentDistributor make_distributor(uint64_t seed = 60001) {
    return ContentDistributor(ContentDistributor::Init{
        .params = pki.params,
        .sign_key = pki.cd_key,
        .cd_cert = pki.cd,
        .fetch = [this](const std::string& id) { return provider.serve_encrypted_content(id); },
        .clock = clock,
        .rng_seed = seed,
        .grant_ttl = 300'000,
        .stream_ttl = 300'000,
        .chunk_size = 64 * 1024,
    });
  }

  // Client-side step: refresh the stored ciphertext and delegate it to a
  // distributor session key.
  Bytes reencrypt_for(const Bought& b, const ReEncryptionKey& rk, uint64_t seed) {
    SeededRng rng(seed);
    PreCiphertext ct = decode_pre_ciphertext(pki.params, b.grant.encrypted_ck);
    PreCiphertext fresh = pre_rerandomize_second(pki.params, ct, b.auth.pk_tmp, rng);
    return encode_pre_ciphertext(pki.params, pre_reencrypt(pki.params, fresh, rk.rk));
  }
};

Bytes pull_all(ContentDistributor& dist, const ExecutionTicket& t) {
  Bytes out;
  for (uint64_t i = 0; i < t.chunk_count; ++i) {
    auto c = dist.fetch_chunk(t.resume_token, i);
    REQUIRE(c.ok);
    CHECK(c.value.seq == i);
    CHECK(c.value.last == (i + 1 == t.chunk_count));
    if (i + 1 < t.chunk_count) CHECK(c.value.data.size() == t.chunk_size);
    out.insert(out.end(), c.value.data.begin(), c.value.data.end());
  }
  return out;
}

}  // namespace

TEST_CASE("bank tokens verify and are tamper-evident") {
  BankAuthority bank(tp(), 111);
  PaymentToken a = bank.issue(100);
  PaymentToken b = bank.issue(100);
  CHECK(a.amount == 100);
  CHECK(!a.serial.empty());
  CHECK(a.serial != b.serial);
  CHECK(bank.verify(a));
  CHECK(bank.verify(b));

  PaymentToken forged = a;
  forged.amount = 1;
  CHECK_FALSE(bank.verify(forged));
  forged = a;
  forged.serial += "x";
  CHECK_FALSE(bank.verify(forged));
  forged = a;
  forged.bank_signature = str_bytes("garbage");
  CHECK_FALSE(bank.verify(forged));

  json j = a.to_json();
  PaymentToken back = PaymentToken::from_json(j);
  CHECK(back.serial == a.serial);
  CHECK(back.amount == a.amount);
  CHECK(back.bank_signature == a.bank_signature);
  CHECK(bank.verify(back));
}

TEST_CASE("content ingestion encrypts once under a fresh key") {
  ShopRig rig(tp());
  Bytes plain = str_bytes("second film bytes, also very watchable");
  const CatalogEntry& e2 = rig.provider.ingest_content(
      {.content_id = "movie-2", .title = "Second Film", .rating = "X", .unit_price = 200},
      plain);

  // The stored blob opens under the stored key and is not the plaintext.
  CHECK(decrypt_content(e2.encrypted_content, e2.ck) == plain);
  CHECK(e2.encrypted_content != plain);

  // Fresh key per content: unlocking movie-2's blob with movie-1's key fails.
  Bytes blob1 = rig.provider.serve_encrypted_content("movie-1");
  CHECK_THROWS_AS(decrypt_content(blob1, e2.ck), CryptoError);

  // Served blob is stable and matches the stored one.
  CHECK(rig.provider.serve_encrypted_content("movie-2") == e2.encrypted_content);
  CHECK(rig.provider.serve_encrypted_content("movie-2") == e2.encrypted_content);
  CHECK_THROWS_AS(rig.provider.serve_encrypted_content("nope"), Error);

  CHECK_THROWS_AS(rig.provider.ingest_content(
                      {.content_id = "movie-2", .title = "Dup", .rating = "", .unit_price = 1},
                      plain),
                  Error);
  CHECK_THROWS_AS(rig.provider.ingest_content(
                      {.content_id = "movie-3", .title = "Empty", .rating = "", .unit_price = 1},
                      Bytes{}),
                  Error);

  auto rows = rig.provider.list_catalog();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].content_id == "movie-1");
  CHECK(rows[0].unit_price == 500);
  CHECK(rows[1].content_id == "movie-2");
  CHECK(rows[1].rating == "X");
}

TEST_CASE("purchase sessions issue fresh challenges") {
  ShopRig rig(tp());
  std::set<std::string> nonces;
  std::set<uint64_t> ids;
  for (int i = 0; i < 50; ++i) {
    auto open = rig.provider.open_purchase();
    CHECK(open.nonce.size() >= 16);
    nonces.insert(to_hex(open.nonce));
    ids.insert(open.session_id);
  }
  CHECK(nonces.size() == 50);
  CHECK(ids.size() == 50);
}

TEST_CASE("quoted prices follow the discount table exactly") {
  ShopRig rig(tp());  // unit 500, 10% off at quantity >= 3
  CHECK(rig.provider.quote("movie-1", "execute_at_most_n", 1).total == 500);
  CHECK(rig.provider.quote("movie-1", "execute_at_most_n", 2).total == 1000);
  CHECK(rig.provider.quote("movie-1", "execute_at_most_n", 3).total == 1350);
  CHECK(rig.provider.quote("movie-1", "execute_at_most_n", 4).total == 1800);
  CHECK(rig.provider.quote("movie-1", "pay_per_execute", 1).total == 500);
  CHECK(rig.provider.quote("movie-1", "execute_until", 1).total == 500);
  CHECK(rig.provider.quote("movie-1", "flatrate", 1).total == 500);

  CHECK_THROWS_AS(rig.provider.quote("nope", "flatrate", 1), Error);
  CHECK_THROWS_AS(rig.provider.quote("movie-1", "no_such_model", 1), Error);
  CHECK_THROWS_AS(rig.provider.quote("movie-1", "execute_at_most_n", 0), Error);
  CHECK_THROWS_AS(rig.provider.quote("movie-1", "pay_per_execute", 2), Error);
  CHECK_THROWS_AS(rig.provider.quote("movie-1", "flatrate", 2), Error);
}

TEST_CASE("a completed purchase puts a working license on the card") {
  ShopRig rig(tp());
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);

  auto listed = rig.card.list_content(rig.session);
  REQUIRE(listed.ok);
  CHECK(listed.value == std::vector<std::string>{"movie-1"});

  // The key ciphertext is a delegatable one addressed to the card's key.
  PreCiphertext ct = decode_pre_ciphertext(rig.pki.params, b.grant.encrypted_ck);
  CHECK(ct.kind == CiphertextKind::Second);

  // The license blob is a well-formed hybrid ciphertext.
  CHECK_NOTHROW(decode_hybrid_ciphertext(rig.pki.params, b.grant.encrypted_license));

  // Replaying a completed session is refused before any other processing.
  auto open2 = rig.provider.open_purchase();
  auto auth2 = rig.card.begin_purchase(rig.session, open2.nonce);
  REQUIRE(auth2.ok);
  PurchaseRequest req = rig.request(open2, auth2.value, "movie-1", "flatrate", 1, 0,
                                    rig.bank.issue(500));
  REQUIRE(rig.provider.complete_purchase(req).ok);
  req.payment = rig.bank.issue(500);
  auto replay = rig.provider.complete_purchase(req);
  CHECK_FALSE(replay.ok);
  CHECK(replay.reason == "session_replayed");
}

TEST_CASE("the provider refuses bad purchase attempts") {
  ShopRig rig(tp());

  auto attempt = [&](auto mutate) {
    auto open = rig.provider.open_purchase();
    auto auth = rig.card.begin_purchase(rig.session, open.nonce);
    REQUIRE(auth.ok);
    PurchaseRequest req = rig.request(open, auth.value, "movie-1", "execute_at_most_n", 3,
                                      0, rig.bank.issue(1350));
    mutate(req, open, auth.value);
    return rig.provider.complete_purchase(req);
  };

  SUBCASE("unknown session") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.session_id = 424242; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "unknown_session");
  }
  SUBCASE("unknown content") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.content_id = "nope"; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "unknown_content");
  }
  SUBCASE("unpriceable terms") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.model = "bogus"; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "bad_terms");
    r = attempt([](PurchaseRequest& q, auto&, auto&) { q.quantity = 0; });
    CHECK(r.reason == "bad_terms");
    r = attempt([](PurchaseRequest& q, auto&, auto&) {
      q.model = "pay_per_execute";
      q.quantity = 2;
    });
    CHECK(r.reason == "bad_terms");
    r = attempt([&](PurchaseRequest& q, auto&, auto&) {
      q.model = "execute_until";
      q.quantity = 1;
      q.expiry_ts = rig.clock->t;  // already over at the instant of purchase
      q.payment = rig.bank.issue(500);
    });
    CHECK(r.reason == "bad_terms");
  }
  SUBCASE("card certificate from a foreign authority") {
    MiniPki other(tp(), 777);
    auto r = attempt([&](PurchaseRequest& q, auto&, auto&) { q.card_cert = other.card; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "bad_card_chain");
  }
  SUBCASE("certificate that is not a card certificate") {
    auto r = attempt([&](PurchaseRequest& q, auto&, auto&) { q.card_cert = rig.pki.cp; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "bad_card_chain");
  }
  SUBCASE("signature over the wrong nonce") {
    auto other_open = rig.provider.open_purchase();
    auto other_auth = rig.card.begin_purchase(rig.session, other_open.nonce);
    REQUIRE(other_auth.ok);
    auto r = attempt([&](PurchaseRequest& q, auto&, auto&) {
      q.pk_tmp = encode_pre_public_key(rig.pki.params, other_auth.value.pk_tmp);
      q.signature = other_auth.value.signature;
    });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "bad_signature");
  }
  SUBCASE("tampered temporary key") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.pk_tmp.back() ^= 1; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "bad_signature");
  }
  SUBCASE("garbage temporary key") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.pk_tmp = str_bytes("zz"); });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "malformed_request");
  }
  SUBCASE("forged payment") {
    auto r = attempt([](PurchaseRequest& q, auto&, auto&) { q.payment.bank_signature.back() ^= 1; });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "payment_invalid");
  }
  SUBCASE("wrong amount") {
    auto r = attempt([&](PurchaseRequest& q, auto&, auto&) { q.payment = rig.bank.issue(1349); });
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "wrong_amount");
  }
  SUBCASE("double-spent token") {
    PaymentToken pt = rig.bank.issue(1350);
    auto first = attempt([&](PurchaseRequest& q, auto&, auto&) { q.payment = pt; });
    REQUIRE(first.ok);
    auto second = attempt([&](PurchaseRequest& q, auto&, auto&) { q.payment = pt; });
    CHECK_FALSE(second.ok);
    CHECK(second.reason == "payment_double_spent");
  }
}

TEST_CASE("license issuance timestamps strictly increase") {
  ShopRig rig(tp());

  SUBCASE("across purchases, as witnessed by the card's ratchet") {
    // The card refuses any license whose timestamp does not beat its own
    // ratchet, so consecutive accepted purchases prove strict increase.
    Millis before = rig.card.card_ts();
    for (int i = 0; i < 3; ++i) {
      rig.buy("movie-1", "execute_at_most_n", 3);
      CHECK(rig.card.card_ts() > before);
      before = rig.card.card_ts();
    }
  }

  SUBCASE("even when two purchases land on the same millisecond") {
    Millis frozen = rig.clock->t;
    for (int i = 0; i < 2; ++i) {
      auto open = rig.provider.open_purchase();
      auto auth = rig.card.begin_purchase(rig.session, open.nonce);
      REQUIRE(auth.ok);
      auto res = rig.provider.complete_purchase(rig.request(
          open, auth.value, "movie-1", "flatrate", 1, 0, rig.bank.issue(500)));
      REQUIRE(res.ok);
      CHECK(rig.clock->t == frozen);
      CHECK(rig.provider.debug_snapshot()["last_license_ts"].get<Millis>() == frozen + i);
    }
    CHECK(rig.provider.debug_snapshot()["licenses_issued"].get<int64_t>() == 2);
  }
}

TEST_CASE("purchase sessions expire") {
  ShopRig rig(tp());

  auto open_then_complete_after = [&](Millis dt) {
    auto open = rig.provider.open_purchase();
    auto auth = rig.card.begin_purchase(rig.session, open.nonce);
    REQUIRE(auth.ok);
    rig.clock->t += dt;
    return rig.provider.complete_purchase(rig.request(open, auth.value, "movie-1",
                                                      "flatrate", 1, 0,
                                                      rig.bank.issue(500)));
  };

  auto late = open_then_complete_after(120'000);
  CHECK_FALSE(late.ok);
  CHECK(late.reason == "session_expired");

  auto just_in_time = open_then_complete_after(119'999);
  CHECK(just_in_time.ok);
}

TEST_CASE("payment double-spend stays atomic under contention") {
  ShopRig rig(tp());
  PaymentToken pt = rig.bank.issue(500);

  struct Prepared {
    PurchaseOpen open;
    PurchaseAuth auth;
  };
  std::vector<Prepared> prepared;
  for (int i = 0; i < 8; ++i) {
    auto open = rig.provider.open_purchase();
    auto auth = rig.card.begin_purchase(rig.session, open.nonce);
    REQUIRE(auth.ok);
    prepared.push_back({open, auth.value});
  }

  std::atomic<int> successes{0};
  std::atomic<int> double_spends{0};
  std::atomic<int> other{0};
  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] {
      auto res = rig.provider.complete_purchase(
          rig.request(prepared[i].open, prepared[i].auth, "movie-1", "flatrate", 1, 0, pt));
      if (res.ok)
        successes++;
      else if (res.reason == "payment_double_spent")
        double_spends++;
      else
        other++;
    });
  }
  for (auto& w : workers) w.join();
  CHECK(successes.load() == 1);
  CHECK(double_spends.load() == 7);
  CHECK(other.load() == 0);
}

TEST_CASE("session certificates are unique, fresh, and card-acceptable") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();

  std::set<std::string> ids;
  std::set<std::string> keys;
  Millis last_ts = 0;
  for (int i = 0; i < 5; ++i) {
    Certificate c = dist.issue_session_cert();
    CHECK(c.role == CertRole::content_distributor_ephemeral);
    CHECK(c.issuer_id == rig.pki.cd.cert_id);
    CHECK(!c.pre_pubkey.empty());
    CHECK(c.ts > last_ts);
    last_ts = c.ts;
    ids.insert(c.cert_id);
    keys.insert(to_hex(c.pre_pubkey));

    CertStore pool;
    pool.add(rig.pki.root);
    pool.add(rig.pki.cd);
    pool.add(c);
    std::string why;
    CHECK(validate_chain(rig.pki.params, c, pool, rig.pki.root, &why));
  }
  CHECK(ids.size() == 5);
  CHECK(keys.size() == 5);

  // The card takes the issued certificate at face value after a purchase.
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);
  Certificate c = rig.session_cert(dist);
  auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
  REQUIRE(g.ok);
  CHECK(g.value.pk_fingerprint == b.auth.fingerprint);
}

TEST_CASE("an execution streams the exact ingested plaintext") {
  ShopRig rig(tp());
  SeededRng content_rng(8123);
  Bytes big = content_rng.bytes(150'000);
  rig.provider.ingest_content(
      {.content_id = "movie-big", .title = "Long Film", .rating = "", .unit_price = 100},
      big);

  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-big", "execute_at_most_n", 3);
  Certificate c = rig.session_cert(dist);
  auto g = rig.card.authorize_execution(rig.session, "movie-big", c, {rig.pki.cd});
  REQUIRE(g.ok);

  Bytes enc = rig.reencrypt_for(b, g.value.rk, 9911);
  auto res = dist.execute_content(c.cert_id, enc, "movie-big");
  REQUIRE(res.ok);
  const ExecutionTicket& t = res.value;
  CHECK(t.content_size == big.size());
  CHECK(t.chunk_size == 64 * 1024);
  CHECK(t.chunk_count == 3);  // 65536 + 65536 + 18928

  Bytes streamed = pull_all(dist, t);
  CHECK(streamed == big);

  // Chunks are idempotent so an interrupted pull can resume.
  auto again = dist.fetch_chunk(t.resume_token, 0);
  REQUIRE(again.ok);
  CHECK(std::equal(again.value.data.begin(), again.value.data.end(), streamed.begin()));

  auto bad_seq = dist.fetch_chunk(t.resume_token, t.chunk_count);
  CHECK_FALSE(bad_seq.ok);
  CHECK(bad_seq.reason == "bad_chunk_seq");
  auto bad_token = dist.fetch_chunk("nope", 0);
  CHECK_FALSE(bad_token.ok);
  CHECK(bad_token.reason == "unknown_stream");
}

TEST_CASE("a session certificate never pays for two executions") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);
  Certificate c = rig.session_cert(dist);
  auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
  REQUIRE(g.ok);

  Bytes enc = rig.reencrypt_for(b, g.value.rk, 9912);
  REQUIRE(dist.execute_content(c.cert_id, enc, "movie-1").ok);

  // Same certificate, same ciphertext: refused without touching content.
  auto replay = dist.execute_content(c.cert_id, enc, "movie-1");
  CHECK_FALSE(replay.ok);
  CHECK(replay.reason == "grant_spent");

  // Same certificate, brand-new delegation: still refused.
  auto b2 = rig.buy("movie-1", "execute_at_most_n", 3);
  Certificate c2 = rig.session_cert(dist);
  auto g2 = rig.card.authorize_execution(rig.session, "movie-1", c2, {rig.pki.cd});
  REQUIRE(g2.ok);
  auto cross = dist.execute_content(c.cert_id, rig.reencrypt_for(b2, g2.value.rk, 9913),
                                    "movie-1");
  CHECK_FALSE(cross.ok);
  CHECK(cross.reason == "grant_spent");
}

TEST_CASE("a delegation toward one session cannot unlock another session") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);

  Certificate ca = rig.session_cert(dist);
  Certificate cb = rig.session_cert(dist);
  auto g = rig.card.authorize_execution(rig.session, "movie-1", ca, {rig.pki.cd});
  REQUIRE(g.ok);

  // Delegated to session A but redeemed against session B: the wrong secret
  // yields a wrong content key, and authenticated decryption tears it down.
  Bytes enc = rig.reencrypt_for(b, g.value.rk, 9914);
  auto wrong = dist.execute_content(cb.cert_id, enc, "movie-1");
  CHECK_FALSE(wrong.ok);
  CHECK(wrong.reason == "no_valid_license");

  // The failed attempt still consumed session B.
  auto after = dist.execute_content(cb.cert_id, enc, "movie-1");
  CHECK_FALSE(after.ok);
  CHECK(after.reason == "grant_spent");

  // Session A remains redeemable with its own delegation.
  CHECK(dist.execute_content(ca.cert_id, enc, "movie-1").ok);
}

TEST_CASE("grant bookkeeping: unknown, expired, malformed, missing content") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-1", "execute_at_most_n", 10);

  auto unknown = dist.execute_content("no-such-cert", str_bytes("x"), "movie-1");
  CHECK_FALSE(unknown.ok);
  CHECK(unknown.reason == "unknown_grant");

  SUBCASE("expiry boundary") {
    Certificate c = rig.session_cert(dist);
    auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
    REQUIRE(g.ok);
    Bytes enc = rig.reencrypt_for(b, g.value.rk, 9915);
    rig.clock->t += 300'000;
    auto late = dist.execute_content(c.cert_id, enc, "movie-1");
    CHECK_FALSE(late.ok);
    CHECK(late.reason == "grant_expired");
  }

  SUBCASE("unused certificate just inside its lifetime still redeems") {
    Certificate c = rig.session_cert(dist);
    auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
    REQUIRE(g.ok);
    Bytes enc = rig.reencrypt_for(b, g.value.rk, 9916);
    rig.clock->t += 299'999;
    CHECK(dist.execute_content(c.cert_id, enc, "movie-1").ok);
  }

  SUBCASE("harmless failures do not consume the certificate") {
    Certificate c = rig.session_cert(dist);
    auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
    REQUIRE(g.ok);
    Bytes enc = rig.reencrypt_for(b, g.value.rk, 9917);

    auto missing = dist.execute_content(c.cert_id, enc, "no-such-content");
    CHECK_FALSE(missing.ok);
    CHECK(missing.reason == "unknown_content");

    auto garbage = dist.execute_content(c.cert_id, str_bytes("not a ciphertext"), "movie-1");
    CHECK_FALSE(garbage.ok);
    CHECK(garbage.reason == "malformed_ciphertext");

    // A stored (still delegatable) ciphertext is not redeemable directly.
    auto undelegated = dist.execute_content(c.cert_id, b.grant.encrypted_ck, "movie-1");
    CHECK_FALSE(undelegated.ok);
    CHECK(undelegated.reason == "malformed_ciphertext");

    // None of the above burned the certificate.
    CHECK(dist.execute_content(c.cert_id, enc, "movie-1").ok);
  }

  SUBCASE("stream windows close") {
    Certificate c = rig.session_cert(dist);
    auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
    REQUIRE(g.ok);
    auto res = dist.execute_content(c.cert_id, rig.reencrypt_for(b, g.value.rk, 9918),
                                    "movie-1");
    REQUIRE(res.ok);
    rig.clock->t += 300'000;
    auto late = dist.fetch_chunk(res.value.resume_token, 0);
    CHECK_FALSE(late.ok);
    CHECK(late.reason == "stream_expired");
  }
}

TEST_CASE("one-time redemption stays atomic under contention") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);
  Certificate c = rig.session_cert(dist);
  auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
  REQUIRE(g.ok);
  Bytes enc = rig.reencrypt_for(b, g.value.rk, 9919);

  std::atomic<int> successes{0};
  std::atomic<int> spent{0};
  std::atomic<int> other{0};
  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&] {
      auto res = dist.execute_content(c.cert_id, enc, "movie-1");
      if (res.ok)
        successes++;
      else if (res.reason == "grant_spent")
        spent++;
      else
        other++;
    });
  }
  for (auto& w : workers) w.join();
  CHECK(successes.load() == 1);
  CHECK(spent.load() == 7);
  CHECK(other.load() == 0);
}

TEST_CASE("delegations toward different sessions share no ciphertext material") {
  ShopRig rig(tp());
  ContentDistributor dist = rig.make_distributor();
  auto b = rig.buy("movie-1", "execute_at_most_n", 3);

  Certificate c1 = rig.session_cert(dist);
  auto g1 = rig.card.authorize_execution(rig.session, "movie-1", c1, {rig.pki.cd});
  REQUIRE(g1.ok);
  Certificate c2 = rig.session_cert(dist);
  auto g2 = rig.card.authorize_execution(rig.session, "movie-1", c2, {rig.pki.cd});
  REQUIRE(g2.ok);

  CHECK(rig.pki.params.encode_element(g1.value.rk.rk) !=
        rig.pki.params.encode_element(g2.value.rk.rk));

  Bytes e1 = rig.reencrypt_for(b, g1.value.rk, 9920);
  Bytes e2 = rig.reencrypt_for(b, g2.value.rk, 9921);
  PreCiphertext d1 = decode_pre_ciphertext(rig.pki.params, e1);
  PreCiphertext d2 = decode_pre_ciphertext(rig.pki.params, e2);
  CHECK(rig.pki.params.encode_element(d1.alpha) != rig.pki.params.encode_element(d2.alpha));
  CHECK(rig.pki.params.encode_element(d1.beta) != rig.pki.params.encode_element(d2.beta));

  // Both really decrypt (two of the three allowed executions).
  CHECK(dist.execute_content(c1.cert_id, e1, "movie-1").ok);
  CHECK(dist.execute_content(c2.cert_id, e2, "movie-1").ok);
}

TEST_CASE("the distributor fetches each protected blob once") {
  ShopRig rig(tp());
  std::atomic<int> fetches{0};
  ContentDistributor dist(ContentDistributor::Init{
      .params = rig.pki.params,
      .sign_key = rig.pki.cd_key,
      .cd_cert = rig.pki.cd,
      .fetch =
          [&](const std::string& id) {
            fetches++;
            return rig.provider.serve_encrypted_content(id);
          },
      .clock = rig.clock,
      .rng_seed = 60002,
      .grant_ttl = 300'000,
      .stream_ttl = 300'000,
      .chunk_size = 64 * 1024,
  });

  auto b = rig.buy("movie-1", "execute_at_most_n", 3);
  for (int i = 0; i < 2; ++i) {
    Certificate c = rig.session_cert(dist);
    auto g = rig.card.authorize_execution(rig.session, "movie-1", c, {rig.pki.cd});
    REQUIRE(g.ok);
    REQUIRE(dist.execute_content(c.cert_id, rig.reencrypt_for(b, g.value.rk, 9930 + i),
                                 "movie-1")
                .ok);
  }
  CHECK(fetches.load() == 1);
}
