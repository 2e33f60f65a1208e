#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drmmesh/provider.hpp"
#include "drmmesh/wire.hpp"
#include "test_fixtures.hpp"

using namespace drmmesh;
using namespace drmmesh::testing;

namespace {

Envelope make_env(MessageType t, std::string session_id, json body) {
  Envelope env;
  env.message_type = t;
  env.session_id = std::move(session_id);
  env.body = std::move(body);
  return env;
}

json minimal_body(MessageType t, RandomSource& rng) {
  auto b64 = [&](size_t n) { return b64url_encode(rng.bytes(n)); };
  switch (t) {
    case MessageType::purchase_open:
    case MessageType::cert_request:
      return json::object();
    case MessageType::purchase_challenge:
      return {{"nonce", b64(32)}};
    case MessageType::purchase_complete_request:
      return {{"card_cert", json{{"cert_id", to_hex(rng.bytes(4))}}},
              {"content_id", to_hex(rng.bytes(6))},
              {"expiry_ts", static_cast<int64_t>(rng.u64() % 1000000)},
              {"model", "execute_at_most_n"},
              {"payment", json{{"serial", to_hex(rng.bytes(16))}, {"amount", 500}}},
              {"pk_tmp", b64(24)},
              {"quantity", static_cast<int64_t>(rng.u64() % 9 + 1)},
              {"signature", b64(20)}};
    case MessageType::purchase_complete_response:
      return {{"encrypted_ck", b64(30)},
              {"encrypted_license", b64(60)},
              {"license_signature", b64(20)}};
    case MessageType::cert_response:
      return {{"cert", json{{"cert_id", to_hex(rng.bytes(8))}}}};
    case MessageType::execute_request:
      return {{"cert_id", to_hex(rng.bytes(16))},
              {"content_id", to_hex(rng.bytes(6))},
              {"reencrypted_ck", b64(30)}};
    case MessageType::stream_chunk:
      return {{"data", b64(40)},
              {"last", (rng.u64() & 1) == 1},
              {"seq", static_cast<int64_t>(rng.u64() % 100)}};
    case MessageType::error:
      return {{"reason", "unknown_session"}};
    case MessageType::card_command:
      return {{"op", "verify_pin"}, {"pin", to_hex(rng.bytes(4))}};
  }
  return json::object();
}

Bytes ascii(const std::string& s) { return str_bytes(s); }

// A secret drawn from letters only, so neither digits nor JSON structure
// can break the leaked run into deniable fragments.
std::string letter_secret(RandomSource& rng, size_t n) {
  std::string s;
  for (size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('g' + rng.u64() % 20));
  return s;
}

size_t total_findings(const LinkageReport& r) {
  return r.expected_static.size() + r.expected_numeric.size() + r.unexpected.size();
}

}  // namespace

TEST_CASE("message type names round-trip") {
  for (int i = 0; i < 10; ++i) {
    auto t = static_cast<MessageType>(i);
    CHECK(message_type_from_name(message_type_name(t)) == t);
  }
  CHECK_THROWS_AS(message_type_from_name("purchase"), CodecError);
  CHECK_THROWS_AS(message_type_from_name(""), CodecError);
}

TEST_CASE("envelope codec round-trips and is canonical") {
  SeededRng rng(41001);
  for (int i = 0; i < 10; ++i) {
    auto t = static_cast<MessageType>(i);
    Envelope env = make_env(t, "s-" + std::to_string(i), minimal_body(t, rng));
    Bytes enc = encode_envelope(env);
    CHECK(decode_envelope(enc) == env);
    CHECK(encode_envelope(env) == enc);  // stable bytes
    Envelope via_frame = unframe_envelope(frame_envelope(env));
    CHECK(via_frame == env);
  }

  // Key insertion order cannot influence the canonical bytes.
  json a;
  a["seq"] = 0;
  a["last"] = true;
  a["data"] = b64url_encode(ascii("xyz"));
  json b;
  b["data"] = b64url_encode(ascii("xyz"));
  b["last"] = true;
  b["seq"] = 0;
  CHECK(encode_envelope(make_env(MessageType::stream_chunk, "s", a)) ==
        encode_envelope(make_env(MessageType::stream_chunk, "s", b)));
}

TEST_CASE("envelope codec rejects malformed input") {
  SeededRng rng(41002);
  Envelope good = make_env(MessageType::purchase_challenge, "s1",
                           minimal_body(MessageType::purchase_challenge, rng));
  json base = envelope_to_json(good);

  auto reject = [&](json j) {
    CHECK_THROWS_AS(envelope_from_json(j), CodecError);
  };

  SUBCASE("version must match") {
    json j = base;
    j["protocol_version"] = 2;
    reject(j);
    j["protocol_version"] = 0;
    reject(j);
    j["protocol_version"] = "1";
    reject(j);
  }
  SUBCASE("unknown message type") {
    json j = base;
    j["message_type"] = "purchase_finalize";
    reject(j);
  }
  SUBCASE("missing and extra envelope keys") {
    json j = base;
    j.erase("session_id");
    reject(j);
    j = base;
    j["extra"] = 1;
    reject(j);
  }
  SUBCASE("body field count is exact") {
    json j = base;
    j["body"] = json::object();  // nonce missing
    reject(j);
    j = base;
    j["body"]["more"] = 1;  // extra field
    reject(j);
  }
  SUBCASE("body field types are strict") {
    json j = base;
    j["body"]["nonce"] = 7;
    reject(j);
    j["body"]["nonce"] = "!!!not-base64url!!!";
    reject(j);

    Envelope chunk = make_env(MessageType::stream_chunk, "s",
                              minimal_body(MessageType::stream_chunk, rng));
    json c = envelope_to_json(chunk);
    c["body"]["seq"] = 1.5;
    reject(c);
    c = envelope_to_json(chunk);
    c["body"]["last"] = 1;
    reject(c);
  }
  SUBCASE("body and envelope must be objects") {
    json j = base;
    j["body"] = 3;
    reject(j);
    CHECK_THROWS_AS(decode_envelope(ascii("[]")), CodecError);
    CHECK_THROWS_AS(decode_envelope(ascii("{nope")), CodecError);
  }
  SUBCASE("encoding an invalid envelope throws too") {
    Envelope bad = make_env(MessageType::purchase_challenge, "s", json::object());
    CHECK_THROWS_AS(encode_envelope(bad), CodecError);
  }
  SUBCASE("frames validate their length prefix") {
    Bytes frame = frame_envelope(good);
    Bytes chopped(frame.begin(), frame.end() - 1);
    CHECK_THROWS_AS(unframe_envelope(chopped), CodecError);
    Bytes lying = frame;
    lying[3] ^= 0x01;  // length word no longer matches the payload
    CHECK_THROWS_AS(unframe_envelope(lying), CodecError);
  }
}

TEST_CASE("envelope encoding is injective over randomized valid messages") {
  SeededRng rng(41003);
  std::map<std::string, Envelope> by_encoding;
  int collisions_checked = 0;
  for (int i = 0; i < 600; ++i) {
    auto t = static_cast<MessageType>(rng.u64() % 10);
    Envelope env = make_env(t, to_hex(rng.bytes(4)), minimal_body(t, rng));
    Bytes enc = encode_envelope(env);
    CHECK(decode_envelope(enc) == env);
    auto [it, inserted] = by_encoding.emplace(bytes_str(enc), env);
    if (!inserted) {
      CHECK(it->second == env);  // same bytes must mean same message
      ++collisions_checked;
    }
  }
  CHECK(by_encoding.size() + collisions_checked == 600);
}

TEST_CASE("transcript visibility separates the card leg") {
  SeededRng rng(41004);
  Transcript t;
  auto env_of = [&](MessageType mt) {
    return make_env(mt, "run-1", minimal_body(mt, rng));
  };
  t.append(Role::client, Role::provider, env_of(MessageType::purchase_open), 10);
  t.append(Role::provider, Role::client, env_of(MessageType::purchase_challenge), 11);
  t.append(Role::client, Role::card, env_of(MessageType::card_command), 12);
  t.append(Role::card, Role::client, env_of(MessageType::card_command), 13);
  t.append(Role::client, Role::provider, env_of(MessageType::purchase_complete_request), 14);
  t.append(Role::provider, Role::client, env_of(MessageType::purchase_complete_response), 15);
  t.append(Role::client, Role::distributor, env_of(MessageType::cert_request), 16);
  t.append(Role::distributor, Role::client, env_of(MessageType::cert_response), 17);

  CHECK(t.size() == 8);
  CHECK(t.frames_visible_to(Role::client).size() == 8);
  CHECK(t.frames_visible_to(Role::provider).size() == 4);
  CHECK(t.frames_visible_to(Role::distributor).size() == 2);
  CHECK(t.frames_visible_to(Role::card).size() == 2);

  // The services never observe a single card-channel byte.
  for (Role r : {Role::provider, Role::distributor}) {
    for (const Bytes& frame : t.frames_visible_to(r)) {
      Envelope env = unframe_envelope(frame);
      CHECK(env.message_type != MessageType::card_command);
    }
  }

  // Concatenation order matches frame order.
  Bytes cat;
  for (const Bytes& f : t.frames_visible_to(Role::provider))
    cat.insert(cat.end(), f.begin(), f.end());
  CHECK(t.bytes_visible_to(Role::provider) == cat);
  CHECK(t.entries()[2].frame == frame_envelope(t.entries()[2].env));
}

TEST_CASE("scan flags shared secrets and honors the whitelist") {
  SeededRng rng(41005);
  std::string secret = letter_secret(rng, 24);

  auto make_view = [&](uint64_t seed, const std::string& middle) {
    SeededRng r(seed);
    Bytes v = r.bytes(300);
    Bytes mid = ascii(middle);
    v.insert(v.end(), mid.begin(), mid.end());
    Bytes tail = r.bytes(300);
    v.insert(v.end(), tail.begin(), tail.end());
    return v;
  };

  SUBCASE("planted identifier is unexpected; whitelisting reclassifies it") {
    Bytes a = make_view(1, secret), b = make_view(2, secret);
    LinkageWhitelist empty;
    LinkageReport r = scan_shared_identifiers(a, b, empty);
    REQUIRE(r.unexpected.size() == 1);
    CHECK(r.unexpected[0].length >= 24);
    CHECK(r.unexpected[0].preview.find(secret.substr(0, 8)) != std::string::npos);

    LinkageWhitelist wl;
    wl.add(secret);
    LinkageReport r2 = scan_shared_identifiers(a, b, wl);
    CHECK(r2.unexpected.empty());
    CHECK(r2.expected_static.size() == 1);
  }

  SUBCASE("long digit runs are expected_numeric") {
    Bytes a = make_view(3, "\"ts\":1735689600123,");
    Bytes b = make_view(4, "\"ts\":1735689600123,");
    LinkageWhitelist empty;
    LinkageReport r = scan_shared_identifiers(a, b, empty);
    CHECK(r.unexpected.empty());
    REQUIRE(r.expected_numeric.size() == 1);
    CHECK(r.expected_numeric[0].preview.find("1735689600123") != std::string::npos);
  }

  SUBCASE("short digit runs do not excuse a leak") {
    // Digits sprinkled through a secret must not break it into deniable
    // fragments: classify by long runs only.
    std::string laced = letter_secret(rng, 7) + "4" + letter_secret(rng, 7) + "9" +
                        letter_secret(rng, 7);
    Bytes a = make_view(5, laced), b = make_view(6, laced);
    LinkageWhitelist empty;
    LinkageReport r = scan_shared_identifiers(a, b, empty);
    CHECK(r.unexpected.size() == 1);
  }

  SUBCASE("disjoint random views are silent") {
    SeededRng ra(7), rb(8);
    LinkageWhitelist empty;
    LinkageReport r = scan_shared_identifiers(ra.bytes(4096), rb.bytes(4096), empty);
    CHECK(total_findings(r) == 0);
  }

  SUBCASE("short overlaps stay below the radar") {
    Bytes a = make_view(9, "abcdefg");  // 7 bytes shared
    Bytes b = make_view(10, "abcdefg");
    LinkageWhitelist empty;
    CHECK(total_findings(scan_shared_identifiers(a, b, empty)) == 0);
  }

  SUBCASE("repeated identifier reports once") {
    Bytes a = make_view(11, secret + letter_secret(rng, 30) + secret);
    Bytes b = make_view(12, secret);
    LinkageWhitelist empty;
    LinkageReport r = scan_shared_identifiers(b, a, empty);  // b as the scanned view? no: (a,b)
    r = scan_shared_identifiers(a, b, empty);
    CHECK(r.unexpected.size() == 1);
    // And scanning the other way, where the secret appears twice in the
    // scanned view, still dedups by content.
    LinkageReport r2 = scan_shared_identifiers(b, a, empty);
    CHECK(r2.unexpected.size() == 1);
  }
}

TEST_CASE("scan recognizes encoding headers only when whitelisted") {
  SystemParams params = SystemParams::transparent((uint64_t{1} << 61) - 1);
  Element e1 = transparent_g2(params, 0x1FA3B54C7D2E6F81ULL);
  Element e2 = transparent_g2(params, 0x1E914B39D5C2A677ULL);
  Bytes enc1 = params.encode_element(e1), enc2 = params.encode_element(e2);
  REQUIRE(enc1.size() == enc2.size());
  REQUIRE(enc1 != enc2);

  auto view = [&](uint64_t seed, const Bytes& enc) {
    SeededRng r(seed);
    Bytes v = r.bytes(200);
    Bytes field = ascii("\"" + b64url_encode(enc) + "\"");
    v.insert(v.end(), field.begin(), field.end());
    Bytes tail = r.bytes(200);
    v.insert(v.end(), tail.begin(), tail.end());
    return v;
  };
  Bytes a = view(21, enc1), b = view(22, enc2);

  LinkageWhitelist empty;
  LinkageReport bare = scan_shared_identifiers(a, b, empty);
  CHECK(!bare.unexpected.empty());  // shared header prefix, nothing vouches for it

  LinkageReport vouched = scan_shared_identifiers(a, b, default_protocol_whitelist(params));
  CHECK(vouched.unexpected.empty());
  CHECK(!vouched.expected_static.empty());
}

TEST_CASE("scan accepts repeated content chunks once whitelisted") {
  SeededRng rng(41006);
  Bytes plaintext = rng.bytes(3000);
  const uint64_t chunk = 1024;
  Bytes slice0(plaintext.begin(), plaintext.begin() + chunk);

  auto transcript_with_chunk = [&](const std::string& sid) {
    Transcript t;
    json body = {{"data", b64url_encode(slice0)}, {"last", false}, {"seq", 0}};
    t.append(Role::distributor, Role::client,
             make_env(MessageType::stream_chunk, sid, body), 50);
    return t;
  };
  Transcript ta = transcript_with_chunk("run-a"), tb = transcript_with_chunk("run-b");

  SystemParams params = SystemParams::transparent((uint64_t{1} << 61) - 1);
  LinkageWhitelist wl = default_protocol_whitelist(params);
  LinkageReport before = transcript_linkage_scan(ta, tb, Role::distributor, wl);
  CHECK(!before.unexpected.empty());  // same payload bytes with nothing to excuse them

  whitelist_content(wl, "movie-1", plaintext, chunk);
  LinkageReport after = transcript_linkage_scan(ta, tb, Role::distributor, wl);
  CHECK(after.unexpected.empty());
  CHECK(!after.expected_static.empty());
}

namespace {

struct PurchaseFrames {
  Transcript transcript;
};

// One complete purchase conversation as the provider would record it, plus
// the device-local card exchange that must stay invisible to services.
PurchaseFrames record_purchase(const MiniPki& pki, Smartcard& card,
                               const SessionToken& session, BankAuthority& bank,
                               const std::string& session_id, Millis license_ts,
                               const std::string& license_id, uint64_t seed) {
  const SystemParams& params = pki.params;
  SeededRng rng(seed);
  PurchaseFrames out;
  Transcript& t = out.transcript;
  Millis ts = 100;

  t.append(Role::client, Role::provider,
           make_env(MessageType::purchase_open, session_id, json::object()), ts++);

  Bytes nonce = rng.bytes(32);
  t.append(Role::provider, Role::client,
           make_env(MessageType::purchase_challenge, session_id,
                    {{"nonce", b64url_encode(nonce)}}),
           ts++);

  // Device-local leg: never visible to the services.
  t.append(Role::client, Role::card,
           make_env(MessageType::card_command, session_id,
                    {{"op", "begin_purchase"}, {"nonce", b64url_encode(nonce)}}),
           ts++);
  auto auth = card.begin_purchase(session, nonce);
  REQUIRE(auth.ok);
  Bytes pk_enc = encode_pre_public_key(params, auth.value.pk_tmp);
  t.append(Role::card, Role::client,
           make_env(MessageType::card_command, session_id,
                    {{"status", "ok"},
                     {"pk_tmp", b64url_encode(pk_enc)},
                     {"fingerprint", b64url_encode(auth.value.fingerprint)},
                     {"signature", b64url_encode(auth.value.signature)}}),
           ts++);

  PaymentToken pay = bank.issue(1350);
  json req_body = {{"card_cert", auth.value.card_cert.to_json()},
                   {"content_id", "movie-1"},
                   {"expiry_ts", 0},
                   {"model", "execute_at_most_n"},
                   {"payment", pay.to_json()},
                   {"pk_tmp", b64url_encode(pk_enc)},
                   {"quantity", 3},
                   {"signature", b64url_encode(auth.value.signature)}};
  t.append(Role::client, Role::provider,
           make_env(MessageType::purchase_complete_request, session_id, req_body), ts++);

  LicenseTerms terms;
  terms.model = LicenseModel::execute_at_most_n;
  terms.n = 3;
  MintedLicense minted = mint_license(pki, auth.value.pk_tmp, "movie-1", terms,
                                      license_ts, license_id, seed + 1);
  // Same catalog item, same content key seed: only the ciphertext varies.
  SeededRng ck_rng(424242);
  Element ck_seed = pre_random_message(params, ck_rng);
  Bytes ck_ct = encode_pre_ciphertext(
      params, pre_encrypt_second(params, ck_seed, auth.value.pk_tmp, rng));
  json resp_body = {{"encrypted_ck", b64url_encode(ck_ct)},
                    {"encrypted_license", b64url_encode(minted.blob)},
                    {"license_signature", b64url_encode(minted.sig)}};
  t.append(Role::provider, Role::client,
           make_env(MessageType::purchase_complete_response, session_id, resp_body),
           ts++);
  return out;
}

}  // namespace

TEST_CASE("two real purchases by one card are unlinkable from the provider's chair") {
  SystemParams params = SystemParams::transparent((uint64_t{1} << 61) - 1);
  BankAuthority bank(params, 51001);

  LinkageWhitelist wl = default_protocol_whitelist(params);

  SUBCASE("fresh keys leave nothing to link") {
    CardRig rig(params, 90001);
    whitelist_certificate(wl, rig.pki.card);
    auto p1 = record_purchase(rig.pki, rig.card, rig.session, bank, "s-aaaa",
                              1735689600001, "cp-1:lic:1", 61001);
    auto p2 = record_purchase(rig.pki, rig.card, rig.session, bank, "s-bbbb",
                              1735689600002, "cp-1:lic:2", 61002);

    LinkageReport r =
        transcript_linkage_scan(p1.transcript, p2.transcript, Role::provider, wl);
    for (const auto& f : r.unexpected) {
      CAPTURE(f.preview);
      CAPTURE(f.length);
      CHECK(false);
    }
    CHECK(r.unexpected.empty());
    CHECK(!r.expected_static.empty());  // shared schema and card certificate
  }

  SUBCASE("a planted reused key pair is caught") {
    SeededRng kr(777777);
    SystemParams kp_params = params;
    PreKeyPair fixed = pre_keygen(kp_params, kr);
    KeyGenFn reuse = [fixed](const SystemParams&, RandomSource&) { return fixed; };
    CardRig rig(params, 90002, {2000, 3, 15}, reuse);
    whitelist_certificate(wl, rig.pki.card);

    auto p1 = record_purchase(rig.pki, rig.card, rig.session, bank, "s-cccc",
                              1735689600003, "cp-1:lic:3", 61003);
    auto p2 = record_purchase(rig.pki, rig.card, rig.session, bank, "s-dddd",
                              1735689600004, "cp-1:lic:4", 61004);

    LinkageReport r =
        transcript_linkage_scan(p1.transcript, p2.transcript, Role::provider, wl);
    CHECK(!r.unexpected.empty());
  }

  SUBCASE("the card leg itself never reaches the provider view") {
    CardRig rig(params, 90003);
    auto p1 = record_purchase(rig.pki, rig.card, rig.session, bank, "s-eeee",
                              1735689600005, "cp-1:lic:5", 61005);
    Bytes provider_view = p1.transcript.bytes_visible_to(Role::provider);
    std::string text = bytes_str(provider_view);
    CHECK(text.find("card_command") == std::string::npos);
    CHECK(text.find("fingerprint") == std::string::npos);
  }
}

TEST_CASE("fault plans transform frame sequences deterministically") {
  std::vector<Bytes> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(ascii("frame-" + std::to_string(i)));

  SUBCASE("empty plan is identity") {
    CHECK(apply_faults(frames, FaultPlan{}) == frames);
  }
  SUBCASE("drop, duplicate, tamper, reorder") {
    FaultPlan plan;
    plan.faults = {{1, FaultKind::drop},
                   {2, FaultKind::duplicate},
                   {3, FaultKind::tamper},
                   {0, FaultKind::reorder}};
    auto out = apply_faults(frames, plan);
    Bytes tampered = frames[3];
    tampered.back() ^= 0x01;
    std::vector<Bytes> expect = {frames[2], frames[0], frames[2], tampered, frames[4]};
    CHECK(out == expect);
  }
  SUBCASE("drop wins over duplicate on the same frame") {
    FaultPlan plan;
    plan.faults = {{2, FaultKind::drop}, {2, FaultKind::duplicate}};
    auto out = apply_faults(frames, plan);
    std::vector<Bytes> expect = {frames[0], frames[1], frames[3], frames[4]};
    CHECK(out == expect);
  }
  SUBCASE("reorder at the tail is a no-op") {
    FaultPlan plan;
    plan.faults = {{4, FaultKind::reorder}};
    CHECK(apply_faults(frames, plan) == frames);
  }
  SUBCASE("same plan, same output") {
    FaultPlan plan;
    plan.faults = {{0, FaultKind::tamper}, {3, FaultKind::drop}};
    CHECK(apply_faults(frames, plan) == apply_faults(frames, plan));
  }
}

TEST_CASE("whitelist construction is deterministic") {
  SystemParams params = SystemParams::transparent((uint64_t{1} << 61) - 1);
  LinkageWhitelist a = default_protocol_whitelist(params);
  LinkageWhitelist b = default_protocol_whitelist(params);
  CHECK(a.blobs() == b.blobs());
  CHECK(a.blobs().size() > 100);
}
