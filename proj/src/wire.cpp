#include "drmmesh/wire.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>

namespace drmmesh {

// ---------------------------------------------------------------------------
// Message types and schemas.

namespace {

constexpr std::array<const char*, 10> kTypeNames = {
    "purchase_open",     "purchase_challenge", "purchase_complete_request",
    "purchase_complete_response", "cert_request", "cert_response",
    "execute_request",   "stream_chunk",       "error",
    "card_command",
};

enum class FieldKind { Str, B64, Int, Bool, Obj };

struct FieldSpec {
  const char* key;
  FieldKind kind;
};

const std::vector<FieldSpec>& schema_for(MessageType t) {
  static const std::vector<FieldSpec> purchase_open = {};
  static const std::vector<FieldSpec> purchase_challenge = {{"nonce", FieldKind::B64}};
  static const std::vector<FieldSpec> purchase_complete_request = {
      {"card_cert", FieldKind::Obj},  {"content_id", FieldKind::Str},
      {"expiry_ts", FieldKind::Int},  {"model", FieldKind::Str},
      {"payment", FieldKind::Obj},    {"pk_tmp", FieldKind::B64},
      {"quantity", FieldKind::Int},   {"signature", FieldKind::B64},
  };
  static const std::vector<FieldSpec> purchase_complete_response = {
      {"encrypted_ck", FieldKind::B64},
      {"encrypted_license", FieldKind::B64},
      {"license_signature", FieldKind::B64},
  };
  static const std::vector<FieldSpec> cert_request = {};
  static const std::vector<FieldSpec> cert_response = {{"cert", FieldKind::Obj}};
  static const std::vector<FieldSpec> execute_request = {
      {"cert_id", FieldKind::Str},
      {"content_id", FieldKind::Str},
      {"reencrypted_ck", FieldKind::B64},
  };
  static const std::vector<FieldSpec> stream_chunk = {
      {"data", FieldKind::B64},
      {"last", FieldKind::Bool},
      {"seq", FieldKind::Int},
  };
  static const std::vector<FieldSpec> error = {{"reason", FieldKind::Str}};
  static const std::vector<FieldSpec> card_command = {};  // free-form object

  switch (t) {
    case MessageType::purchase_open: return purchase_open;
    case MessageType::purchase_challenge: return purchase_challenge;
    case MessageType::purchase_complete_request: return purchase_complete_request;
    case MessageType::purchase_complete_response: return purchase_complete_response;
    case MessageType::cert_request: return cert_request;
    case MessageType::cert_response: return cert_response;
    case MessageType::execute_request: return execute_request;
    case MessageType::stream_chunk: return stream_chunk;
    case MessageType::error: return error;
    case MessageType::card_command: return card_command;
  }
  throw Error("unreachable message type");
}

}  // namespace

const char* message_type_name(MessageType t) {
  return kTypeNames[static_cast<size_t>(t)];
}

MessageType message_type_from_name(const std::string& name) {
  for (size_t i = 0; i < kTypeNames.size(); ++i)
    if (name == kTypeNames[i]) return static_cast<MessageType>(i);
  throw CodecError("unknown message type: " + name);
}

void validate_body(MessageType t, const json& body) {
  if (!body.is_object()) throw CodecError("envelope body must be an object");
  if (t == MessageType::card_command) return;  // device-local, free-form

  const auto& schema = schema_for(t);
  if (body.size() != schema.size())
    throw CodecError(std::string("body of ") + message_type_name(t) +
                     ": wrong field count");
  for (const auto& field : schema) {
    auto it = body.find(field.key);
    if (it == body.end())
      throw CodecError(std::string("body of ") + message_type_name(t) + ": missing " +
                       field.key);
    switch (field.kind) {
      case FieldKind::Str:
        if (!it->is_string()) throw CodecError(std::string(field.key) + ": must be text");
        break;
      case FieldKind::B64:
        if (!it->is_string()) throw CodecError(std::string(field.key) + ": must be text");
        b64url_decode(it->get<std::string>());  // throws CodecError when invalid
        break;
      case FieldKind::Int:
        if (!it->is_number_integer())
          throw CodecError(std::string(field.key) + ": must be an integer");
        break;
      case FieldKind::Bool:
        if (!it->is_boolean()) throw CodecError(std::string(field.key) + ": must be a bool");
        break;
      case FieldKind::Obj:
        if (!it->is_object()) throw CodecError(std::string(field.key) + ": must be an object");
        break;
    }
  }
}

json envelope_to_json(const Envelope& env) {
  validate_body(env.message_type, env.body);
  json j;
  j["protocol_version"] = env.protocol_version;
  j["message_type"] = message_type_name(env.message_type);
  j["session_id"] = env.session_id;
  j["body"] = env.body;
  return j;
}

Envelope envelope_from_json(const json& j) {
  if (!j.is_object() || j.size() != 4) throw CodecError("envelope: wrong field count");
  for (const char* key : {"protocol_version", "message_type", "session_id", "body"})
    if (!j.contains(key)) throw CodecError(std::string("envelope: missing ") + key);
  if (!j["protocol_version"].is_number_integer() ||
      j["protocol_version"].get<int>() != kProtocolVersion)
    throw CodecError("envelope: unsupported protocol version");
  if (!j["message_type"].is_string()) throw CodecError("envelope: message_type must be text");
  if (!j["session_id"].is_string()) throw CodecError("envelope: session_id must be text");

  Envelope env;
  env.protocol_version = kProtocolVersion;
  env.message_type = message_type_from_name(j["message_type"].get<std::string>());
  env.session_id = j["session_id"].get<std::string>();
  env.body = j["body"];
  validate_body(env.message_type, env.body);
  return env;
}

Bytes encode_envelope(const Envelope& env) {
  return str_bytes(envelope_to_json(env).dump());
}

Envelope decode_envelope(const Bytes& raw) {
  json j;
  try {
    j = json::parse(bytes_str(raw));
  } catch (const json::exception& e) {
    throw CodecError(std::string("envelope: invalid JSON: ") + e.what());
  }
  return envelope_from_json(j);
}

Bytes frame_envelope(const Envelope& env) { return frame_payload(encode_envelope(env)); }

Envelope unframe_envelope(const Bytes& frame) {
  return decode_envelope(unframe_payload(frame));
}

// ---------------------------------------------------------------------------
// Transcripts.

const char* role_name(Role r) {
  switch (r) {
    case Role::client: return "client";
    case Role::provider: return "provider";
    case Role::distributor: return "distributor";
    case Role::card: return "card";
  }
  throw Error("unreachable role");
}

void Transcript::append(Role from, Role to, const Envelope& env, Millis ts) {
  TranscriptEntry e;
  e.from = from;
  e.to = to;
  e.env = env;
  e.ts = ts;
  e.frame = frame_envelope(env);
  entries_.push_back(std::move(e));
}

std::vector<Bytes> Transcript::frames_visible_to(Role observer) const {
  std::vector<Bytes> out;
  for (const auto& e : entries_)
    if (e.from == observer || e.to == observer) out.push_back(e.frame);
  return out;
}

Bytes Transcript::bytes_visible_to(Role observer) const {
  Bytes out;
  for (const auto& e : entries_) {
    if (e.from != observer && e.to != observer) continue;
    out.insert(out.end(), e.frame.begin(), e.frame.end());
  }
  return out;
}

Transcript Transcript::with_session(const std::string& session_id) const {
  Transcript out;
  for (const auto& e : entries_)
    if (e.env.session_id == session_id) out.entries_.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Shared-identifier scan.

void LinkageWhitelist::add(const Bytes& blob) {
  if (!blob.empty()) blobs_.push_back(blob);
}

void LinkageWhitelist::add(const std::string& text) { add(str_bytes(text)); }

void LinkageWhitelist::add_with_b64_phases(const Bytes& seq) {
  add(seq);
  for (size_t phase = 0; phase < 3; ++phase) {
    // Two encodings with different surroundings: the characters that agree
    // are exactly those determined by `seq` alone at this alignment.
    Bytes pad1(phase, 0x00), pad2(phase, 0xff);
    Bytes a = pad1, b = pad2;
    a.insert(a.end(), seq.begin(), seq.end());
    b.insert(b.end(), seq.begin(), seq.end());
    a.push_back(0x55); a.push_back(0x55);
    b.push_back(0xaa); b.push_back(0xaa);
    std::string ea = b64url_encode(a), eb = b64url_encode(b);
    size_t n = std::min(ea.size(), eb.size());
    size_t i = 0;
    while (i < n) {
      if (ea[i] != eb[i]) { ++i; continue; }
      size_t j = i;
      while (j < n && ea[j] == eb[j]) ++j;
      if (j - i >= 4) add(ea.substr(i, j - i));
      i = j;
    }
  }
}

namespace {

uint64_t pack8(const uint8_t* p) {
  uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

bool structural_char(uint8_t c) {
  switch (c) {
    case '{': case '}': case '[': case ']': case ':': case ',': case '"':
    case '\\': case ' ': case '\n':
      return true;
    default:
      return false;
  }
}

bool digit_char(uint8_t c) { return c >= '0' && c <= '9'; }

std::string preview_of(const Bytes& view, size_t begin, size_t len) {
  std::string out;
  size_t shown = std::min<size_t>(len, 48);
  for (size_t i = 0; i < shown; ++i) {
    uint8_t c = view[begin + i];
    if (c >= 0x20 && c < 0x7f) {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[5];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    }
  }
  if (shown < len) out += "...";
  return out;
}

}  // namespace

LinkageReport scan_shared_identifiers(const Bytes& view_a, const Bytes& view_b,
                                      const LinkageWhitelist& wl) {
  LinkageReport report;
  if (view_a.size() < 8 || view_b.size() < 8) return report;

  // Every 8-byte window of the first view, exactly.
  std::unordered_set<uint64_t> grams_a;
  grams_a.reserve(view_a.size());
  for (size_t i = 0; i + 8 <= view_a.size(); ++i) grams_a.insert(pack8(view_a.data() + i));

  // 8-byte windows of the whitelist: a byte of a shared run is vouched for
  // when a whitelisted window covers it.
  std::unordered_set<uint64_t> wl_grams;
  for (const Bytes& blob : wl.blobs())
    for (size_t i = 0; i + 8 <= blob.size(); ++i) wl_grams.insert(pack8(blob.data() + i));

  // Digits only explain themselves in long runs (timestamps and the like);
  // the stray digits inside an encoded key must not break it into
  // deniable fragments.  Runs are maximal over the whole view.
  std::vector<bool> long_digit(view_b.size(), false);
  for (size_t i = 0; i < view_b.size();) {
    if (!digit_char(view_b[i])) { ++i; continue; }
    size_t j = i;
    while (j < view_b.size() && digit_char(view_b[j])) ++j;
    if (j - i >= 8)
      for (size_t k = i; k < j; ++k) long_digit[k] = true;
    i = j;
  }

  std::unordered_set<std::string> seen_previews;
  auto emit = [&](std::vector<LinkageFinding>& bucket, size_t begin, size_t len) {
    LinkageFinding f;
    f.preview = preview_of(view_b, begin, len);
    f.length = len;
    if (seen_previews.insert(f.preview).second && bucket.size() < 64)
      bucket.push_back(std::move(f));
  };

  // Maximal stretches of the second view whose every 8-byte window also
  // appears in the first view.
  size_t pos = 0;
  while (pos + 8 <= view_b.size()) {
    if (!grams_a.count(pack8(view_b.data() + pos))) {
      ++pos;
      continue;
    }
    size_t last = pos;
    while (last + 1 + 8 <= view_b.size() && grams_a.count(pack8(view_b.data() + last + 1)))
      ++last;
    size_t begin = pos, end = last + 8;  // [begin, end) shared with view_a
    pos = last + 2;

    // Classify: mark every byte explained by structure, a long digit run,
    // or a whitelisted window; an unexplained stretch of 8+ bytes is a
    // linkable identifier.
    std::vector<bool> explained(end - begin, false);
    bool numeric = false;
    for (size_t i = begin; i < end; ++i) {
      if (structural_char(view_b[i]) || long_digit[i]) explained[i - begin] = true;
      if (long_digit[i]) numeric = true;
    }
    for (size_t i = begin; i + 8 <= end; ++i) {
      if (!wl_grams.count(pack8(view_b.data() + i))) continue;
      for (size_t k = 0; k < 8; ++k) explained[i - begin + k] = true;
    }

    bool leaked = false;
    size_t run = 0;
    for (size_t i = 0; i <= explained.size(); ++i) {
      if (i < explained.size() && !explained[i]) {
        ++run;
        continue;
      }
      if (run >= 8) {
        emit(report.unexpected, begin + i - run, run);
        leaked = true;
      }
      run = 0;
    }
    if (leaked) continue;

    if (numeric)
      emit(report.expected_numeric, begin, end - begin);
    else
      emit(report.expected_static, begin, end - begin);
  }
  return report;
}

LinkageReport transcript_linkage_scan(const Transcript& a, const Transcript& b,
                                      Role observer, const LinkageWhitelist& wl) {
  return scan_shared_identifiers(a.bytes_visible_to(observer), b.bytes_visible_to(observer),
                                 wl);
}

// ---------------------------------------------------------------------------
// Whitelist construction.

namespace {

void add_protocol_vocabulary(LinkageWhitelist& wl) {
  static const char* kWords[] = {
      // envelope and body field names
      "protocol_version", "message_type", "session_id", "body", "nonce", "card_cert",
      "pk_tmp", "signature", "content_id", "model", "quantity", "expiry_ts", "payment",
      "serial", "amount", "sig", "encrypted_license", "license_signature", "encrypted_ck",
      "cert", "cert_id", "reencrypted_ck", "seq", "last", "data", "reason",
      // message type names
      "purchase_open", "purchase_challenge", "purchase_complete_request",
      "purchase_complete_response", "cert_request", "cert_response", "execute_request",
      "stream_chunk", "error", "card_command",
      // certificate and license serialization
      "role", "subject", "ts", "sig_pubkey", "pre_pubkey", "issuer_id", "issuer", "id",
      "terms", "n", "used", "root", "smartcard_provider", "smartcard", "content_provider",
      "content_distributor", "content_distributor_ephemeral", "execute_at_most_n",
      "pay_per_execute", "execute_until", "flatrate", "session",
      // card channel vocabulary
      "op", "status", "ok", "reject", "verify_pin", "begin_purchase", "store_license",
      "list_content", "authorize_execution", "check_category", "snapshot", "pin",
      "fingerprint", "rk", "pk_fingerprint", "from", "to", "certs", "blob", "license",
      "now_ts", "rating", "decision", "allow", "deny", "content_ids", "card_ts",
      "licenses", "license_id", "pending", "pin_failures", "locked", "date_of_birth",
      "home_country",
      // rejection reasons across all actors
      "card_locked", "bad_pin", "no_session", "malformed_license_blob", "no_pending_key",
      "malformed_license", "issuer_not_a_provider", "bad_issuer_chain", "bad_signature",
      "replayed_license_id", "stale_license", "unknown_content", "not_a_distributor",
      "replayed_cert_id", "stale_cert", "bad_distributor_key", "terms_exhausted",
      "terms_expired", "unknown_session", "session_replayed", "session_expired",
      "bad_terms", "bad_card_chain", "malformed_request", "payment_invalid",
      "wrong_amount", "payment_double_spent", "unknown_grant", "grant_expired",
      "grant_spent", "malformed_ciphertext", "no_valid_license", "unknown_stream",
      "stream_expired", "bad_chunk_seq",
      // JSON literals
      "true", "false", "null",
  };
  for (const char* w : kWords) wl.add(std::string(w));
  // Field names as they appear in canonical JSON, so name+punctuation runs
  // are covered without relying on the bare word being 8+ characters.
  for (const char* w : kWords) wl.add("\"" + std::string(w) + "\":");
}

void add_encoding_headers(LinkageWhitelist& wl, const SystemParams& params) {
  struct GroupInfo {
    uint8_t wire_id, group_tag;
    std::vector<uint32_t> payload_lens;
  };
  // Size payloads from a full-width element (the generator itself can have
  // a degenerate short encoding), with shorter variants for the occasional
  // element whose leading bytes happen to be zero.
  auto probe = [&](const Element& sample) {
    Bytes enc = params.encode_element(sample);
    GroupInfo info;
    info.wire_id = enc[0];
    info.group_tag = enc[1];
    uint32_t typical = static_cast<uint32_t>(enc.size() - 6);
    for (uint32_t d = 0; d <= 2; ++d)
      info.payload_lens.push_back(typical >= d ? typical - d : 0);
    return info;
  };
  mpz_class top = params.order() - 1;
  GroupInfo g1 = probe(params.g1_pow(top));
  GroupInfo g2 = probe(params.g2_pow(top));

  auto header6 = [](const GroupInfo& gi, uint32_t pl) {
    Bytes h{gi.wire_id, gi.group_tag};
    put_u32_be(h, pl);
    return h;
  };
  auto sized_element_start = [&](const GroupInfo& gi, uint32_t pl) {
    Bytes s;
    put_u32_be(s, 6 + pl);
    Bytes h = header6(gi, pl);
    s.insert(s.end(), h.begin(), h.end());
    return s;  // [len][wire_id][group][payload_len]
  };

  for (const GroupInfo* gi : {&g1, &g2}) {
    for (uint32_t pl : gi->payload_lens) {
      wl.add_with_b64_phases(header6(*gi, pl));
      wl.add_with_b64_phases(sized_element_start(*gi, pl));
    }
  }

  // Ciphertext layouts: [kind][sized alpha][sized beta] and, for hybrid
  // blobs, a leading total-length word before a first-level ciphertext.
  auto alpha_group = [&](uint8_t kind) -> const GroupInfo& {
    return kind == 3 ? g1 : g2;  // delegatable ciphertexts carry a G1 alpha
  };
  for (uint8_t kind : {1, 2, 3}) {
    for (uint32_t pl : alpha_group(kind).payload_lens) {
      Bytes prefix{kind};
      Bytes s = sized_element_start(alpha_group(kind), pl);
      prefix.insert(prefix.end(), s.begin(), s.end());
      wl.add_with_b64_phases(prefix);
    }
  }
  for (uint32_t pla : g2.payload_lens) {
    for (uint32_t plb : g2.payload_lens) {
      uint32_t kem_len = 1 + 4 + 6 + pla + 4 + 6 + plb;
      Bytes prefix;
      put_u32_be(prefix, kem_len);
      prefix.push_back(1);
      Bytes s = sized_element_start(g2, pla);
      prefix.insert(prefix.end(), s.begin(), s.end());
      wl.add_with_b64_phases(prefix);
    }
  }
}

}  // namespace

LinkageWhitelist default_protocol_whitelist(const SystemParams& params) {
  LinkageWhitelist wl;
  add_protocol_vocabulary(wl);
  add_encoding_headers(wl, params);
  return wl;
}

void whitelist_content(LinkageWhitelist& wl, const std::string& content_id,
                       const Bytes& plaintext, uint64_t chunk_size) {
  wl.add(content_id);
  wl.add("\"" + content_id + "\"");
  if (chunk_size == 0) return;
  for (size_t off = 0; off < plaintext.size(); off += chunk_size) {
    size_t end = std::min(plaintext.size(), off + static_cast<size_t>(chunk_size));
    Bytes slice(plaintext.begin() + off, plaintext.begin() + end);
    wl.add(b64url_encode(slice));
    wl.add(slice);
  }
}

void whitelist_certificate(LinkageWhitelist& wl, const Certificate& cert) {
  json j = cert.to_json();
  wl.add(j.dump());
  for (const auto& [key, value] : j.items())
    if (value.is_string()) wl.add(value.get<std::string>());
}

// ---------------------------------------------------------------------------
// Fault injection.

std::vector<Bytes> apply_faults(const std::vector<Bytes>& frames, const FaultPlan& plan) {
  std::vector<Bytes> out;
  out.reserve(frames.size() + plan.faults.size());
  auto has = [&](size_t idx, FaultKind kind) {
    return std::any_of(plan.faults.begin(), plan.faults.end(),
                       [&](const Fault& f) { return f.index == idx && f.kind == kind; });
  };
  for (size_t i = 0; i < frames.size(); ++i) {
    if (has(i, FaultKind::drop)) continue;
    Bytes frame = frames[i];
    if (has(i, FaultKind::tamper) && !frame.empty()) frame.back() ^= 0x01;
    out.push_back(frame);
    if (has(i, FaultKind::duplicate)) out.push_back(out.back());
  }
  for (const Fault& f : plan.faults) {
    if (f.kind != FaultKind::reorder) continue;
    if (f.index + 1 < out.size()) std::swap(out[f.index], out[f.index + 1]);
  }
  return out;
}

}  // namespace drmmesh
