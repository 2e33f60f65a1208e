#pragma once

#include <unordered_set>
#include <vector>

#include "drmmesh/smartcard.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Protocol envelopes.  Every message between actors travels as one
// length-prefixed frame holding the canonical JSON of an Envelope; bodies
// are validated against a strict per-type schema (required keys only, no
// extras, integers only, binary as base64url text).

enum class MessageType {
  purchase_open,
  purchase_challenge,
  purchase_complete_request,
  purchase_complete_response,
  cert_request,
  cert_response,
  execute_request,
  stream_chunk,
  error,
  card_command,
};

const char* message_type_name(MessageType t);
MessageType message_type_from_name(const std::string& name);

inline constexpr int kProtocolVersion = 1;

struct Envelope {
  int protocol_version = kProtocolVersion;
  MessageType message_type = MessageType::error;
  std::string session_id;  // correlates frames of one protocol run; may be empty
  json body = json::object();

  bool operator==(const Envelope&) const = default;
};

// Throws CodecError when the body does not match the schema for the type.
void validate_body(MessageType t, const json& body);

json envelope_to_json(const Envelope& env);
// Validates version, type, and body schema; throws CodecError on any violation.
Envelope envelope_from_json(const json& j);

// Canonical bytes (sorted keys, no whitespace) and the framed form used on
// the wire (4-byte big-endian length + canonical JSON).
Bytes encode_envelope(const Envelope& env);
Envelope decode_envelope(const Bytes& raw);
Bytes frame_envelope(const Envelope& env);
Envelope unframe_envelope(const Bytes& frame);

// ---------------------------------------------------------------------------
// Transcripts: the append-only observation record of a protocol session.

enum class Role { client, provider, distributor, card };
const char* role_name(Role r);

struct TranscriptEntry {
  Role from = Role::client;
  Role to = Role::client;
  Envelope env;
  Millis ts = 0;
  Bytes frame;  // the exact framed bytes that crossed the wire
};

class Transcript {
 public:
  void append(Role from, Role to, const Envelope& env, Millis ts);
  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  // What one endpoint actually observed: only the frames it sent or
  // received.  The card's device-local leg never reaches the services.
  std::vector<Bytes> frames_visible_to(Role observer) const;
  Bytes bytes_visible_to(Role observer) const;  // frames concatenated

  // The sub-transcript of one protocol run, selected by envelope session id.
  Transcript with_session(const std::string& session_id) const;

 private:
  std::vector<TranscriptEntry> entries_;
};

// ---------------------------------------------------------------------------
// Shared-identifier scan.  Given two transcripts, find byte runs (length
// >= 8) an observer saw in both, and classify each: material the observer
// legitimately holds anyway (protocol constants, shared certificates,
// encoding headers, the content it serves) is expected; long numeric runs
// are called out separately; anything else links the two sessions and
// lands in `unexpected`, which privacy demands stay empty.

class LinkageWhitelist {
 public:
  void add(const Bytes& blob);
  void add(const std::string& text);
  // Adds a structural byte sequence together with its base64url spellings
  // at every text alignment, so the sequence is recognized wherever it
  // appears inside an encoded binary field.
  void add_with_b64_phases(const Bytes& seq);

  const std::vector<Bytes>& blobs() const { return blobs_; }

 private:
  std::vector<Bytes> blobs_;
};

// Everything every conversation shares by construction: schema key names,
// enum spellings, reason strings, card-channel vocabulary, and the constant
// headers of encoded group elements, key encodings, and ciphertexts for
// the given parameter set.
LinkageWhitelist default_protocol_whitelist(const SystemParams& params);

// Adds what an observer knows about one catalog item: its id and the exact
// chunk encodings of its plaintext at the given chunk size.
void whitelist_content(LinkageWhitelist& wl, const std::string& content_id,
                       const Bytes& plaintext, uint64_t chunk_size);

// Adds one certificate's canonical serialization and field encodings.
void whitelist_certificate(LinkageWhitelist& wl, const Certificate& cert);

struct LinkageFinding {
  std::string preview;  // printable-escaped excerpt of the shared run
  size_t length = 0;    // full length of the shared run
};

struct LinkageReport {
  std::vector<LinkageFinding> expected_static;
  std::vector<LinkageFinding> expected_numeric;
  std::vector<LinkageFinding> unexpected;
};

// Core scan over two raw observation byte streams.
LinkageReport scan_shared_identifiers(const Bytes& view_a, const Bytes& view_b,
                                      const LinkageWhitelist& wl);

// Convenience: scan what `observer` saw across two sessions.
LinkageReport transcript_linkage_scan(const Transcript& a, const Transcript& b,
                                      Role observer, const LinkageWhitelist& wl);

// ---------------------------------------------------------------------------
// Deterministic fault injection for the simulated transport.

enum class FaultKind { drop, duplicate, reorder, tamper };

struct Fault {
  size_t index = 0;  // which frame of the original sequence
  FaultKind kind = FaultKind::drop;
};

struct FaultPlan {
  std::vector<Fault> faults;
  bool empty() const { return faults.empty(); }
};

// Applies the plan to a frame sequence: drop removes, duplicate repeats,
// tamper flips one payload byte (length preserved), reorder swaps a frame
// with its successor.  Deterministic: same input, same output.
std::vector<Bytes> apply_faults(const std::vector<Bytes>& frames, const FaultPlan& plan);

}  // namespace drmmesh
