#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmmesh {

using Bytes = std::vector<uint8_t>;

// Base class for all hard failures raised by this library.  Protocol-level
// rejections (bad PIN, stale certificate, exhausted license, ...) are NOT
// exceptions -- they travel as status codes in responses.  Exceptions mean
// the caller violated an API contract or the environment is broken.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Cryptographic failure: bad key material, point not on curve, AEAD tag
// mismatch, signature over malformed input, ...
class CryptoError : public Error {
 public:
  explicit CryptoError(const std::string& what) : Error(what) {}
};

// Malformed serialized data (frames, envelopes, encoded group elements).
class CodecError : public Error {
 public:
  explicit CodecError(const std::string& what) : Error(what) {}
};

// An authenticated check failed where the API promises a verified result
// (e.g. certificate chain validation requested as must-succeed).
class AuthError : public Error {
 public:
  explicit AuthError(const std::string& what) : Error(what) {}
};

// Result of a protocol operation: rejections are expected outcomes that
// carry a machine-readable reason string, not exceptions.  Exceptions out
// of protocol entry points mean malformed input or a broken environment.
template <typename T>
struct OpResult {
  bool ok = false;
  T value{};
  std::string reason;

  static OpResult success(T v) {
    OpResult r;
    r.ok = true;
    r.value = std::move(v);
    return r;
  }
  static OpResult reject(std::string why) {
    OpResult r;
    r.reason = std::move(why);
    return r;
  }
};

// ---------------------------------------------------------------------------
// Small byte-level helpers.

std::string to_hex(const Bytes& data);
Bytes from_hex(const std::string& hex);

// URL-safe base64 without padding ('-' and '_', RFC 4648 section 5).
std::string b64url_encode(const Bytes& data);
Bytes b64url_decode(const std::string& text);

void put_u32_be(Bytes& out, uint32_t v);
uint32_t get_u32_be(const uint8_t* p);
void put_u64_be(Bytes& out, uint64_t v);
uint64_t get_u64_be(const uint8_t* p);

Bytes sha256(const Bytes& data);
Bytes sha256(const std::string& data);

// Constant-time comparison for secrets and MACs.
bool ct_equal(const Bytes& a, const Bytes& b);

inline Bytes str_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }
inline std::string bytes_str(const Bytes& b) { return std::string(b.begin(), b.end()); }

// ---------------------------------------------------------------------------
// Time.  All timestamps are milliseconds since the Unix epoch, UTC.

using Millis = int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() = 0;
};

// Wall clock backed by std::chrono::system_clock.
class SystemClock final : public Clock {
 public:
  Millis now() override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

// ---------------------------------------------------------------------------
// Civil-date arithmetic (proleptic Gregorian), used for age checks.

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
};

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
int64_t civil_to_days(const CivilDate& d);
CivilDate days_to_civil(int64_t days);

bool is_leap_year(int year);
int days_in_month(int year, int month);

// Timestamp (ms UTC) of midnight starting the given civil date.
Millis civil_midnight_ms(const CivilDate& d);
CivilDate ms_to_civil(Millis ts);

// The moment a person born on `birth` turns `years` old: midnight UTC of the
// anniversary date.  A Feb 29 birthday in a non-leap target year clamps to
// Mar 1 (the first instant the full year has elapsed).
Millis anniversary_ms(const CivilDate& birth, int years);

}  // namespace drmmesh
