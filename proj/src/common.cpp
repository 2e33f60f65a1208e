#include "drmmesh/common.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <array>
#include <cstring>

namespace drmmesh {

static const char kHexDigits[] = "0123456789abcdef";

std::string to_hex(const Bytes& data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

static int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

Bytes from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw CodecError("from_hex: odd length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_val(hex[i]);
    int lo = hex_val(hex[i + 1]);
    if (hi < 0 || lo < 0) throw CodecError("from_hex: bad digit");
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

static const char kB64Url[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::string b64url_encode(const Bytes& data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    uint32_t v = data[i] << 16 | data[i + 1] << 8 | data[i + 2];
    out.push_back(kB64Url[v >> 18]);
    out.push_back(kB64Url[(v >> 12) & 63]);
    out.push_back(kB64Url[(v >> 6) & 63]);
    out.push_back(kB64Url[v & 63]);
  }
  size_t rem = data.size() - i;
  if (rem == 1) {
    uint32_t v = data[i] << 16;
    out.push_back(kB64Url[v >> 18]);
    out.push_back(kB64Url[(v >> 12) & 63]);
  } else if (rem == 2) {
    uint32_t v = data[i] << 16 | data[i + 1] << 8;
    out.push_back(kB64Url[v >> 18]);
    out.push_back(kB64Url[(v >> 12) & 63]);
    out.push_back(kB64Url[(v >> 6) & 63]);
  }
  return out;
}

static int b64_val(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '-') return 62;
  if (c == '_') return 63;
  return -1;
}

Bytes b64url_decode(const std::string& text) {
  size_t rem = text.size() % 4;
  if (rem == 1) throw CodecError("b64url_decode: bad length");
  Bytes out;
  out.reserve(text.size() / 4 * 3 + 2);
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    int v = b64_val(c);
    if (v < 0) throw CodecError("b64url_decode: bad character");
    acc = acc << 6 | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<uint8_t>(acc >> bits));
    }
  }
  // Leftover bits must be zero padding of the final byte.
  if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) {
    throw CodecError("b64url_decode: nonzero trailing bits");
  }
  return out;
}

void put_u32_be(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32_be(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
         static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

void put_u64_be(Bytes& out, uint64_t v) {
  put_u32_be(out, static_cast<uint32_t>(v >> 32));
  put_u32_be(out, static_cast<uint32_t>(v));
}

uint64_t get_u64_be(const uint8_t* p) {
  return static_cast<uint64_t>(get_u32_be(p)) << 32 | get_u32_be(p + 4);
}

Bytes sha256(const Bytes& data) {
  Bytes digest(32);
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw CryptoError("sha256: EVP_MD_CTX_new failed");
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
            EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
            EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != 32) throw CryptoError("sha256: digest failed");
  return digest;
}

Bytes sha256(const std::string& data) { return sha256(str_bytes(data)); }

bool ct_equal(const Bytes& a, const Bytes& b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

// ---------------------------------------------------------------------------
// Civil dates.

bool is_leap_year(int year) {
  return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

int days_in_month(int year, int month) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) throw Error("days_in_month: bad month");
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

int64_t civil_to_days(const CivilDate& d) {
  int y = d.year;
  unsigned m = static_cast<unsigned>(d.month);
  unsigned day = static_cast<unsigned>(d.day);
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

CivilDate days_to_civil(int64_t days) {
  days += 719468;
  const int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                   static_cast<int>(day)};
}

Millis civil_midnight_ms(const CivilDate& d) {
  return civil_to_days(d) * 86400000;
}

CivilDate ms_to_civil(Millis ts) {
  int64_t days = ts / 86400000;
  if (ts < 0 && ts % 86400000 != 0) --days;
  return days_to_civil(days);
}

Millis anniversary_ms(const CivilDate& birth, int years) {
  CivilDate t{birth.year + years, birth.month, birth.day};
  if (t.day > days_in_month(t.year, t.month)) {
    // Feb 29 in a non-leap year: roll forward to Mar 1.
    t.day = 1;
    t.month += 1;
  }
  return civil_midnight_ms(t);
}

}  // namespace drmmesh
