#pragma once

#include <map>

#include "drmmesh/hybrid.hpp"

namespace drmmesh {

// Usage models a license can grant.  pay_per_execute is a counted model
// fixed at a single execution; flatrate never consumes anything.
enum class LicenseModel {
  execute_at_most_n,
  pay_per_execute,
  execute_until,
  flatrate,
};

const char* license_model_name(LicenseModel m);
LicenseModel license_model_from_name(const std::string& name);

inline bool is_counted_model(LicenseModel m) {
  return m == LicenseModel::execute_at_most_n || m == LicenseModel::pay_per_execute;
}

struct LicenseTerms {
  LicenseModel model = LicenseModel::execute_at_most_n;
  int64_t n = 0;         // execution cap for counted models
  Millis expiry_ts = 0;  // end of validity for execute_until
  int64_t used = 0;      // executions consumed so far (card-side state)

  bool operator==(const LicenseTerms&) const = default;
};

// Throws CodecError when the terms violate their model's invariants
// (counted cap < 1, used outside [0, n], pay_per_execute with n != 1).
void validate_terms(const LicenseTerms& terms);

enum class DenyReason {
  none,
  exhausted,  // counted model fully used
  expired,    // execute_until window passed
};

const char* deny_reason_name(DenyReason r);

struct TermsDecision {
  bool allow = false;
  DenyReason reason = DenyReason::none;
};

// Pure decision: may this license execute right now?  Counted models compare
// used < n; execute_until requires now strictly before the expiry instant.
TermsDecision check_terms(const LicenseTerms& terms, Millis now_ts);

// Returns the terms after one execution: used+1 for counted models,
// unchanged otherwise.  Throws Error when a counted model is already
// exhausted (callers must check_terms first).
LicenseTerms consume(const LicenseTerms& terms);

// ---------------------------------------------------------------------------
// Licenses.

struct License {
  std::string license_id;
  Millis ts = 0;
  std::string content_id;
  LicenseTerms terms;
  Certificate issuer_cert;

  bool operator==(const License&) const = default;
};

// Canonical JSON: {id, ts, content_id, terms{model, n, expiry_ts, used},
// issuer}.  A "sig" member added by sign_json travels alongside and is
// ignored on decode.
json license_to_json(const License& lic);
License license_from_json(const json& j);

// ---------------------------------------------------------------------------
// Pricing.  Discounts are basis points (1/100 percent) keyed by the minimum
// quantity that unlocks them; the largest qualifying tier applies.

struct DiscountTable {
  std::map<int64_t, int64_t> bp_by_min_qty;
};

struct PriceQuote {
  int64_t unit_price = 0;  // currency minor units
  int64_t quantity = 0;
  int64_t discount_bp = 0;  // applied discount in basis points
  int64_t total = 0;        // unit_price * quantity * (10000 - bp) / 10000
};

// Deterministic integer arithmetic; truncates fractional minor units toward
// zero.  Throws Error on quantity < 1, negative price, or a discount at or
// above 100%.
PriceQuote quote_price(int64_t unit_price, int64_t quantity, const DiscountTable& table);

}  // namespace drmmesh
