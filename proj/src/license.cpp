#include "drmmesh/license.hpp"

namespace drmmesh {

const char* license_model_name(LicenseModel m) {
  switch (m) {
    case LicenseModel::execute_at_most_n: return "execute_at_most_n";
    case LicenseModel::pay_per_execute: return "pay_per_execute";
    case LicenseModel::execute_until: return "execute_until";
    case LicenseModel::flatrate: return "flatrate";
  }
  throw Error("unknown license model");
}

LicenseModel license_model_from_name(const std::string& name) {
  for (LicenseModel m : {LicenseModel::execute_at_most_n, LicenseModel::pay_per_execute,
                         LicenseModel::execute_until, LicenseModel::flatrate}) {
    if (name == license_model_name(m)) return m;
  }
  throw CodecError("unknown license model: " + name);
}

void validate_terms(const LicenseTerms& terms) {
  if (is_counted_model(terms.model)) {
    if (terms.n < 1) throw CodecError("counted license needs a cap of at least 1");
    if (terms.used < 0 || terms.used > terms.n)
      throw CodecError("execution counter outside [0, cap]");
    if (terms.model == LicenseModel::pay_per_execute && terms.n != 1)
      throw CodecError("pay_per_execute is fixed at a single execution");
  } else if (terms.used < 0) {
    throw CodecError("execution counter must not be negative");
  }
}

const char* deny_reason_name(DenyReason r) {
  switch (r) {
    case DenyReason::none: return "none";
    case DenyReason::exhausted: return "exhausted";
    case DenyReason::expired: return "expired";
  }
  throw Error("unknown deny reason");
}

TermsDecision check_terms(const LicenseTerms& terms, Millis now_ts) {
  TermsDecision d;
  switch (terms.model) {
    case LicenseModel::execute_at_most_n:
    case LicenseModel::pay_per_execute:
      if (terms.used < terms.n) {
        d.allow = true;
      } else {
        d.reason = DenyReason::exhausted;
      }
      return d;
    case LicenseModel::execute_until:
      if (now_ts < terms.expiry_ts) {
        d.allow = true;
      } else {
        d.reason = DenyReason::expired;
      }
      return d;
    case LicenseModel::flatrate:
      d.allow = true;
      return d;
  }
  throw Error("unknown license model");
}

LicenseTerms consume(const LicenseTerms& terms) {
  LicenseTerms next = terms;
  if (is_counted_model(terms.model)) {
    if (terms.used >= terms.n) throw Error("consume on exhausted license terms");
    next.used = terms.used + 1;
  }
  return next;
}

json license_to_json(const License& lic) {
  json j;
  j["id"] = lic.license_id;
  j["ts"] = lic.ts;
  j["content_id"] = lic.content_id;
  j["terms"] = {
      {"model", license_model_name(lic.terms.model)},
      {"n", lic.terms.n},
      {"expiry_ts", lic.terms.expiry_ts},
      {"used", lic.terms.used},
  };
  j["issuer"] = lic.issuer_cert.to_json();
  return j;
}

License license_from_json(const json& j) {
  if (!j.is_object()) throw CodecError("license must be a JSON object");
  License lic;
  try {
    lic.license_id = j.at("id").get<std::string>();
    lic.ts = j.at("ts").get<Millis>();
    lic.content_id = j.at("content_id").get<std::string>();
    const json& t = j.at("terms");
    lic.terms.model = license_model_from_name(t.at("model").get<std::string>());
    lic.terms.n = t.at("n").get<int64_t>();
    lic.terms.expiry_ts = t.at("expiry_ts").get<Millis>();
    lic.terms.used = t.at("used").get<int64_t>();
    lic.issuer_cert = Certificate::from_json(j.at("issuer"));
  } catch (const json::exception& e) {
    throw CodecError(std::string("malformed license: ") + e.what());
  }
  validate_terms(lic.terms);
  return lic;
}

PriceQuote quote_price(int64_t unit_price, int64_t quantity, const DiscountTable& table) {
  if (quantity < 1) throw Error("quantity must be at least 1");
  if (unit_price < 0) throw Error("unit price must not be negative");

  int64_t bp = 0;
  for (const auto& [min_qty, tier_bp] : table.bp_by_min_qty) {
    if (quantity >= min_qty) bp = tier_bp;  // map is ordered: last hit is largest tier
  }
  if (bp < 0 || bp >= 10000) throw Error("discount must stay below 100%");

  PriceQuote q;
  q.unit_price = unit_price;
  q.quantity = quantity;
  q.discount_bp = bp;
  q.total = unit_price * quantity * (10000 - bp) / 10000;
  return q;
}

}  // namespace drmmesh
