#include "drmmesh/service.hpp"

#include <httplib.h>

namespace drmmesh {

namespace {

constexpr const char* kJson = "application/json";

Envelope env_of(MessageType t, const std::string& session_id, json body) {
  Envelope env;
  env.message_type = t;
  env.session_id = session_id;
  env.body = std::move(body);
  return env;
}

void reply_env(httplib::Response& res, const Envelope& env) {
  res.set_content(bytes_str(encode_envelope(env)), kJson);
}

void reply_error_env(httplib::Response& res, const std::string& session_id,
                     const std::string& reason) {
  reply_env(res, env_of(MessageType::error, session_id, {{"reason", reason}}));
}

// Parses and validates an incoming envelope of the expected type; on any
// violation answers 400 and returns nothing.
std::optional<Envelope> read_env(const httplib::Request& req, httplib::Response& res,
                                 MessageType expect) {
  try {
    Envelope env = decode_envelope(str_bytes(req.body));
    if (env.message_type != expect) throw CodecError("unexpected message type");
    return env;
  } catch (const CodecError& e) {
    res.status = 400;
    res.set_content(json{{"error", e.what()}}.dump(), kJson);
    return std::nullopt;
  }
}

// The provider's session tag is "p" + its numeric session id.
std::optional<uint64_t> parse_provider_tag(const std::string& tag) {
  if (tag.size() < 2 || tag.size() > 21 || tag[0] != 'p') return std::nullopt;
  uint64_t v = 0;
  for (size_t i = 1; i < tag.size(); ++i) {
    if (tag[i] < '0' || tag[i] > '9') return std::nullopt;
    v = v * 10 + static_cast<uint64_t>(tag[i] - '0');
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Host lifecycle.

ServiceHost::ServiceHost() : server_(std::make_unique<httplib::Server>()) {}

ServiceHost::~ServiceHost() { stop(); }

int ServiceHost::start() {
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw Error("service: cannot bind a localhost port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ServiceHost::stop() {
  if (server_ && server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

// ---------------------------------------------------------------------------
// Provider routes.

void mount_provider_service(ServiceHost& host, ContentProvider& provider) {
  auto& svr = host.server();

  svr.Get("/catalog", [&provider](const httplib::Request&, httplib::Response& res) {
    json items = json::array();
    for (const auto& row : provider.list_catalog())
      items.push_back({{"content_id", row.content_id},
                       {"title", row.title},
                       {"rating", row.rating},
                       {"unit_price", row.unit_price}});
    res.set_content(json{{"items", items}}.dump(), kJson);
  });

  svr.Get("/quote", [&provider](const httplib::Request& req, httplib::Response& res) {
    try {
      int64_t quantity = std::stoll(req.get_param_value("quantity"));
      PriceQuote q = provider.quote(req.get_param_value("content_id"),
                                    req.get_param_value("model"), quantity);
      res.set_content(json{{"unit_price", q.unit_price},
                           {"quantity", q.quantity},
                           {"discount_bp", q.discount_bp},
                           {"total", q.total}}
                          .dump(),
                      kJson);
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), kJson);
    }
  });

  svr.Get(R"(/content/([^/]+))",
          [&provider](const httplib::Request& req, httplib::Response& res) {
            try {
              Bytes blob = provider.serve_encrypted_content(req.matches[1]);
              res.set_content(bytes_str(blob), "application/octet-stream");
            } catch (const Error&) {
              res.status = 404;
              res.set_content(json{{"error", "unknown_content"}}.dump(), kJson);
            }
          });

  svr.Post("/purchase/open",
           [&provider](const httplib::Request& req, httplib::Response& res) {
             auto env = read_env(req, res, MessageType::purchase_open);
             if (!env) return;
             PurchaseOpen open = provider.open_purchase();
             reply_env(res, env_of(MessageType::purchase_challenge,
                                   "p" + std::to_string(open.session_id),
                                   {{"nonce", b64url_encode(open.nonce)}}));
           });

  svr.Post("/purchase/complete",
           [&provider](const httplib::Request& req, httplib::Response& res) {
             auto env = read_env(req, res, MessageType::purchase_complete_request);
             if (!env) return;
             auto session_id = parse_provider_tag(env->session_id);
             if (!session_id) {
               res.status = 400;
               res.set_content(json{{"error", "bad session tag"}}.dump(), kJson);
               return;
             }
             PurchaseRequest preq;
             try {
               preq.session_id = *session_id;
               preq.card_cert = Certificate::from_json(env->body.at("card_cert"));
               preq.pk_tmp = b64url_decode(env->body.at("pk_tmp").get<std::string>());
               preq.signature =
                   b64url_decode(env->body.at("signature").get<std::string>());
               preq.content_id = env->body.at("content_id").get<std::string>();
               preq.model = env->body.at("model").get<std::string>();
               preq.quantity = env->body.at("quantity").get<int64_t>();
               preq.expiry_ts = env->body.at("expiry_ts").get<Millis>();
               preq.payment = PaymentToken::from_json(env->body.at("payment"));
             } catch (const std::exception&) {
               reply_error_env(res, env->session_id, "malformed_request");
               return;
             }
             auto r = provider.complete_purchase(preq);
             if (!r.ok) {
               reply_error_env(res, env->session_id, r.reason);
               return;
             }
             reply_env(res,
                       env_of(MessageType::purchase_complete_response, env->session_id,
                              {{"encrypted_ck", b64url_encode(r.value.encrypted_ck)},
                               {"encrypted_license",
                                b64url_encode(r.value.encrypted_license)},
                               {"license_signature",
                                b64url_encode(r.value.license_signature)}}));
           });
}

// ---------------------------------------------------------------------------
// Distributor routes.

void mount_distributor_service(ServiceHost& host, ContentDistributor& distributor) {
  auto& svr = host.server();

  svr.Get("/identity", [&distributor](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"cert", distributor.cert().to_json()}}.dump(), kJson);
  });

  svr.Post("/cert", [&distributor](const httplib::Request& req, httplib::Response& res) {
    auto env = read_env(req, res, MessageType::cert_request);
    if (!env) return;
    Certificate cert = distributor.issue_session_cert();
    reply_env(res, env_of(MessageType::cert_response, env->session_id,
                          {{"cert", cert.to_json()}}));
  });

  svr.Post("/execute",
           [&distributor](const httplib::Request& req, httplib::Response& res) {
             auto env = read_env(req, res, MessageType::execute_request);
             if (!env) return;
             Bytes ck;
             try {
               ck = b64url_decode(env->body.at("reencrypted_ck").get<std::string>());
             } catch (const std::exception&) {
               reply_error_env(res, env->session_id, "malformed_ciphertext");
               return;
             }
             auto r = distributor.execute_content(
                 env->body.at("cert_id").get<std::string>(), ck,
                 env->body.at("content_id").get<std::string>());
             if (!r.ok) {
               reply_error_env(res, env->session_id, r.reason);
               return;
             }
             res.set_content(
                 json{{"resume_token", r.value.resume_token},
                      {"chunk_count", r.value.chunk_count},
                      {"content_size", r.value.content_size},
                      {"chunk_size", r.value.chunk_size}}
                     .dump(),
                 kJson);
           });

  svr.Get("/chunk", [&distributor](const httplib::Request& req, httplib::Response& res) {
    const std::string tag = req.get_param_value("tag");
    uint64_t seq = 0;
    try {
      seq = std::stoull(req.get_param_value("seq"));
    } catch (const std::exception&) {
      reply_error_env(res, tag, "bad_chunk_seq");
      return;
    }
    auto r = distributor.fetch_chunk(req.get_param_value("token"), seq);
    if (!r.ok) {
      reply_error_env(res, tag, r.reason);
      return;
    }
    reply_env(res, env_of(MessageType::stream_chunk, tag,
                          {{"data", b64url_encode(r.value.data)},
                           {"last", r.value.last},
                           {"seq", static_cast<int64_t>(r.value.seq)}}));
  });
}

// ---------------------------------------------------------------------------
// HTTP client ports.

namespace {

// One shared failure shape for transport-level trouble.
[[noreturn]] void http_fail(const std::string& what) {
  throw Error("http: " + what);
}

json parse_json_or_fail(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    http_fail(std::string("invalid JSON response: ") + e.what());
  }
}

Envelope parse_env_or_fail(const std::string& body) {
  try {
    return decode_envelope(str_bytes(body));
  } catch (const CodecError& e) {
    http_fail(std::string("invalid envelope response: ") + e.what());
  }
}

}  // namespace

HttpProviderPort::HttpProviderPort(const std::string& host, int port)
    : http_(std::make_unique<httplib::Client>(host, port)) {}

HttpProviderPort::~HttpProviderPort() = default;

std::vector<CatalogItem> HttpProviderPort::list_catalog() {
  auto res = http_->Get("/catalog");
  if (!res || res->status != 200) http_fail("catalog unavailable");
  json j = parse_json_or_fail(res->body);
  std::vector<CatalogItem> out;
  for (const auto& row : j.at("items")) {
    CatalogItem item;
    item.content_id = row.at("content_id").get<std::string>();
    item.title = row.at("title").get<std::string>();
    item.rating = row.at("rating").get<std::string>();
    item.unit_price = row.at("unit_price").get<int64_t>();
    out.push_back(std::move(item));
  }
  return out;
}

PriceQuote HttpProviderPort::quote(const std::string& content_id, const std::string& model,
                                   int64_t quantity) {
  httplib::Params params{{"content_id", content_id},
                         {"model", model},
                         {"quantity", std::to_string(quantity)}};
  auto res = http_->Get("/quote", params, httplib::Headers{});
  if (!res) http_fail("quote unavailable");
  json j = parse_json_or_fail(res->body);
  if (res->status != 200)
    throw Error("quote refused: " + j.value("error", std::string("unknown")));
  PriceQuote q;
  q.unit_price = j.at("unit_price").get<int64_t>();
  q.quantity = j.at("quantity").get<int64_t>();
  q.discount_bp = j.at("discount_bp").get<int64_t>();
  q.total = j.at("total").get<int64_t>();
  return q;
}

PurchaseOpen HttpProviderPort::open_purchase() {
  Bytes body = encode_envelope(env_of(MessageType::purchase_open, "", json::object()));
  auto res = http_->Post("/purchase/open", bytes_str(body), kJson);
  if (!res || res->status != 200) http_fail("purchase/open failed");
  Envelope env = parse_env_or_fail(res->body);
  if (env.message_type != MessageType::purchase_challenge)
    http_fail("unexpected purchase/open answer");
  auto session_id = parse_provider_tag(env.session_id);
  if (!session_id) http_fail("bad session tag in challenge");
  session_tag_ = env.session_id;
  PurchaseOpen open;
  open.session_id = *session_id;
  open.nonce = b64url_decode(env.body.at("nonce").get<std::string>());
  return open;
}

OpResult<PurchaseGrant> HttpProviderPort::complete_purchase(const PurchaseRequest& req) {
  json body = {{"card_cert", req.card_cert.to_json()},
               {"content_id", req.content_id},
               {"expiry_ts", req.expiry_ts},
               {"model", req.model},
               {"payment", req.payment.to_json()},
               {"pk_tmp", b64url_encode(req.pk_tmp)},
               {"quantity", req.quantity},
               {"signature", b64url_encode(req.signature)}};
  Bytes frame = encode_envelope(env_of(MessageType::purchase_complete_request,
                                       "p" + std::to_string(req.session_id), body));
  auto res = http_->Post("/purchase/complete", bytes_str(frame), kJson);
  if (!res || res->status != 200) http_fail("purchase/complete failed");
  Envelope env = parse_env_or_fail(res->body);
  if (env.message_type == MessageType::error)
    return OpResult<PurchaseGrant>::reject(env.body.at("reason").get<std::string>());
  if (env.message_type != MessageType::purchase_complete_response)
    http_fail("unexpected purchase/complete answer");
  PurchaseGrant grant;
  grant.encrypted_ck = b64url_decode(env.body.at("encrypted_ck").get<std::string>());
  grant.encrypted_license =
      b64url_decode(env.body.at("encrypted_license").get<std::string>());
  grant.license_signature =
      b64url_decode(env.body.at("license_signature").get<std::string>());
  return OpResult<PurchaseGrant>::success(std::move(grant));
}

HttpDistributorPort::HttpDistributorPort(const std::string& host, int port,
                                         uint64_t tag_seed)
    : http_(std::make_unique<httplib::Client>(host, port)), tag_rng_(tag_seed) {}

HttpDistributorPort::~HttpDistributorPort() = default;

Certificate HttpDistributorPort::distributor_cert() {
  auto res = http_->Get("/identity");
  if (!res || res->status != 200) http_fail("identity unavailable");
  return Certificate::from_json(parse_json_or_fail(res->body).at("cert"));
}

Certificate HttpDistributorPort::issue_session_cert() {
  session_tag_ = "d" + to_hex(tag_rng_.bytes(4));
  Bytes frame =
      encode_envelope(env_of(MessageType::cert_request, session_tag_, json::object()));
  auto res = http_->Post("/cert", bytes_str(frame), kJson);
  if (!res || res->status != 200) http_fail("cert request failed");
  Envelope env = parse_env_or_fail(res->body);
  if (env.message_type != MessageType::cert_response) http_fail("unexpected cert answer");
  return Certificate::from_json(env.body.at("cert"));
}

OpResult<ExecutionTicket> HttpDistributorPort::execute_content(
    const std::string& cert_id, const Bytes& reencrypted_ck,
    const std::string& content_id) {
  json body = {{"cert_id", cert_id},
               {"content_id", content_id},
               {"reencrypted_ck", b64url_encode(reencrypted_ck)}};
  Bytes frame = encode_envelope(env_of(MessageType::execute_request, session_tag_, body));
  auto res = http_->Post("/execute", bytes_str(frame), kJson);
  if (!res || res->status != 200) http_fail("execute failed");
  json j = parse_json_or_fail(res->body);
  if (j.contains("message_type")) {
    Envelope env = parse_env_or_fail(res->body);
    if (env.message_type == MessageType::error)
      return OpResult<ExecutionTicket>::reject(
          env.body.at("reason").get<std::string>());
    http_fail("unexpected execute answer");
  }
  ExecutionTicket t;
  t.resume_token = j.at("resume_token").get<std::string>();
  t.chunk_count = j.at("chunk_count").get<uint64_t>();
  t.content_size = j.at("content_size").get<uint64_t>();
  t.chunk_size = j.at("chunk_size").get<uint64_t>();
  return OpResult<ExecutionTicket>::success(std::move(t));
}

OpResult<StreamChunk> HttpDistributorPort::fetch_chunk(const std::string& resume_token,
                                                       uint64_t seq) {
  httplib::Params params{
      {"token", resume_token}, {"seq", std::to_string(seq)}, {"tag", session_tag_}};
  auto res = http_->Get("/chunk", params, httplib::Headers{});
  if (!res || res->status != 200) http_fail("chunk fetch failed");
  Envelope env = parse_env_or_fail(res->body);
  if (env.message_type == MessageType::error)
    return OpResult<StreamChunk>::reject(env.body.at("reason").get<std::string>());
  if (env.message_type != MessageType::stream_chunk) http_fail("unexpected chunk answer");
  StreamChunk chunk;
  chunk.data = b64url_decode(env.body.at("data").get<std::string>());
  chunk.last = env.body.at("last").get<bool>();
  chunk.seq = static_cast<uint64_t>(env.body.at("seq").get<int64_t>());
  return OpResult<StreamChunk>::success(std::move(chunk));
}

Bytes http_fetch_content(const std::string& host, int port,
                         const std::string& content_id) {
  httplib::Client cli(host, port);
  auto res = cli.Get("/content/" + content_id);
  if (!res || res->status != 200) http_fail("content fetch failed: " + content_id);
  return str_bytes(res->body);
}

}  // namespace drmmesh
