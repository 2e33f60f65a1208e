#pragma once

#include <thread>

#include "drmmesh/client.hpp"

namespace httplib {
class Server;
class Client;
}  // namespace httplib

namespace drmmesh {

// ---------------------------------------------------------------------------
// HTTP face of the two services.  Protocol messages travel as the same
// envelope JSON the simulator records; catalog rows, quotes, protected
// blobs, and execution tickets are plain JSON or raw bytes, since they sit
// outside the privacy-sensitive message set.
//
// Routes -- provider:
//   GET  /catalog              -> {"items": [...]}
//   GET  /quote?content_id=&model=&quantity=   -> price JSON or 400
//   GET  /content/<id>         -> protected blob (octet-stream) or 404
//   POST /purchase/open        -> purchase_challenge envelope
//   POST /purchase/complete    -> purchase_complete_response or error envelope
// distributor:
//   GET  /identity             -> {"cert": {...}}
//   POST /cert                 -> cert_response envelope
//   POST /execute              -> ticket JSON or error envelope
//   GET  /chunk?token=&seq=&tag=  -> stream_chunk or error envelope
//
// Malformed envelopes are HTTP 400; protocol rejections are HTTP 200 with
// an error envelope, because a refusal is a well-formed protocol answer.

class ServiceHost {
 public:
  ServiceHost();
  ~ServiceHost();
  ServiceHost(const ServiceHost&) = delete;
  ServiceHost& operator=(const ServiceHost&) = delete;

  // Binds to an ephemeral localhost port and serves until stop().
  int start();
  void stop();
  int port() const { return port_; }
  httplib::Server& server() { return *server_; }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// Mounts the provider routes onto a host's server.
void mount_provider_service(ServiceHost& host, ContentProvider& provider);
// Mounts the distributor routes onto a host's server.
void mount_distributor_service(ServiceHost& host, ContentDistributor& distributor);

// ---------------------------------------------------------------------------
// Client-side ports speaking the HTTP dialect.

class HttpProviderPort final : public ProviderPort {
 public:
  HttpProviderPort(const std::string& host, int port);
  ~HttpProviderPort();
  std::vector<CatalogItem> list_catalog() override;
  PriceQuote quote(const std::string& content_id, const std::string& model,
                   int64_t quantity) override;
  PurchaseOpen open_purchase() override;
  OpResult<PurchaseGrant> complete_purchase(const PurchaseRequest& req) override;
  std::string session_tag() const override { return session_tag_; }

 private:
  std::unique_ptr<httplib::Client> http_;
  std::string session_tag_;
};

class HttpDistributorPort final : public DistributorPort {
 public:
  HttpDistributorPort(const std::string& host, int port, uint64_t tag_seed = 1);
  ~HttpDistributorPort();
  Certificate distributor_cert() override;
  Certificate issue_session_cert() override;
  OpResult<ExecutionTicket> execute_content(const std::string& cert_id,
                                            const Bytes& reencrypted_ck,
                                            const std::string& content_id) override;
  OpResult<StreamChunk> fetch_chunk(const std::string& resume_token,
                                    uint64_t seq) override;
  std::string session_tag() const override { return session_tag_; }

 private:
  std::unique_ptr<httplib::Client> http_;
  SeededRng tag_rng_;
  std::string session_tag_;
};

// Fetches a provider's protected blob over HTTP (distributor-side cache
// miss path in a service deployment).
Bytes http_fetch_content(const std::string& host, int port, const std::string& content_id);

}  // namespace drmmesh
