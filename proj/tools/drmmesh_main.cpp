// Operator entry point: scenario setup, protocol runs, the adversarial
// suite, and timing, over either the in-process simulation or loopback
// HTTP services.  Every command prints one JSON report to stdout; failures
// exit nonzero with a stage-tagged reason in the report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "drmmesh/attacks.hpp"
#include "drmmesh/bench.hpp"
#include "drmmesh/service.hpp"

using namespace drmmesh;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Scenario configuration.

struct CatalogRow {
  std::string content_id;
  std::string title;
  std::string rating;
  int64_t unit_price = 0;
  uint64_t size = 0;
};

struct ScenarioConfig {
  std::string backend = "transparent";
  uint64_t seed = 0;
  std::string mode = "sim";
  size_t distributors = 2;
  size_t users = 1;
  std::string pin = "1234";
  CivilDate dob{2000, 3, 15};
  std::string country = "IE";
  std::vector<CatalogRow> catalog;  // empty = the built-in demo titles
  std::vector<std::string> models = {"execute_at_most_n", "pay_per_execute",
                                     "execute_until", "flatrate"};
  FaultPlan faults;  // applied to every execution's chunk stream
};

std::string format_date(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

CivilDate parse_date(const std::string& text) {
  CivilDate d;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c", &d.year, &d.month, &d.day, &extra) != 3 ||
      d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw Error("bad date (want YYYY-MM-DD): " + text);
  return d;
}

FaultKind parse_fault_kind(const std::string& name) {
  if (name == "drop") return FaultKind::drop;
  if (name == "duplicate") return FaultKind::duplicate;
  if (name == "reorder") return FaultKind::reorder;
  if (name == "tamper") return FaultKind::tamper;
  throw Error("bad fault kind: " + name);
}

std::string fault_kind_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::drop: return "drop";
    case FaultKind::duplicate: return "duplicate";
    case FaultKind::reorder: return "reorder";
    case FaultKind::tamper: return "tamper";
  }
  return "drop";
}

json config_to_json(const ScenarioConfig& cfg) {
  json catalog = json::array();
  for (const CatalogRow& row : cfg.catalog)
    catalog.push_back({{"content_id", row.content_id},
                       {"title", row.title},
                       {"rating", row.rating},
                       {"unit_price", row.unit_price},
                       {"size", row.size}});
  json faults = json::array();
  for (const Fault& f : cfg.faults.faults)
    faults.push_back({{"index", f.index}, {"kind", fault_kind_name(f.kind)}});
  return {{"backend", cfg.backend},
          {"seed", cfg.seed},
          {"mode", cfg.mode},
          {"distributors", cfg.distributors},
          {"users", cfg.users},
          {"pin", cfg.pin},
          {"holder", {{"dob", format_date(cfg.dob)}, {"country", cfg.country}}},
          {"catalog", catalog},
          {"models", cfg.models},
          {"faults", faults}};
}

template <class T>
T take(json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  T value = it->get<T>();
  obj.erase(it);
  return value;
}

ScenarioConfig config_from_json(json obj) {
  if (!obj.is_object()) throw Error("config must be a JSON object");
  ScenarioConfig cfg;
  cfg.backend = take<std::string>(obj, "backend", cfg.backend);
  if (cfg.backend != "transparent" && cfg.backend != "production")
    throw Error("config backend must be transparent or production");
  if (auto it = obj.find("seed"); it != obj.end()) {
    if (!it->is_number_unsigned()) throw Error("config seed must be a non-negative integer");
    cfg.seed = it->get<uint64_t>();
    obj.erase(it);
  } else {
    throw Error("config requires a seed in sim mode");
  }
  cfg.mode = take<std::string>(obj, "mode", cfg.mode);
  if (cfg.mode != "sim" && cfg.mode != "service")
    throw Error("config mode must be sim or service");
  cfg.distributors = take<uint64_t>(obj, "distributors", cfg.distributors);
  if (cfg.distributors < 1) throw Error("config needs at least one distributor");
  cfg.users = take<uint64_t>(obj, "users", cfg.users);
  if (cfg.users != 1)
    throw Error("this build runs exactly one user (card) per state directory");
  cfg.pin = take<std::string>(obj, "pin", cfg.pin);
  if (auto it = obj.find("holder"); it != obj.end()) {
    json holder = *it;
    obj.erase(it);
    cfg.dob = parse_date(take<std::string>(holder, "dob", format_date(cfg.dob)));
    cfg.country = take<std::string>(holder, "country", cfg.country);
    if (!holder.empty()) throw Error("unknown holder config key: " + holder.begin().key());
  }
  if (auto it = obj.find("catalog"); it != obj.end()) {
    for (json row : *it) {
      CatalogRow r;
      r.content_id = take<std::string>(row, "content_id", "");
      r.title = take<std::string>(row, "title", "");
      r.rating = take<std::string>(row, "rating", "");
      r.unit_price = take<int64_t>(row, "unit_price", 0);
      r.size = take<uint64_t>(row, "size", 0);
      if (!row.empty()) throw Error("unknown catalog config key: " + row.begin().key());
      if (r.content_id.empty() || r.size == 0 || r.unit_price <= 0)
        throw Error("catalog rows need content_id, positive unit_price, and size");
      cfg.catalog.push_back(std::move(r));
    }
    obj.erase("catalog");
  }
  if (auto it = obj.find("models"); it != obj.end()) {
    cfg.models = it->get<std::vector<std::string>>();
    if (cfg.models.empty()) throw Error("config models list cannot be empty");
    obj.erase(it);
  }
  if (auto it = obj.find("faults"); it != obj.end()) {
    for (json row : *it) {
      Fault f;
      f.index = take<uint64_t>(row, "index", 0);
      f.kind = parse_fault_kind(take<std::string>(row, "kind", "drop"));
      if (!row.empty()) throw Error("unknown fault config key: " + row.begin().key());
      cfg.faults.faults.push_back(f);
    }
    obj.erase("faults");
  }
  if (!obj.empty()) throw Error("unknown config key: " + obj.begin().key());
  return cfg;
}

SystemParams params_for(const std::string& backend) {
  if (backend == "production") return SystemParams::production();
  if (backend == "transparent")
    return SystemParams::transparent((uint64_t{1} << 61) - 1);
  throw Error("unknown backend: " + backend + " (want transparent or production)");
}

std::unique_ptr<SimWorld> build_world(const ScenarioConfig& cfg) {
  SimWorld::Options opt;
  opt.params = params_for(cfg.backend);
  opt.seed = cfg.seed;
  opt.distributors = cfg.distributors;
  opt.pin = cfg.pin;
  opt.holder_dob = cfg.dob;
  opt.holder_country = cfg.country;
  opt.default_catalog = cfg.catalog.empty();
  auto world = std::make_unique<SimWorld>(std::move(opt));
  for (const CatalogRow& row : cfg.catalog)
    world->ingest({row.content_id, row.title, row.rating, row.unit_price},
                  world->random_plaintext(row.size));
  return world;
}

// ---------------------------------------------------------------------------
// Scripted-lossy distributor port: serves the chunk stream in the order a
// configured fault plan dictates, so a stream disruption is reproducible.

class FaultyDistributorPort final : public DistributorPort {
 public:
  FaultyDistributorPort(DistributorPort& inner, const FaultPlan& plan)
      : inner_(inner), plan_(plan) {}

  Certificate distributor_cert() override { return inner_.distributor_cert(); }
  Certificate issue_session_cert() override { return inner_.issue_session_cert(); }
  OpResult<ExecutionTicket> execute_content(const std::string& cert_id,
                                            const Bytes& reencrypted_ck,
                                            const std::string& content_id) override {
    auto r = inner_.execute_content(cert_id, reencrypted_ck, content_id);
    if (r.ok) build_script(r.value.chunk_count);
    return r;
  }
  OpResult<StreamChunk> fetch_chunk(const std::string& resume_token,
                                    uint64_t) override {
    if (call_ >= script_.size())
      return OpResult<StreamChunk>::reject("channel_closed");
    auto [seq, tampered] = script_[call_++];
    auto r = inner_.fetch_chunk(resume_token, seq);
    if (r.ok && tampered && !r.value.data.empty()) r.value.data.back() ^= 0x01;
    return r;
  }
  std::string session_tag() const override { return inner_.session_tag(); }

 private:
  void build_script(uint64_t chunk_count) {
    script_.clear();
    call_ = 0;
    auto has = [this](uint64_t i, FaultKind k) {
      for (const Fault& f : plan_.faults)
        if (f.index == i && f.kind == k) return true;
      return false;
    };
    for (uint64_t i = 0; i < chunk_count; ++i) {
      if (has(i, FaultKind::drop)) continue;
      script_.push_back({i, has(i, FaultKind::tamper)});
      if (has(i, FaultKind::duplicate)) script_.push_back({i, false});
    }
    for (const Fault& f : plan_.faults)
      if (f.kind == FaultKind::reorder && f.index + 1 < script_.size())
        std::swap(script_[f.index], script_[f.index + 1]);
  }

  DistributorPort& inner_;
  FaultPlan plan_;
  std::vector<std::pair<uint64_t, bool>> script_;
  size_t call_ = 0;
};

// ---------------------------------------------------------------------------
// Command outcomes.  The `outcome` object is what the journal stores and
// replay re-derives, so it must be transport-independent.

std::string stage_of(const std::string& reason) {
  auto colon = reason.find(':');
  return colon == std::string::npos ? "client" : reason.substr(0, colon);
}

json failure_outcome(const std::string& cmd, const std::string& reason) {
  return {{"ok", false}, {"cmd", cmd}, {"stage", stage_of(reason)}, {"reason", reason}};
}

struct PurchaseArgs {
  std::string content_id;
  std::string model = "execute_at_most_n";
  int64_t quantity = 1;
  Millis expiry_ts = 0;
};

json do_purchase(SimWorld& world, const ScenarioConfig& cfg, const std::string& mode,
                 const PurchaseArgs& args) {
  if (std::find(cfg.models.begin(), cfg.models.end(), args.model) == cfg.models.end())
    return failure_outcome("purchase", "cli:model_not_in_scenario");
  PaymentFn pay = [&world](int64_t amount) { return world.bank().issue(amount); };

  OpResult<PurchaseReceipt> r = OpResult<PurchaseReceipt>::reject("unset");
  if (mode == "service") {
    ServiceHost host;
    mount_provider_service(host, world.provider());
    int port = host.start();
    HttpProviderPort http_port("127.0.0.1", port);
    r = world.client().purchase(world.session(), http_port, args.content_id, args.model,
                                args.quantity, args.expiry_ts, pay);
  } else {
    r = world.client().purchase(world.session(), world.provider_port(), args.content_id,
                                args.model, args.quantity, args.expiry_ts, pay);
  }
  if (!r.ok) {
    json out = failure_outcome("purchase", r.reason);
    out["content_id"] = args.content_id;
    return out;
  }
  return {{"ok", true},
          {"cmd", "purchase"},
          {"content_id", r.value.content_id},
          {"model", args.model},
          {"quantity", args.quantity},
          {"paid", r.value.paid},
          {"fingerprint", to_hex(r.value.fingerprint)}};
}

struct ExecuteArgs {
  std::string content_id;
  size_t distributor = 0;
};

json do_execute(SimWorld& world, const ScenarioConfig& cfg, const std::string& mode,
                const ExecuteArgs& args) {
  if (args.distributor >= world.distributor_count())
    return failure_outcome("execute", "cli:no_such_distributor");

  OpResult<ExecutionSummary> r = OpResult<ExecutionSummary>::reject("unset");
  if (mode == "service") {
    ServiceHost host;
    mount_distributor_service(host, world.distributor(args.distributor));
    int port = host.start();
    HttpDistributorPort http_port("127.0.0.1", port,
                                  derive_seed(cfg.seed, "cli-http-tags"));
    if (cfg.faults.empty()) {
      r = world.client().execute(world.session(), http_port, args.content_id);
    } else {
      FaultyDistributorPort lossy(http_port, cfg.faults);
      r = world.client().execute(world.session(), lossy, args.content_id);
    }
  } else {
    DistributorPort& port = world.distributor_port(args.distributor);
    if (cfg.faults.empty()) {
      r = world.client().execute(world.session(), port, args.content_id);
    } else {
      FaultyDistributorPort lossy(port, cfg.faults);
      r = world.client().execute(world.session(), lossy, args.content_id);
    }
  }
  if (!r.ok) {
    json out = failure_outcome("execute", r.reason);
    out["content_id"] = args.content_id;
    out["distributor"] = args.distributor;
    return out;
  }

  bool digest_matches = false;
  try {
    digest_matches = r.value.digest == sha256(world.plaintext_of(args.content_id));
  } catch (const Error&) {
    digest_matches = false;  // content unknown to the scenario ledger
  }
  json out = {{"ok", digest_matches},
              {"cmd", "execute"},
              {"content_id", r.value.content_id},
              {"distributor", args.distributor},
              {"bytes", r.value.bytes},
              {"chunks", r.value.chunks},
              {"digest", to_hex(r.value.digest)},
              {"digest_matches", digest_matches}};
  if (!digest_matches) {
    out["stage"] = "stream";
    out["reason"] = "stream:content_digest_mismatch";
  }
  return out;
}

// ---------------------------------------------------------------------------
// State directory: a config snapshot plus an append-only journal of every
// protocol attempt.  Card and service state is never serialized; a fresh
// process rebuilds the same deterministic world and replays the journal.

struct StatePaths {
  fs::path dir;
  fs::path config_file;
  fs::path journal_file;
};

StatePaths resolve_state(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty())
    if (const char* env = std::getenv("DRMMESH_STATE_DIR")) dir = env;
  if (dir.empty())
    throw Error("no state directory: pass --state or set DRMMESH_STATE_DIR");
  StatePaths p;
  p.dir = dir;
  p.config_file = p.dir / "scenario.json";
  p.journal_file = p.dir / "journal.jsonl";
  return p;
}

ScenarioConfig load_config(const StatePaths& paths) {
  std::ifstream in(paths.config_file);
  if (!in) throw Error("state directory not initialized: " + paths.dir.string());
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw Error("unreadable scenario config: " + std::string(e.what()));
  }
  return config_from_json(std::move(obj));
}

std::vector<json> load_journal(const StatePaths& paths) {
  std::vector<json> entries;
  std::ifstream in(paths.journal_file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error("corrupt journal line: " + std::string(e.what()));
    }
  }
  return entries;
}

void append_journal(const StatePaths& paths, const json& entry) {
  std::ofstream out(paths.journal_file, std::ios::app);
  if (!out) throw Error("cannot append to journal: " + paths.journal_file.string());
  out << entry.dump() << "\n";
}

// Replays recorded attempts in order.  Replay always runs in-process: the
// transport never changes what the protocol decides, and the journal must
// re-derive byte-identical outcomes or the state is rejected as tampered.
void replay_journal(SimWorld& world, const ScenarioConfig& cfg,
                    const std::vector<json>& entries) {
  for (const json& entry : entries) {
    const std::string cmd = entry.at("cmd").get<std::string>();
    const json& args = entry.at("args");
    json expected = entry.at("outcome");
    json actual;
    if (cmd == "purchase") {
      PurchaseArgs a;
      a.content_id = args.at("content_id").get<std::string>();
      a.model = args.at("model").get<std::string>();
      a.quantity = args.at("quantity").get<int64_t>();
      a.expiry_ts = args.at("expiry_ts").get<Millis>();
      actual = do_purchase(world, cfg, "sim", a);
    } else if (cmd == "execute") {
      ExecuteArgs a;
      a.content_id = args.at("content_id").get<std::string>();
      a.distributor = args.at("distributor").get<uint64_t>();
      actual = do_execute(world, cfg, "sim", a);
    } else {
      throw Error("unknown journal command: " + cmd);
    }
    if (actual != expected)
      throw Error("state journal replay diverged on a '" + cmd +
                  "' entry; refusing to trust this state directory");
  }
}

// ---------------------------------------------------------------------------
// Reports.

void emit_report(const json& report, const std::string& report_path) {
  std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw Error("cannot write report: " + report_path);
    out << text;
  }
}

int finish(const json& outcome, const std::string& report_path) {
  emit_report(outcome, report_path);
  bool ok = outcome.value("ok", true);
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_init(const std::string& state_flag, const std::string& config_path,
             uint64_t seed_flag, bool seed_set, const std::string& backend_flag,
             const std::string& mode_flag, const std::string& report_path) {
  StatePaths paths = resolve_state(state_flag);
  if (fs::exists(paths.config_file))
    throw Error("state directory already initialized: " + paths.dir.string());

  json obj;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error("cannot read config: " + config_path);
    try {
      in >> obj;
    } catch (const json::exception& e) {
      throw Error("config is not JSON: " + std::string(e.what()));
    }
  } else {
    obj = json::object();
  }
  if (seed_set) obj["seed"] = seed_flag;
  if (!obj.contains("seed")) throw Error("config requires a seed in sim mode");
  if (!backend_flag.empty()) obj["backend"] = backend_flag;
  if (!mode_flag.empty()) obj["mode"] = mode_flag;
  ScenarioConfig cfg = config_from_json(std::move(obj));

  // A world must actually come up under this config before it is accepted.
  auto world = build_world(cfg);
  json catalog = json::array();
  for (const CatalogItem& item : world->provider().list_catalog())
    catalog.push_back({{"content_id", item.content_id},
                       {"title", item.title},
                       {"rating", item.rating},
                       {"unit_price", item.unit_price}});

  fs::create_directories(paths.dir);
  std::ofstream out(paths.config_file);
  if (!out) throw Error("cannot write scenario config: " + paths.config_file.string());
  out << config_to_json(cfg).dump(2) << "\n";
  std::ofstream journal(paths.journal_file);  // created empty

  return finish({{"ok", true},
                 {"cmd", "init"},
                 {"state_dir", paths.dir.string()},
                 {"config", config_to_json(cfg)},
                 {"catalog", catalog}},
                report_path);
}

int cmd_purchase(const std::string& state_flag, const PurchaseArgs& args,
                 const std::string& mode_flag, const std::string& report_path) {
  StatePaths paths = resolve_state(state_flag);
  ScenarioConfig cfg = load_config(paths);
  auto world = build_world(cfg);
  replay_journal(*world, cfg, load_journal(paths));

  std::string mode = mode_flag.empty() ? cfg.mode : mode_flag;
  json outcome = do_purchase(*world, cfg, mode, args);
  append_journal(paths, {{"cmd", "purchase"},
                         {"args",
                          {{"content_id", args.content_id},
                           {"model", args.model},
                           {"quantity", args.quantity},
                           {"expiry_ts", args.expiry_ts}}},
                         {"mode", mode},
                         {"outcome", outcome}});
  json report = outcome;
  report["mode"] = mode;
  return finish(report, report_path);
}

int cmd_execute(const std::string& state_flag, const ExecuteArgs& args,
                const std::string& mode_flag, const std::string& report_path) {
  StatePaths paths = resolve_state(state_flag);
  ScenarioConfig cfg = load_config(paths);
  auto world = build_world(cfg);
  replay_journal(*world, cfg, load_journal(paths));

  std::string mode = mode_flag.empty() ? cfg.mode : mode_flag;
  json outcome = do_execute(*world, cfg, mode, args);
  append_journal(paths, {{"cmd", "execute"},
                         {"args",
                          {{"content_id", args.content_id},
                           {"distributor", args.distributor}}},
                         {"mode", mode},
                         {"outcome", outcome}});
  json report = outcome;
  report["mode"] = mode;
  return finish(report, report_path);
}

int cmd_demo(uint64_t seed, const std::string& backend, const std::string& mode,
             const std::string& report_path) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.backend = backend.empty() ? "transparent" : backend;
  cfg.mode = mode.empty() ? "sim" : mode;
  auto world = build_world(cfg);

  PurchaseArgs buy;
  buy.content_id = "movie-1";
  buy.model = "execute_at_most_n";
  buy.quantity = 3;
  json purchase = do_purchase(*world, cfg, cfg.mode, buy);

  // Three allowed executions roam across both distributors; the fourth
  // must be refused by the card's usage terms.
  std::vector<size_t> stops = {0, 1, 0};
  json executions = json::array();
  int allows = 0;
  std::set<std::string> digests;
  for (size_t stop : stops) {
    ExecuteArgs run;
    run.content_id = "movie-1";
    run.distributor = stop;
    json outcome = do_execute(*world, cfg, cfg.mode, run);
    if (outcome.value("ok", false)) {
      ++allows;
      digests.insert(outcome.at("digest").get<std::string>());
    }
    executions.push_back(std::move(outcome));
  }
  ExecuteArgs extra;
  extra.content_id = "movie-1";
  extra.distributor = 1;
  json denied = do_execute(*world, cfg, cfg.mode, extra);

  bool ok = purchase.value("ok", false) && allows == 3 && digests.size() == 1 &&
            !denied.value("ok", true) &&
            denied.value("reason", "") == "card:terms_exhausted";
  json report = {{"ok", ok},
                 {"cmd", "demo"},
                 {"backend", cfg.backend},
                 {"mode", cfg.mode},
                 {"seed", seed},
                 {"purchase", purchase},
                 {"executions", executions},
                 {"denied", denied},
                 {"allows", allows},
                 {"denies", denied.value("ok", true) ? 0 : 1},
                 {"roamed_distributors", json::array({0, 1})},
                 {"digests_identical", digests.size() == 1}};
  if (!ok) {
    report["stage"] = "demo";
    report["reason"] = "demo:unexpected_outcome";
  }
  return finish(report, report_path);
}

int cmd_attack(uint64_t seed, const std::string& backend,
               const std::string& report_path) {
  SystemParams params = params_for(backend.empty() ? "transparent" : backend);
  auto outcomes = run_attack_suite(params, seed);
  json rows = json::array();
  bool all_rejected = true;
  for (const AttackOutcome& o : outcomes) {
    all_rejected &= o.rejected;
    rows.push_back({{"name", o.name},
                    {"description", o.description},
                    {"rejected", o.rejected},
                    {"detail", o.detail}});
  }
  json report = {{"ok", all_rejected},
                 {"cmd", "attack"},
                 {"backend", params.backend_id()},
                 {"seed", seed},
                 {"attacks", rows},
                 {"all_rejected", all_rejected}};
  if (!all_rejected) {
    report["stage"] = "attack";
    report["reason"] = "attack:scenario_not_rejected";
  }
  return finish(report, report_path);
}

int cmd_bench(uint64_t seed, const std::string& backend, size_t iters,
              const std::string& report_path) {
  SystemParams params = params_for(backend.empty() ? "production" : backend);
  BenchReport bench = run_bench(params, seed, iters);
  json report = bench.to_json();
  report["ok"] = true;
  report["cmd"] = "bench";
  return finish(report, report_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drmmesh: delegated content-protection testbed"};
  app.require_subcommand(1);

  std::string state_flag, config_path, backend_flag, mode_flag, report_path;
  uint64_t seed_flag = 0;

  auto add_common = [&](CLI::App* cmd, bool with_state) {
    if (with_state)
      cmd->add_option("--state", state_flag,
                      "State directory (default: $DRMMESH_STATE_DIR)");
    cmd->add_option("--backend", backend_flag, "transparent or production")
        ->check(CLI::IsMember({"transparent", "production"}));
    cmd->add_option("--mode", mode_flag, "sim (in-process) or service (loopback HTTP)")
        ->check(CLI::IsMember({"sim", "service"}));
    cmd->add_option("--report", report_path, "Also write the JSON report here");
  };

  CLI::App* init = app.add_subcommand("init", "Create a scenario state directory");
  add_common(init, true);
  init->add_option("--config", config_path, "Scenario config JSON");
  auto* init_seed = init->add_option("--seed", seed_flag, "Scenario seed");

  PurchaseArgs purchase_args;
  CLI::App* purchase = app.add_subcommand("purchase", "Buy a license for a title");
  add_common(purchase, true);
  purchase->add_option("--content", purchase_args.content_id, "Content id")->required();
  purchase->add_option("--model", purchase_args.model, "License model");
  purchase->add_option("--quantity", purchase_args.quantity, "Execution cap / count");
  purchase->add_option("--expiry", purchase_args.expiry_ts,
                       "Expiry timestamp (ms) for execute_until");

  ExecuteArgs execute_args;
  CLI::App* execute = app.add_subcommand("execute", "Stream a purchased title");
  add_common(execute, true);
  execute->add_option("--content", execute_args.content_id, "Content id")->required();
  execute->add_option("--distributor", execute_args.distributor,
                      "Distributor index (roaming)");

  CLI::App* demo = app.add_subcommand("demo", "Scripted end-to-end happy path");
  add_common(demo, false);
  uint64_t demo_seed = 42;
  demo->add_option("--seed", demo_seed, "Scenario seed");

  CLI::App* attack = app.add_subcommand("attack", "Run the adversarial suite");
  add_common(attack, false);
  uint64_t attack_seed = 31337;
  attack->add_option("--seed", attack_seed, "Scenario seed");

  CLI::App* bench = app.add_subcommand("bench", "Time the delegation pipeline");
  add_common(bench, false);
  uint64_t bench_seed = 1;
  size_t bench_iters = 100;
  bench->add_option("--seed", bench_seed, "Sampling seed");
  bench->add_option("--iters", bench_iters, "Iterations per operation (>= 100)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed())
      return cmd_init(state_flag, config_path, seed_flag, !init_seed->empty(),
                      backend_flag, mode_flag, report_path);
    if (purchase->parsed())
      return cmd_purchase(state_flag, purchase_args, mode_flag, report_path);
    if (execute->parsed())
      return cmd_execute(state_flag, execute_args, mode_flag, report_path);
    if (demo->parsed()) return cmd_demo(demo_seed, backend_flag, mode_flag, report_path);
    if (attack->parsed()) return cmd_attack(attack_seed, backend_flag, report_path);
    if (bench->parsed())
      return cmd_bench(bench_seed, backend_flag, bench_iters, report_path);
  } catch (const std::exception& e) {
    json report = {{"ok", false}, {"stage", "cli"}, {"reason", e.what()}};
    std::cout << report.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
