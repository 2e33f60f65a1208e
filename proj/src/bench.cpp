#include "drmmesh/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace drmmesh {

namespace {

BenchStat summarize(std::string op, std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const size_t n = samples.size();
  BenchStat s;
  s.op = std::move(op);
  s.iterations = n;
  s.min_ms = samples.front();
  s.max_ms = samples.back();
  s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / double(n);
  s.median_ms =
      n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2.0;
  size_t p95_index = size_t(std::ceil(0.95 * double(n)));
  s.p95_ms = samples[std::min(n, p95_index) - 1];
  return s;
}

template <class F>
BenchStat time_op(const std::string& op, size_t iters, F&& f) {
  std::vector<double> ms(iters);
  for (size_t i = 0; i < iters; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f(i);
    auto t1 = std::chrono::steady_clock::now();
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  return summarize(op, std::move(ms));
}

}  // namespace

json BenchStat::to_json() const {
  return {{"op", op},           {"iterations", iterations}, {"median_ms", median_ms},
          {"p95_ms", p95_ms},   {"mean_ms", mean_ms},       {"min_ms", min_ms},
          {"max_ms", max_ms}};
}

const BenchStat& BenchReport::stat(const std::string& op) const {
  for (const BenchStat& s : stats)
    if (s.op == op) return s;
  throw Error("no benchmark stat for op: " + op);
}

json BenchReport::to_json() const {
  json ops = json::array();
  for (const BenchStat& s : stats) ops.push_back(s.to_json());
  const BenchStat& re = stat("reencrypt");
  return {{"backend", backend},
          {"order_bits", order_bits},
          {"iterations", iterations},
          {"ops", ops},
          {"reencrypt_median_ms", re.median_ms},
          {"reencrypt_median_budget_ms", kReencryptMedianBudgetMs},
          {"within_budget", re.median_ms < kReencryptMedianBudgetMs},
          {"reencrypt_p95_ms", re.p95_ms},
          {"reencrypt_p95_target_ms", kReencryptP95TargetMs},
          {"within_p95_target", re.p95_ms < kReencryptP95TargetMs}};
}

BenchReport run_bench(const SystemParams& params, uint64_t seed, size_t iterations) {
  if (params.backend_id() == "transparent")
    throw Error(
        "benchmark refused on the transparent backend: its group elements are "
        "plain integers standing in for curve points, so its timings say "
        "nothing about deployment cost -- run against the production backend");
  if (iterations < 100)
    throw Error("benchmark needs at least 100 iterations for stable percentiles");

  SeededRng rng(derive_seed(seed, "bench"));
  BenchReport report;
  report.backend = params.backend_id();
  report.order_bits = mpz_sizeinbase(params.order().get_mpz_t(), 2);
  report.iterations = iterations;

  report.stats.push_back(
      time_op("keygen", iterations, [&](size_t) { pre_keygen(params, rng); }));

  PreKeyPair delegator = pre_keygen(params, rng);
  std::vector<PreKeyPair> delegatees;
  delegatees.reserve(iterations);
  for (size_t i = 0; i < iterations; ++i) delegatees.push_back(pre_keygen(params, rng));

  report.stats.push_back(time_op("rekeygen", iterations, [&](size_t i) {
    pre_rekeygen(params, delegator, delegatees[i].pub);
  }));

  std::vector<Element> messages;
  messages.reserve(iterations);
  for (size_t i = 0; i < iterations; ++i)
    messages.push_back(pre_random_message(params, rng));

  std::vector<PreCiphertext> originals;
  originals.reserve(iterations);
  report.stats.push_back(time_op("encrypt_second", iterations, [&](size_t i) {
    originals.push_back(pre_encrypt_second(params, messages[i], delegator.pub, rng));
  }));

  Element rk = pre_rekeygen(params, delegator, delegatees[0].pub);
  std::vector<PreCiphertext> delegated;
  delegated.reserve(iterations);
  report.stats.push_back(time_op("reencrypt", iterations, [&](size_t i) {
    delegated.push_back(pre_reencrypt(params, originals[i], rk));
  }));

  report.stats.push_back(time_op("decrypt_first", iterations, [&](size_t i) {
    Element m = pre_decrypt_first(params, delegated[i], delegatees[0]);
    if (!(m == messages[i])) throw Error("benchmark self-check failed: bad round-trip");
  }));

  SimWorld::Options opt;
  opt.params = params;
  opt.seed = derive_seed(seed, "bench-world");
  opt.distributors = 1;
  SimWorld world(std::move(opt));
  auto bought = world.purchase("movie-2", "execute_at_most_n",
                               static_cast<int64_t>(iterations));
  if (!bought.ok) throw Error("benchmark setup purchase failed: " + bought.reason);
  Bytes want = sha256(world.plaintext_of("movie-2"));
  report.stats.push_back(time_op("execute", iterations, [&](size_t) {
    auto run = world.execute("movie-2");
    if (!run.ok) throw Error("benchmark execution failed: " + run.reason);
    if (run.value.digest != want)
      throw Error("benchmark self-check failed: content digest mismatch");
  }));

  return report;
}

}  // namespace drmmesh
