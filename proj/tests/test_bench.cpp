#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drmmesh/bench.hpp"

using namespace drmmesh;

TEST_CASE("transparent backend timing is refused with an explanation") {
  try {
    run_bench(SystemParams::transparent(101), 1, 100);
    FAIL("transparent benchmark was accepted");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("transparent") != std::string::npos);
    CHECK(msg.find("production") != std::string::npos);
  }
}

TEST_CASE("too few iterations are refused") {
  CHECK_THROWS_AS(run_bench(SystemParams::production(), 1, 99), Error);
}

TEST_CASE("production pipeline timings are complete and consistent") {
  BenchReport report = run_bench(SystemParams::production(), 7, 100);
  CHECK(report.backend == "production");
  CHECK(report.order_bits > 100);
  CHECK(report.iterations == 100);

  for (const std::string& op : {"keygen", "rekeygen", "encrypt_second", "reencrypt",
                                "decrypt_first", "execute"}) {
    const BenchStat& s = report.stat(op);
    INFO(op);
    CHECK(s.iterations == 100);
    CHECK(s.min_ms >= 0.0);
    CHECK(s.min_ms <= s.median_ms);
    CHECK(s.median_ms <= s.p95_ms);
    CHECK(s.p95_ms <= s.max_ms);
    CHECK(s.mean_ms >= s.min_ms);
    CHECK(s.mean_ms <= s.max_ms);
  }
  CHECK_THROWS_AS(report.stat("teleport"), Error);

  json j = report.to_json();
  CHECK(j.at("ops").size() == 6);
  CHECK(j.at("reencrypt_median_ms").get<double>() ==
        report.stat("reencrypt").median_ms);
  CHECK(j.at("reencrypt_median_budget_ms").get<double>() == kReencryptMedianBudgetMs);
  CHECK(j.at("within_budget").is_boolean());
}
