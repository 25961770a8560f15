#include <doctest.h>

#include <cmath>

#include "fedsparse/ledger.hpp"

using namespace fedsparse;

TEST_CASE("sparse and dense bit formulas") {
  CHECK(sparse_bits(1000, 0.1) == 9600);
  CHECK(dense_bits(1000) == 64000);
  CHECK_THROWS(sparse_bits(0, 0.1));
  CHECK_THROWS(sparse_bits(10, 0.0));
  CHECK_THROWS(sparse_bits(10, 1.5));
}

TEST_CASE("dense update volumes match the published model table within 5%") {
  struct Row {
    std::uint64_t params;
    double mib;
  };
  // MNIST MLP/CNN, CIFAR MLP, VGG16
  const Row rows[] = {{159010, 1.2}, {582026, 4.44}, {5852170, 44.6},
                      {14728266, 112.0}};
  for (const auto& row : rows) {
    const double computed = dense_update_mib(row.params);
    CHECK(std::fabs(computed - row.mib) / row.mib < 0.05);
  }
}

TEST_CASE("measure_update separates payload from framing") {
  SparseUpdate empty;
  empty.layer_shapes = {{4}, {4}};
  empty.layers = {{}, {}};
  const auto e = measure_update(empty);
  CHECK(e.payload_bits == 0);
  CHECK(e.framing_bits == 32 * 3);

  SparseUpdate five;
  five.layer_shapes = {{16}};
  five.layers = {{{0, 1.0}, {2, 2.0}, {5, 3.0}, {7, 4.0}, {9, 5.0}}};
  CHECK(measure_update(five).payload_bits == 480);

  // payload equals the idealized formula when entries = floor(m*s)
  CHECK(measure_update(five).payload_bits ==
        sparse_bits(16, 5.0 / 16.0));
}

TEST_CASE("measured payload matches encoded wire size minus framing") {
  SparseUpdate u;
  u.layer_shapes = {{8}, {3}};
  u.layers = {{{1, 0.5}, {6, -0.25}}, {{0, 1.0}}};
  const auto cost = measure_update(u);
  CHECK(cost.payload_bits + cost.framing_bits == encode(u).size() * 8);
}

namespace {

std::vector<RoundRecord> ramp_records(int rounds, double final_acc,
                                      std::uint64_t up, std::uint64_t down) {
  std::vector<RoundRecord> records;
  for (int i = 0; i < rounds; ++i) {
    RoundRecord r;
    r.round = i;
    r.accuracy = final_acc * (i + 1) / rounds;
    r.upload_bits = up;
    r.download_bits = down;
    records.push_back(r);
  }
  return records;
}

}  // namespace

TEST_CASE("cost_report n_target and Eq-7 identity") {
  const auto records = ramp_records(20, 0.9, 1000, 2000);
  const auto report = cost_report(records, 0.95, 10, 100);
  REQUIRE(report.rounds_to_target.has_value());
  // converged = mean of last 10 rounds of the ramp
  double conv = 0.0;
  for (int i = 10; i < 20; ++i) conv += 0.9 * (i + 1) / 20;
  conv /= 10;
  CHECK(report.converged_accuracy == doctest::Approx(conv));
  CHECK(report.total_bits ==
        doctest::Approx(*report.rounds_to_target * 10.0 *
                        (report.upload_bits_per_client +
                         report.download_bits_per_client)));
}

TEST_CASE("single-round run at target yields n_target = 1") {
  std::vector<RoundRecord> records(1);
  records[0].round = 0;
  records[0].accuracy = 0.8;
  records[0].upload_bits = 10;
  records[0].download_bits = 10;
  const auto report = cost_report(records, 0.95, 1, 10);
  CHECK(report.rounds_to_target == 1);
}

TEST_CASE("n_target is the first round at or above the target") {
  std::vector<RoundRecord> dec(12);
  for (int i = 0; i < 12; ++i) {
    dec[i].round = i;
    dec[i].accuracy = i < 2 ? 0.05 : 0.5;
  }
  // converged = 0.5, target 0.5; rounds 0,1 miss, round 2 hits
  const auto report = cost_report(dec, 1.0, 1, 10);
  CHECK(report.rounds_to_target == 3);
}

TEST_CASE("dense pipeline per-round upload equals the dense formula") {
  std::vector<RoundRecord> records(3);
  const std::uint64_t m = 159010;
  for (int i = 0; i < 3; ++i) {
    records[i].round = i;
    records[i].accuracy = 1.0;
    records[i].upload_bits = 10 * dense_bits(m);  // 10 clients
    records[i].download_bits = 10 * dense_bits(m);
  }
  const auto report = cost_report(records, 0.95, 10, m);
  CHECK(report.upload_bits_per_client == doctest::Approx(dense_bits(m)));
  CHECK(report.upload_ratio_vs_dense == doctest::Approx(1.0));
}

TEST_CASE("format_cost_table includes baseline multiplier") {
  const auto records = ramp_records(10, 0.9, 960, 6400);
  const auto a = cost_report(records, 0.95, 2, 100);
  const auto table = format_cost_table({"base", "other"}, {a, a});
  CHECK(table.find("base") != std::string::npos);
  CHECK(table.find("x1") != std::string::npos);  // self-comparison
}
