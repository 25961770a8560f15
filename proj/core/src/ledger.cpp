#include "fedsparse/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fedsparse {

std::uint64_t sparse_bits(std::uint64_t m, double s) {
  if (m == 0) throw std::invalid_argument("sparse_bits: m must be > 0");
  if (!(s > 0.0 && s <= 1.0))
    throw std::invalid_argument("sparse_bits: s out of (0, 1]");
  const auto entries =
      static_cast<std::uint64_t>(std::floor(static_cast<double>(m) * s));
  return entries * kEntryBits;
}

std::uint64_t dense_bits(std::uint64_t m) {
  if (m == 0) throw std::invalid_argument("dense_bits: m must be > 0");
  return m * kValueBits;
}

WireCost measure_update(const SparseUpdate& update) {
  WireCost cost;
  cost.payload_bits = kEntryBits * update.entry_count();
  cost.framing_bits = 32ull * (1 + update.layers.size());
  return cost;
}

CostReport cost_report(const std::vector<RoundRecord>& records,
                       double target_fraction, int clients_per_round,
                       std::uint64_t model_params) {
  if (records.empty())
    throw std::invalid_argument("cost_report: no round records");
  if (!(target_fraction > 0.0 && target_fraction <= 1.0))
    throw std::invalid_argument("cost_report: target_fraction out of (0, 1]");

  CostReport report;
  const std::size_t window = std::min<std::size_t>(10, records.size());
  double acc_sum = 0.0;
  for (std::size_t i = records.size() - window; i < records.size(); ++i)
    acc_sum += records[i].accuracy;
  report.converged_accuracy = acc_sum / static_cast<double>(window);
  report.target_accuracy = target_fraction * report.converged_accuracy;

  for (const auto& r : records) {
    if (r.accuracy >= report.target_accuracy) {
      report.rounds_to_target = r.round + 1;  // rounds are 0-based
      break;
    }
  }

  double up = 0.0, down = 0.0;
  for (const auto& r : records) {
    up += static_cast<double>(r.upload_bits);
    down += static_cast<double>(r.download_bits);
  }
  const double per_client =
      static_cast<double>(records.size()) * clients_per_round;
  report.upload_bits_per_client = up / per_client;
  report.download_bits_per_client = down / per_client;
  report.upload_ratio_vs_dense =
      report.upload_bits_per_client /
      static_cast<double>(dense_bits(model_params));

  if (report.rounds_to_target) {
    report.total_bits = static_cast<double>(*report.rounds_to_target) *
                        clients_per_round *
                        (report.upload_bits_per_client +
                         report.download_bits_per_client);
  }
  return report;
}

std::string format_cost_table(const std::vector<std::string>& names,
                              const std::vector<CostReport>& reports) {
  if (names.size() != reports.size() || names.empty())
    throw std::invalid_argument("format_cost_table: names/reports mismatch");

  std::ostringstream out;
  out << "run                  n_target  conv_acc  c_up(bits)     "
         "upload_ratio  total(bits)    vs_baseline\n";
  const double base_total = reports[0].total_bits;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << names[i];
    for (std::size_t pad = names[i].size(); pad < 21; ++pad) out << ' ';
    if (r.rounds_to_target)
      out << *r.rounds_to_target << "\t";
    else
      out << "not-reached\t";
    out << r.converged_accuracy << "\t" << r.upload_bits_per_client << "\t"
        << r.upload_ratio_vs_dense << "\t" << r.total_bits << "\t";
    if (base_total > 0.0 && r.total_bits > 0.0)
      out << "x" << base_total / r.total_bits;
    else
      out << "-";
    out << "\n";
  }
  return out.str();
}

double dense_update_mib(std::uint64_t m) {
  return static_cast<double>(dense_bits(m)) / 8.0 / (1024.0 * 1024.0);
}

}  // namespace fedsparse
