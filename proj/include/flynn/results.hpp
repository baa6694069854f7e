#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flynn/csv.hpp"
#include "flynn/error.hpp"

#ifndef _WIN32
#include <sys/utsname.h>
#endif

namespace flynn {

inline constexpr const char* kResultsSchema = "flynn-results-v1";

// One row per (method, params, fold, repetition). The seed column is enough
// to replay the row in isolation.
struct ResultRecord {
  std::string experiment_id;
  std::string method;
  std::string params;
  int fold = -1;        // -1 when the row is not fold-scoped
  int repetition = 0;
  double accuracy = std::nan("");
  double normalized_accuracy = std::nan("");
  double wall_time_ms = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t seed = 0;
};

class ResultsWriter {
 public:
  void add(ResultRecord record) { rows_.push_back(std::move(record)); }
  const std::vector<ResultRecord>& rows() const { return rows_; }

  // zero_timings replaces wall-clock values with 0 so two runs of the same
  // config produce byte-identical files on the deterministic paths.
  void write(const std::string& path, bool zero_timings = false) const {
    std::ofstream out(path);
    if (!out) throw DataError("results: cannot write '" + path + "'");
    out << "# schema=" << kResultsSchema << '\n';
    out << "experiment_id,method,params,fold,repetition,accuracy,"
           "normalized_accuracy,wall_time_ms,bytes_sent,bytes_received,seed\n";
    for (const auto& r : rows_) {
      out << r.experiment_id << ',' << r.method << ',' << r.params << ','
          << r.fold << ',' << r.repetition << ',' << cell(r.accuracy) << ','
          << cell(r.normalized_accuracy) << ','
          << cell(zero_timings ? 0.0 : r.wall_time_ms) << ',' << r.bytes_sent
          << ',' << r.bytes_received << ',' << r.seed << '\n';
    }
    if (!out) throw DataError("results: write failed for '" + path + "'");
  }

 private:
  static std::string cell(double v) {
    return std::isnan(v) ? std::string() : format_double(v);
  }

  std::vector<ResultRecord> rows_;
};

// Run manifest: config echo plus enough host information to interpret the
// timing columns.
inline void write_manifest(const std::string& path,
                           const nlohmann::json& config_echo,
                           const std::string& experiment_id) {
  nlohmann::json manifest;
  manifest["schema"] = kResultsSchema;
  manifest["experiment_id"] = experiment_id;
  manifest["config"] = config_echo;
  manifest["hardware_threads"] = std::thread::hardware_concurrency();
#ifndef _WIN32
  utsname uts{};
  if (uname(&uts) == 0) {
    manifest["host"] = {{"sysname", uts.sysname},
                        {"release", uts.release},
                        {"machine", uts.machine}};
  }
#endif
#ifdef __VERSION__
  manifest["compiler"] = __VERSION__;
#endif
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write '" + path + "'");
  out << manifest.dump(2) << '\n';
}

inline double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

inline double std_error_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (static_cast<double>(values.size()) - 1.0) /
                   static_cast<double>(values.size()));
}

}  // namespace flynn
