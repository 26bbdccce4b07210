#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mpp {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a run depends on. Unset optionals fall back to the documented
/// defaults at run time; they are serialized as null.
struct RunConfig {
  std::string command;   // check | pressure | spectral | tilted | oracle
  std::string ensemble;  // path to an ensemble file

  std::optional<double> s;
  std::optional<double> s_min, s_max, s_step;
  std::string method = "wordsum";  // wordsum | spectral | both

  std::vector<int> n_schedule;  // empty: automatic
  double schedule_budget = 1 << 20;
  std::uint64_t enumeration_cap = std::uint64_t{1} << 22;
  std::uint64_t mc_samples = 20000;

  int mesh = 512;
  std::string interp = "linear";
  double tol = 1e-12;
  int max_iter = 200000;

  std::optional<double> alpha;  // default min(s_min / 3, 1) shrunk by 1e-6
  std::uint64_t samples = 1000;  // tilted trajectories
  int tilted_n = 200;
  int halpha_n_max = 16;
  int lags = 30;
  int chains = 32;
  int chain_length = 20000;
  int martingale_n = 3;
  std::string thermo = "auto";  // auto | on | off

  int kink_window = 5;
  double kink_threshold = 10.0;

  std::string family = "reducible";  // oracle: reducible | keep-switch
  std::vector<double> params;        // oracle parameters

  std::uint64_t seed = 1;
  std::string out = "mpp_out";
  std::vector<std::string> formats{"csv", "json"};
};

std::string config_to_json(const RunConfig& c);
/// Inverse of config_to_json; missing keys keep their defaults.
RunConfig config_from_json(std::string_view text);
/// FNV-1a 64 over the compact JSON of every field except the output location
/// and formats.
std::uint64_t config_hash(const RunConfig& c);
std::string hash_hex(std::uint64_t h);

struct RunReport {
  std::string tool_version = kToolVersion;
  std::string command;
  RunConfig config;
  std::uint64_t hash = 0;
  std::string status = "ok";  // ok | failed
  std::string error_kind;
  std::string error_message;
  std::vector<std::string> warnings;
  std::string results = "{}";  // JSON object, fixed key order
  std::vector<std::string> files;
  /// Wall-clock seconds per phase. Written to timings.json only, so that the
  /// report itself is reproducible bit for bit.
  std::vector<std::pair<std::string, double>> timings;
  int exit_code = 0;
};

std::string report_to_json(const RunReport& r);

/// Exit-code contract: 0 success (warnings allowed), 2 usage or parse
/// errors, 3 numerical failure.
int exit_code_for(std::string_view error_kind);

/// Runs the configured command, writes the requested files under
/// config.out and returns the report (also written as <command>.json).
RunReport run_command(const RunConfig& c);

}  // namespace mpp
