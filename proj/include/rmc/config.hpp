#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmc/contracts.hpp"
#include "rmc/engine.hpp"
#include "rmc/lsmc.hpp"
#include "rmc/market_models.hpp"

namespace rmc {

// Invalid configuration; line is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

enum class MethodKind { Kriging, LsmcPoly, LsmcBw11 };

MethodKind parse_method_kind(const std::string& name);
std::string to_string(MethodKind k);

enum class DomainConstraint { None, InTheMoney };

struct RunConfig {
  std::string name;

  // model
  bool sv = false;
  GbmParams gbm;
  SvParams sv_params;
  TimeGrid grid;

  ContractSpec contract;

  // method
  MethodKind method = MethodKind::Kriging;
  std::size_t budget = 3000;  // N
  DesignConfig design;        // kriging; domain constraint resolved from `constraint`
  DomainConstraint constraint = DomainConstraint::None;
  RegressionConfig regression;
  BasisSpec basis;            // lsmc

  // run
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::uint64_t oos_seed = 1;
  std::size_t n_out = 100000;
  int replications = 1;
  unsigned threads = 0;  // 0 keeps the default

  std::optional<std::string> diagnostics_dir;

  MarketModel model() const;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// Runs every replication and returns the summary document. The wall-time
// field is "wall_time_s"; every other field depends only on the config.
nlohmann::json run_job(const RunConfig& cfg);

// Macro-design at the given date (policy built backward from T down to it).
Design export_design(const RunConfig& cfg, int date);

}  // namespace rmc
