#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "rmc/config.hpp"
#include "rmc/parallel.hpp"

#ifndef RMC_CONFIG_DIR
#define RMC_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFit = 3;

struct Common {
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<std::size_t> n_out;
};

rmc::RunConfig prepare(const std::string& path, const Common& c) {
  rmc::RunConfig cfg = rmc::load_config(path);
  if (c.seed) {
    cfg.seed = *c.seed;
  } else if (!cfg.seed_given) {
    if (const char* env = std::getenv("RMC_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw rmc::ConfigError("RMC_SEED", 0, "not an unsigned integer");
      }
    }
  }
  if (c.replications) {
    if (*c.replications < 1) throw rmc::ConfigError("--replications", 0, "must be >= 1");
    cfg.replications = *c.replications;
  }
  if (c.n_out) {
    if (*c.n_out < 1) throw rmc::ConfigError("--n-out", 0, "must be >= 1");
    cfg.n_out = *c.n_out;
  }
  const unsigned threads = c.threads ? c.threads : cfg.threads;
  if (threads) rmc::set_thread_count(threads);
  return cfg;
}

void print_summary(const nlohmann::json& s) {
  std::cout << std::fixed << std::setprecision(4) << s["name"].get<std::string>() << ": V = "
            << s["value"].get<double>() << " (se " << s["se"].get<double>() << ")";
  if (s.contains("sd")) std::cout << ", sd across runs " << s["sd"].get<double>();
  std::cout << ", sims " << s["sims"]["total"].get<std::uint64_t>() << ", "
            << std::setprecision(1) << s["wall_time_s"].get<double>() << " s\n";
}

fs::path resolve_suite(const std::string& suite) {
  if (fs::exists(suite)) return suite;
  const fs::path dir = std::getenv("RMC_CONFIG_DIR") ? std::getenv("RMC_CONFIG_DIR") : RMC_CONFIG_DIR;
  for (const fs::path p : {dir / "bench" / (suite + ".yaml"), dir / (suite + ".yaml")})
    if (fs::exists(p)) return p;
  throw rmc::ConfigError(suite, 0, "no such bench suite");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bermudan option pricing by regression Monte Carlo with kriging surrogates"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (default: all cores)");

  std::string config_path, out_path, suite;
  int date = 0;

  auto* price = app.add_subcommand("price", "Price one configuration and write the summary JSON");
  price->add_option("config", config_path, "YAML config")->required();
  price->add_option("--out,-o", out_path, "Summary JSON path (default: stdout)");
  price->add_option("--seed", common.seed, "Master seed (overrides config and RMC_SEED)");
  price->add_option("--replications", common.replications, "Independent runs");
  price->add_option("--n-out", common.n_out, "Out-of-sample paths");

  auto* exp = app.add_subcommand("export-design", "Write the macro-design at one exercise date as CSV");
  exp->add_option("config", config_path, "YAML config")->required();
  exp->add_option("--t", date, "Exercise-date index (1..n_exercise-1)")->required();
  exp->add_option("--out,-o", out_path, "CSV path (default: stdout)");
  exp->add_option("--seed", common.seed, "Master seed");

  auto* bench = app.add_subcommand("bench", "Run a bundled suite and write a comparison CSV");
  bench->add_option("suite", suite, "Suite name or YAML file")->required();
  bench->add_option("--out,-o", out_path, "CSV path (default: stdout)");
  bench->add_option("--replications", common.replications, "Override runs per config");
  bench->add_option("--n-out", common.n_out, "Override out-of-sample paths");

  CLI11_PARSE(app, argc, argv);

  auto open_out = [&](std::ofstream& f) -> std::ostream& {
    if (out_path.empty()) return std::cout;
    f.open(out_path);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    return f;
  };

  try {
    if (*price) {
      const rmc::RunConfig cfg = prepare(config_path, common);
      const nlohmann::json summary = rmc::run_job(cfg);
      std::ofstream f;
      if (out_path.empty()) {
        std::cout << summary.dump(2) << '\n';
      } else {
        open_out(f) << summary.dump(2) << '\n';
        print_summary(summary);
      }
    } else if (*exp) {
      const rmc::RunConfig cfg = prepare(config_path, common);
      if (date < 1 || date >= cfg.grid.n_exercise)
        throw rmc::ConfigError("--t", 0, "date must be in 1.." + std::to_string(cfg.grid.n_exercise - 1));
      const rmc::Design d = rmc::export_design(cfg, date);
      std::ofstream f;
      rmc::write_design_csv(open_out(f), d);
    } else if (*bench) {
      const fs::path suite_path = resolve_suite(suite);
      YAML::Node doc;
      try {
        doc = YAML::LoadFile(suite_path.string());
      } catch (const YAML::Exception& e) {
        throw rmc::ConfigError(suite_path.string(), e.mark.line + 1, e.msg);
      }
      if (!doc["configs"] || !doc["configs"].IsSequence())
        throw rmc::ConfigError(suite_path.string(), 1, "suite needs a 'configs' list");
      std::ofstream f;
      std::ostream& os = open_out(f);
      os << "config,method,design,budget,replications,value,se,sd,reference,sims_total,wall_time_s\n";
      for (const auto& entry : doc["configs"]) {
        const std::string rel = entry["config"] ? entry["config"].as<std::string>() : entry.as<std::string>();
        const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : suite_path.parent_path() / rel;
        const rmc::RunConfig cfg = prepare(p.string(), common);
        const nlohmann::json s = rmc::run_job(cfg);
        print_summary(s);
        os << std::fixed << std::setprecision(4) << s["name"].get<std::string>() << ','
           << s["method"].get<std::string>() << ','
           << (s.contains("design") ? s["design"].get<std::string>() : std::string("global")) << ','
           << s["budget"].get<std::size_t>() << ',' << s["replications"].get<int>() << ','
           << s["value"].get<double>() << ',' << s["se"].get<double>() << ','
           << (s.contains("sd") ? std::to_string(s["sd"].get<double>()) : std::string()) << ','
           << (entry.IsMap() && entry["reference"] ? entry["reference"].as<std::string>() : std::string())
           << ',' << s["sims"]["total"].get<std::uint64_t>() << ','
           << std::setprecision(2) << s["wall_time_s"].get<double>() << '\n';
        os.flush();
      }
    }
  } catch (const rmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rmc::FitFailure& e) {
    std::cerr << "fit failure: " << e.what() << '\n';
    return kExitFit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
