// Benchmark acceptance checks. One line per check:
//   [PASS] C<n> <what>: <observed> (target <window>)
// Exit status is 0 only when every check of the selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../oracles/binomial_tree.hpp"
#include "rmc/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Check {
  std::string what;
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string window(double lo, double hi) { return "[" + fmt(lo, 3) + ", " + fmt(hi, 3) + "]"; }

Check in_window(const std::string& what, double v, double lo, double hi) {
  return {what, v >= lo && v <= hi, fmt(v) + " (target " + window(lo, hi) + ")"};
}

Check at_most(const std::string& what, double v, double hi, int digits = 4) {
  return {what, v <= hi, fmt(v, digits) + " (target <= " + fmt(hi, digits) + ")"};
}

class Runner {
 public:
  explicit Runner(fs::path dir) : dir_(std::move(dir)) {}

  rmc::RunConfig config(const std::string& name) const {
    return rmc::load_config((dir_ / (name + ".yaml")).string());
  }

  json price(const rmc::RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    json s = rmc::run_job(cfg);
    elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  " << cfg.name << ": V = " << fmt(s["value"].get<double>()) << " over "
              << cfg.replications << " run(s)\n";
    return s;
  }

  json price(const std::string& name) { return price(config(name)); }

  double elapsed() const { return elapsed_; }

 private:
  fs::path dir_;
  double elapsed_ = 0.0;
};

// Each run stays below the reference plus three of its standard errors.
Check low_bias(const json& s, double reference) {
  double worst = -1e300;
  for (const auto& r : s["runs"])
    worst = std::max(worst, r["value"].get<double>() - (reference + 3.0 * r["se"].get<double>()));
  return {"every run <= " + fmt(reference, 3) + " + 3 SE", worst <= 0.0,
          "max excess " + fmt(worst) + " (target <= 0)"};
}

Check runtime(double seconds, double limit) {
  return {"runtime", seconds <= limit, fmt(seconds, 1) + " s (target < " + fmt(limit, 0) + " s)"};
}

std::vector<Check> criterion1(Runner& run) {
  std::vector<Check> out;
  const json s = run.price("put1d");
  out.push_back(in_window("1-D put value", s["value"], 2.28, 2.32));
  const double tree = oracle::bermudan_put_tree(40.0, 40.0, 0.06, 0.2, 1.0, 1000, 40);
  out.push_back(at_most("1000-step tree vs 2.314", std::abs(tree - 2.314), 0.005));
  out.back().detail = "|" + fmt(tree, 6) + " - 2.314| = " + out.back().detail;
  out.push_back(runtime(run.elapsed(), 60.0));
  return out;
}

std::vector<Check> criterion2(Runner& run) {
  std::vector<Check> out;
  const json s = run.price("basket2d_sobol");
  out.push_back(in_window("2-D basket Sobol run-mean (20 runs)", s["value"], 1.448, 1.460));
  out.push_back(at_most("2-D basket Sobol run-sd", s["sd"], 0.006));
  out.push_back(low_bias(s, 1.461));
  out.push_back(runtime(run.elapsed(), 300.0));
  return out;
}

std::vector<Check> criterion3(Runner& run) {
  std::vector<Check> out;
  const json s = run.price("maxcall3d_sobol");
  out.push_back(in_window("3-D max-call Sobol run-mean (10 runs)", s["value"], 11.13, 11.22));
  out.push_back(low_bias(s, 11.25));
  out.push_back(runtime(run.elapsed(), 900.0));
  return out;
}

std::vector<Check> criterion4(Runner& run) {
  const json a = run.price("basket2d_sobol");
  const json b = run.price("basket2d_sobol_sqexp");
  const double va = a["value"], vb = b["value"];
  Check c = at_most("matern-5/2 vs squared-exponential run-means", std::abs(va - vb), 0.005);
  c.detail = "|" + fmt(va) + " - " + fmt(vb) + "| = " + c.detail;
  return {c};
}

// Per run: sum the fixed-reference loss traces over dates, average blocks of
// ten consecutive augmentations and require the block means not to rise.
std::vector<double> block_means(const fs::path& run_dir) {
  std::vector<double> total;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.path().filename().string().rfind("trace_", 0) != 0) continue;
    std::ifstream in(e.path());
    std::string line;
    std::getline(in, line);
    std::size_t col = 0;
    {
      std::istringstream hs(line);
      std::string h;
      for (std::size_t i = 0; std::getline(hs, h, ','); ++i)
        if (h == "reference_loss") col = i;
    }
    std::size_t k = 0;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string cell;
      for (std::size_t i = 0; i <= col; ++i) std::getline(ls, cell, ',');
      if (total.size() <= k) total.resize(k + 1, 0.0);
      total[k++] += std::stod(cell);
    }
  }
  std::vector<double> blocks;
  for (std::size_t i = 0; i + 10 <= total.size(); i += 10) {
    double acc = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) acc += total[j];
    blocks.push_back(acc / 10.0);
  }
  return blocks;
}

std::vector<Check> criterion5(Runner& run) {
  std::vector<Check> out;
  rmc::RunConfig cfg = run.config("basket2d_zcsur");
  const fs::path diag = fs::temp_directory_path() / ("rmc_acceptance_" + std::to_string(::getpid()));
  cfg.diagnostics_dir = diag.string();
  const json s = run.price(cfg);
  out.push_back(in_window("sequential ZC-SUR run-mean (10 runs)", s["value"], 1.442, 1.458));
  int monotone = 0;
  std::string worst;
  for (int r = 0; r < cfg.replications; ++r) {
    const auto b = block_means(diag / cfg.name / ("rep" + std::to_string(r)));
    bool ok = b.size() >= 2;
    for (std::size_t i = 1; i < b.size(); ++i) ok = ok && b[i] <= b[i - 1];
    monotone += ok;
    if (!ok && worst.empty()) worst = " (first failing run " + std::to_string(r) + ")";
  }
  fs::remove_all(diag);
  out.push_back({"loss trace nonincreasing in blocks of 10, every run", monotone == cfg.replications,
                 std::to_string(monotone) + " of " + std::to_string(cfg.replications) + " runs" + worst});
  return out;
}

std::vector<Check> criterion6(Runner& run, bool five_d) {
  std::vector<Check> out;
  const json poly = run.price("maxcall2d_poly");
  out.push_back(in_window("2-D max-call LSMC polynomial mean", poly["value"], 7.89, 7.97));
  const json bw = run.price("maxcall2d_bw11");
  out.push_back(in_window("2-D max-call LSMC BW11 mean", bw["value"], 7.84, 7.94));
  if (five_d) {
    const json p5 = run.price("maxcall5d_poly");
    out.push_back(in_window("5-D max-call LSMC polynomial mean", p5["value"], 15.76, 15.86));
    const json b5 = run.price("maxcall5d_bw11");
    out.push_back(in_window("5-D max-call LSMC BW11 mean", b5["value"], 16.27, 16.37));
  }
  return out;
}

std::vector<Check> criterion7(Runner& run) {
  std::vector<Check> out;
  const json k = run.price("sv5_krig_lhs");
  out.push_back(in_window("SV5 kriging + LHS run-mean (5 runs)", k["value"], 15.91, 16.21));
  const json b = run.price("sv5_bw11");
  out.push_back(in_window("SV5 LSMC BW11 mean", b["value"], 15.93, 16.13));
  out.push_back(runtime(run.elapsed(), 1200.0));
  return out;
}

std::vector<Check> criterion8(const std::vector<std::string>& suites) {
  std::vector<Check> out;
  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& exe : suites) {
    const std::string cmd = "\"" + exe + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      ++failed;
      std::cerr << "  failed: " << exe << "\n";
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.push_back({"property suites pass", failed == 0,
                 std::to_string(suites.size() - static_cast<std::size_t>(failed)) + " of " +
                     std::to_string(suites.size()) + " suites"});
  out.push_back({"property suites runtime", secs < 30.0, fmt(secs, 1) + " s (target < 30 s)"});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark acceptance checks"};
  int criterion = 0;
  std::string config_dir = RMC_CONFIG_DIR;
  std::vector<std::string> suites;
  bool five_d = false;
  app.add_option("--criterion", criterion, "criterion number 1-8")->required()->check(CLI::Range(1, 8));
  app.add_option("--config-dir", config_dir, "directory with the bundled configs");
  app.add_option("--suite", suites, "property-suite executables (criterion 8)");
  app.add_flag("--five-d", five_d, "include the 5-D max-call rows (criterion 6)");
  CLI11_PARSE(app, argc, argv);

  Runner run(config_dir);
  std::vector<Check> checks;
  try {
    switch (criterion) {
      case 1: checks = criterion1(run); break;
      case 2: checks = criterion2(run); break;
      case 3: checks = criterion3(run); break;
      case 4: checks = criterion4(run); break;
      case 5: checks = criterion5(run); break;
      case 6: checks = criterion6(run, five_d); break;
      case 7: checks = criterion7(run); break;
      case 8: checks = criterion8(suites); break;
    }
  } catch (const std::exception& e) {
    std::cout << "[FAIL] C" << criterion << " aborted: " << e.what() << "\n";
    return 1;
  }
  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << "C" << criterion << " " << c.what << ": "
              << c.detail << "\n";
    all = all && c.pass;
  }
  return all ? 0 : 1;
}
