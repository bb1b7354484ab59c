// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--work-dir DIR] [--strict]
//
// Exit status is 0 when every failing criterion is in the known-failure list
// (reported as "FAIL (known)"), 1 otherwise; --strict makes any failure fatal.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "pmnet/experiment.hpp"

using namespace pmnet;
namespace fs = std::filesystem;

namespace {

const std::set<int> kKnownFailures = {5};

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};

std::string f4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

class Runner {
 public:
  explicit Runner(fs::path work) : work_(std::move(work)) {}

  ExperimentConfig config(const std::string& name, const std::string& tag = "") const {
    auto cfg = load_experiment(fs::path(PMNET_CONFIG_DIR) / (name + ".json"));
    cfg.output_dir = work_ / (name + tag);
    return cfg;
  }

  CsvData run(const std::string& name, const std::string& csv, double* seconds = nullptr) {
    const auto cfg = config(name);
    const auto t0 = std::chrono::steady_clock::now();
    run_experiment(cfg);
    if (seconds) *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return read_csv(cfg.output_dir / csv);
  }

  const fs::path& work() const { return work_; }

 private:
  fs::path work_;
};

Outcome c1(Runner& r) {
  double secs = 0.0;
  const auto rep = r.run("match_discrete", "report.csv", &secs);
  const auto m = rep.numbers("mean_output");
  const double truth[] = {0.2, 0.4, 0.1, 0.3};
  bool ok = m.size() == 4 && m[2] >= 0.1 && secs < 300.0;
  double worst = 0.0;
  for (int i : {0, 1, 3}) worst = std::max(worst, std::abs(m[i] - truth[i]));
  ok = ok && worst <= 0.05;
  return {1, ok, "max |err| h1,h2,h4 = " + f4(worst) + " (<= 0.05); h3 = " + f4(m[2]) + " (>= 0.1); " +
                     f4(secs) + " s"};
}

Outcome c2(Runner& r) {
  const auto rep = r.run("overweight", "report.csv");
  const auto m = rep.numbers("mean_output");
  const auto t = rep.numbers("true_p");
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) worst = std::max(worst, std::abs(m[i] - t[i]));
  return {2, worst <= 0.03, "max |err| = " + f4(worst) + " (<= 0.03), h3 = " + f4(m[2])};
}

Outcome c3(Runner& r) {
  const auto rep = r.run("match_gaussian", "report.csv");
  const auto m = rep.numbers("mean_output");
  const auto t = rep.numbers("true_p");
  double worst = 0.0;
  std::size_t tails = 0, tails_ok = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (t[i] >= 0.02) worst = std::max(worst, std::abs(m[i] - t[i]));
    if (t[i] < 0.01) {
      ++tails;
      tails_ok += m[i] >= t[i];
    }
  }
  return {3, worst <= 0.05 && tails_ok == tails,
          "max |err| (mass >= 0.02) = " + f4(worst) + " (<= 0.05); tails >= true: " +
              std::to_string(tails_ok) + "/" + std::to_string(tails)};
}

Outcome c4() {
  Rng rng(370);
  std::vector<Pattern> batch;
  std::size_t k = 0;
  for (int i = 0; i < 500; ++i) {
    const bool one = rng.bernoulli(0.37);
    k += one;
    batch.push_back({{0.0}, {one ? 1.0 : 0.0}});
  }
  TrainConfig cfg;
  cfg.cessation_enabled = false;
  cfg.hard_epoch_cap = 3000;
  FixedBatch source(batch);
  const auto result = train_sdcc(Network::minimal(1, 1, 1, 0.1), source, cfg);
  const double o = result.net.forward_scalar(0.0);
  const double freq = static_cast<double>(k) / 500.0;
  return {4, std::abs(o - freq) <= 0.02,
          "output " + f4(o) + " vs k/n = " + std::to_string(k) + "/500 = " + f4(freq) + " (<= 0.02)"};
}

Outcome c5(Runner& r) {
  const auto lag = r.run("adapt", "lag.csv");
  const auto reached = lag.numbers("reached");
  const auto epochs = lag.numbers("lag_epochs");
  const bool both = reached.size() == 2 && reached[0] == 1.0 && reached[1] == 1.0;
  const double ratio = both && epochs[0] > 0 ? epochs[1] / epochs[0] : INFINITY;
  return {5, both && epochs[1] < epochs[0] && ratio < 0.5,
          std::string("new values reached: ") + (both ? "yes" : "no") + "; lag initial " + f4(epochs[0]) +
              ", after switch " + f4(epochs[1]) + ", ratio " + f4(ratio) + " (< 0.5)"};
}

Outcome c6(Runner& r) {
  const auto rec = r.run("gaussian_shift", "recruits.csv");
  const auto before = rec.numbers("before");
  const auto after = rec.numbers("after");
  std::size_t fewer = 0;
  double pre = 0.0, post = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    fewer += after[i] < before[i];
    pre += before[i];
    post += after[i];
  }
  const double n = static_cast<double>(before.size());
  return {6, before.size() == 20 && fewer >= 18,
          std::to_string(fewer) + "/20 runs recruit fewer after the shift (>= 18); mean pre " + f4(pre / n) +
              ", post " + f4(post / n)};
}

Outcome c7(Runner& r) {
  const auto s = r.run("bayes_fit", "fit_summary.csv");
  const double slope = s.numbers("slope")[0];
  const double icpt = s.numbers("intercept")[0];
  const double corr = s.numbers("correlation")[0];
  return {7, slope >= 0.9 && slope <= 1.1 && std::abs(icpt) <= 0.05 && corr > 0.98,
          "slope " + f4(slope) + " in [0.9, 1.1]; intercept " + f4(icpt) + " in [-0.05, 0.05]; r " + f4(corr) +
              " (> 0.98)"};
}

Outcome c8() {
  struct Case {
    double l1, l2, p1, expected;
  };
  const Case table[] = {{0.5, 0.5, 0.3, 0.3},    {0.8, 0.2, 0.5, 0.8},   {0.9, 0.3, 0.1, 0.25},
                        {1.0, 0.0, 0.5, 1.0},    {0.0, 1.0, 0.7, 0.0},   {0.6, 0.2, 0.25, 0.5},
                        {0.4, 0.1, 0.2, 0.5},    {0.3, 0.6, 0.5, 1.0 / 3}, {0.2, 0.8, 0.8, 0.5},
                        {0.75, 0.25, 0.4, 2.0 / 3}};
  double table_err = 0.0, scale_err = 0.0;
  for (const auto& c : table) {
    const double lik[] = {c.l1, c.l2};
    const double prior[] = {c.p1, 1.0 - c.p1};
    const auto post = exact_posterior(lik, prior);
    table_err = std::max(table_err, std::abs(post[0] - c.expected));
    for (double k : {0.5, 0.125, 0.01}) {
      const double scaled[] = {c.l1 * k, c.l2 * k};
      const auto sp = exact_posterior(scaled, prior);
      scale_err = std::max(scale_err, std::max(std::abs(sp[0] - post[0]), std::abs(sp[1] - post[1])));
    }
  }
  Rng rng(88);
  double seq_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double p0 = rng.uniform(0.05, 0.95);
    std::vector<double> prior = {p0, 1.0 - p0}, product = {1.0, 1.0};
    for (int step = 0; step < 6; ++step) {
      const std::vector<double> lik = {rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
      prior = exact_posterior(lik, prior);
      product[0] *= lik[0];
      product[1] *= lik[1];
    }
    const std::vector<double> start = {p0, 1.0 - p0};
    const auto batch = exact_posterior(product, start);
    seq_err = std::max(seq_err, std::abs(prior[0] - batch[0]));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "table max err %.1e (<= 1e-12); scaling %.1e (<= 1e-12); sequential vs batch %.1e (<= 1e-9)",
                table_err, scale_err, seq_err);
  return {8, table_err <= 1e-12 && scale_err <= 1e-12 && seq_err <= 1e-9, buf};
}

Outcome c9(Runner& r) {
  const auto sweep = r.run("neglect", "sweep.csv");
  const auto e = sweep.numbers("entropy_bits");
  const double final = e.back();
  const bool trend = final >= e.front();
  const auto net = load_snapshot((r.work() / "neglect" / "prior_module.json").string());
  Rng rng(400);
  double err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> lik(400);
    double total = 0.0;
    for (auto& v : lik) total += (v = rng.uniform());
    const auto post = neglected_posterior(lik, net, {0.0, 1});
    for (std::size_t i = 0; i < lik.size(); ++i) err = std::max(err, std::abs(post[i] - lik[i] / total));
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "entropy t=0 %.4f -> t=%zu %.4f (8.64 +/- 0.05); non-decreasing: %s; r=0 posterior err %.1e (<= 1e-12)",
                e.front(), e.size() - 1, final, trend ? "yes" : "no", err);
  return {9, std::abs(final - 8.64) <= 0.05 && trend && err <= 1e-12, buf};
}

Outcome c10(Runner& r) {
  std::size_t compared = 0, differing = 0;
  for (const char* name : {"match_discrete", "adapt", "neglect", "pipeline"}) {
    const auto first = r.config(name);
    const auto again = r.config(name, "_rerun");
    if (!fs::exists(first.output_dir / "manifest.json")) run_experiment(first);
    run_experiment(again);
    for (const auto& entry : fs::directory_iterator(first.output_dir)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      differing += read_text(entry.path()) != read_text(again.output_dir / entry.path().filename());
    }
  }
  return {10, compared > 0 && differing == 0,
          std::to_string(compared) + " CSVs compared across reruns, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "pmnet_acceptance";
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--strict") {
      strict = true;
    } else {
      std::fprintf(stderr, "usage: acceptance [--work-dir DIR] [--strict]\n");
      return 2;
    }
  }
  unsetenv(kOutputDirEnv);
  fs::remove_all(work);
  fs::create_directories(work);
  Runner runner(work);

  using Check = std::function<Outcome()>;
  const std::vector<std::pair<int, Check>> checks = {
      {1, [&] { return c1(runner); }}, {2, [&] { return c2(runner); }}, {3, [&] { return c3(runner); }},
      {4, [] { return c4(); }},        {5, [&] { return c5(runner); }}, {6, [&] { return c6(runner); }},
      {7, [&] { return c7(runner); }}, {8, [] { return c8(); }},        {9, [&] { return c9(runner); }},
      {10, [&] { return c10(runner); }}};

  bool fatal = false;
  std::size_t passed = 0;
  for (const auto& [id, check] : checks) {
    Outcome o{id, false, ""};
    try {
      o = check();
    } catch (const std::exception& e) {
      o.detail = std::string("error: ") + e.what();
    }
    const bool known = !o.pass && kKnownFailures.contains(id);
    std::printf("C%-2d %-12s %s\n", id, o.pass ? "PASS" : known ? "FAIL (known)" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    passed += o.pass;
    if (!o.pass && (strict || !known)) fatal = true;
  }
  std::printf("%zu/%zu criteria pass\n", passed, checks.size());
  return fatal ? 1 : 0;
}
