#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "pmnet/csv.hpp"
#include "pmnet/distribution.hpp"
#include "pmnet/network.hpp"
#include "pmnet/rng.hpp"
#include "pmnet/training.hpp"

namespace pmnet {

// Scalar input for hypothesis `index` out of `count`: evenly spaced on [-1, 1].
inline double encode_hypothesis(std::size_t index, std::size_t count) {
  if (count == 0 || index >= count) throw InvalidArgument("hypothesis index out of range");
  if (count == 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(index) / static_cast<double>(count - 1);
}

struct ReinforcementSample {
  std::size_t hypothesis_index = 0;
  double input_encoding = 0.0;
  int reinforcement = 0;  // 0 or 1

  Pattern to_pattern() const {
    return {{input_encoding}, {static_cast<double>(reinforcement)}};
  }
};

inline std::vector<Pattern> to_patterns(std::span<const ReinforcementSample> samples) {
  std::vector<Pattern> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.to_pattern());
  return out;
}

inline double epoch_error(const Network& net, std::span<const ReinforcementSample> batch) {
  const auto patterns = to_patterns(batch);
  return epoch_error(net, std::span<const Pattern>(patterns));
}

// Endless stream of reinforcement batches. Each epoch presents every
// hypothesis `instances_per_hypothesis` times, each presentation reinforced
// with the probability in force at that epoch. A batch depends only on
// (seed, epoch), so streams can be replayed or consumed out of order.
class TrainingStream {
 public:
  TrainingStream(DistributionSpec spec, std::size_t instances_per_hypothesis, std::uint64_t seed)
      : spec_(std::move(spec)), instances_(instances_per_hypothesis), seed_(seed) {
    if (instances_ == 0) throw InvalidArgument("instances_per_hypothesis must be positive");
    validate(spec_);
    hypotheses_ = hypothesis_count(spec_);
    refresh(0);
  }

  const DistributionSpec& spec() const { return spec_; }
  std::size_t hypotheses() const { return hypotheses_; }
  std::size_t instances_per_hypothesis() const { return instances_; }

  std::vector<ReinforcementSample> samples(std::size_t epoch) {
    refresh(epoch);
    Rng rng(derive_seed(seed_, epoch));
    std::vector<ReinforcementSample> batch;
    batch.reserve(hypotheses_ * instances_);
    for (std::size_t h = 0; h < hypotheses_; ++h) {
      const double x = encode_hypothesis(h, hypotheses_);
      for (std::size_t j = 0; j < instances_; ++j) {
        batch.push_back({h, x, rng.bernoulli(current_[h]) ? 1 : 0});
      }
    }
    return batch;
  }

  // Patterns for the trainer.
  std::vector<Pattern> next_epoch_batch(std::size_t epoch) {
    const auto s = samples(epoch);
    return to_patterns(s);
  }

 private:
  void refresh(std::size_t epoch) {
    std::size_t active = 0;
    for (std::size_t i = 0; i < spec_.schedule.size(); ++i) {
      if (spec_.schedule[i].epoch <= epoch) active = i + 1;
    }
    if (current_.empty() || active != active_segment_) {
      current_ = pmf(spec_, epoch);
      active_segment_ = active;
    }
  }

  DistributionSpec spec_;
  std::size_t instances_;
  std::uint64_t seed_;
  std::size_t hypotheses_ = 0;
  std::vector<double> current_;
  std::size_t active_segment_ = 0;
};

// Network outputs for every hypothesis encoding.
inline std::vector<double> hypothesis_outputs(const Network& net, std::size_t hypotheses) {
  std::vector<double> out(hypotheses);
  for (std::size_t h = 0; h < hypotheses; ++h) {
    out[h] = net.forward_scalar(encode_hypothesis(h, hypotheses));
  }
  return out;
}

// Outputs per hypothesis after every epoch.
struct OutputTrace {
  std::vector<std::vector<double>> outputs;  // [epoch][hypothesis]
};

struct RunOptions {
  std::size_t instances_per_hypothesis = 15;
  double init_range = 0.1;
  bool record_trace = false;
  // Called after every epoch; may throw to abandon the run.
  std::function<void(std::size_t)> on_epoch;
};

struct RunResult {
  TrainResult training;
  std::vector<double> final_outputs;
  OutputTrace trace;
};

// Trains one minimal 1-input/1-output network on a reinforcement stream.
inline RunResult run_probability_matching(const DistributionSpec& spec, const TrainConfig& cfg,
                                          std::uint64_t seed, const RunOptions& options = {}) {
  TrainingStream stream(spec, options.instances_per_hypothesis, derive_seed(seed, 1));
  TrainConfig run_cfg = cfg;
  run_cfg.rng_seed = derive_seed(seed, 2);
  auto net = Network::minimal(1, 1, derive_seed(seed, 3), options.init_range);
  RunResult result;
  const std::size_t h = stream.hypotheses();
  EpochObserver observer;
  if (options.record_trace || options.on_epoch) {
    observer = [&](std::size_t epoch, const Network& n) {
      if (options.record_trace) result.trace.outputs.push_back(hypothesis_outputs(n, h));
      if (options.on_epoch) options.on_epoch(epoch);
    };
  }
  result.training = train_sdcc(std::move(net), stream, run_cfg, observer);
  result.final_outputs = hypothesis_outputs(result.training.net, h);
  return result;
}

struct ReplicationRun {
  std::uint64_t seed = 0;
  std::vector<double> final_outputs;
  std::size_t hidden_units = 0;
  std::size_t epochs = 0;
  HaltReason halted_by = HaltReason::epoch_cap;
  TrainHistory history;
  OutputTrace trace;
};

struct ReplicationReport {
  std::vector<double> true_p;
  std::vector<double> mean_output;
  std::vector<double> sd_output;
  std::vector<ReplicationRun> runs;

  // Mean over runs of the per-epoch trace; requires recorded traces.
  OutputTrace mean_trace() const {
    OutputTrace t;
    if (runs.empty() || runs.front().trace.outputs.empty()) return t;
    std::size_t epochs = runs.front().trace.outputs.size();
    for (const auto& r : runs) epochs = std::min(epochs, r.trace.outputs.size());
    const std::size_t h = runs.front().trace.outputs.front().size();
    t.outputs.assign(epochs, std::vector<double>(h, 0.0));
    for (const auto& r : runs) {
      for (std::size_t e = 0; e < epochs; ++e) {
        for (std::size_t i = 0; i < h; ++i) t.outputs[e][i] += r.trace.outputs[e][i];
      }
    }
    for (auto& row : t.outputs) {
      for (auto& v : row) v /= static_cast<double>(runs.size());
    }
    return t;
  }
};

inline std::size_t worker_count(std::size_t jobs) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(hw, jobs));
}

// Runs `count` independent jobs on a small thread pool; job i writes slot i,
// so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline void summarise(ReplicationReport& report) {
  const std::size_t h = report.true_p.size();
  const double r = static_cast<double>(report.runs.size());
  report.mean_output.assign(h, 0.0);
  report.sd_output.assign(h, 0.0);
  for (const auto& run : report.runs) {
    for (std::size_t i = 0; i < h; ++i) report.mean_output[i] += run.final_outputs[i];
  }
  for (auto& m : report.mean_output) m /= r;
  if (report.runs.size() > 1) {
    for (const auto& run : report.runs) {
      for (std::size_t i = 0; i < h; ++i) {
        const double d = run.final_outputs[i] - report.mean_output[i];
        report.sd_output[i] += d * d;
      }
    }
    for (auto& s : report.sd_output) s = std::sqrt(s / (r - 1.0));
  }
}

// Trains R networks with seeds derived from `master_seed`. Runs that hit the
// epoch cap are kept and flagged through `halted_by`.
inline ReplicationReport run_replications(const DistributionSpec& spec, const TrainConfig& cfg,
                                          std::size_t replications, std::uint64_t master_seed,
                                          const RunOptions& options = {}) {
  if (replications == 0) throw InvalidArgument("need at least one replication");
  validate(spec);
  cfg.validate();
  ReplicationReport report;
  report.runs.resize(replications);
  parallel_for(replications, [&](std::size_t i) {
    const auto seed = derive_seed(master_seed, i);
    auto run = run_probability_matching(spec, cfg, seed, options);
    auto& slot = report.runs[i];
    slot.seed = seed;
    slot.final_outputs = std::move(run.final_outputs);
    slot.hidden_units = run.training.net.hidden_count();
    slot.epochs = run.training.epochs;
    slot.halted_by = run.training.halted_by;
    slot.history = std::move(run.training.history);
    slot.trace = std::move(run.trace);
  });
  std::size_t last_epoch = 0;
  for (const auto& run : report.runs) last_epoch = std::max(last_epoch, run.epochs);
  report.true_p = pmf(spec, last_epoch == 0 ? 0 : last_epoch - 1);
  summarise(report);
  return report;
}

inline CsvTable report_table(const ReplicationReport& report) {
  CsvTable t({"hypothesis", "true_p", "mean_output", "sd_output"});
  for (std::size_t i = 0; i < report.true_p.size(); ++i) {
    t.row({std::to_string(i), format_number(report.true_p[i]),
           format_number(report.mean_output[i]), format_number(report.sd_output[i])});
  }
  return t;
}

inline CsvTable summary_table(const ReplicationReport& report) {
  CsvTable t({"replication", "hidden_units", "epochs", "halted_by"});
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    t.row({std::to_string(i), std::to_string(r.hidden_units), std::to_string(r.epochs),
           to_string(r.halted_by)});
  }
  return t;
}

inline CsvTable trace_table(const OutputTrace& trace) {
  std::vector<std::string> header{"epoch"};
  const std::size_t h = trace.outputs.empty() ? 0 : trace.outputs.front().size();
  for (std::size_t i = 0; i < h; ++i) header.push_back("h" + std::to_string(i));
  CsvTable t(std::move(header));
  for (std::size_t e = 0; e < trace.outputs.size(); ++e) {
    std::vector<std::string> row{std::to_string(e)};
    for (auto v : trace.outputs[e]) row.push_back(format_number(v));
    t.row(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Adaptation to scheduled changes

struct AdaptationLag {
  std::optional<std::size_t> initial;              // epochs from 0 to within tolerance
  std::vector<std::optional<std::size_t>> after;   // one per schedule switch
};

// First epoch at or after `from` (and before `until`) where every output is
// within `tolerance` of `target`, as an offset from `from`.
inline std::optional<std::size_t> first_within(const OutputTrace& trace,
                                               const std::vector<double>& target,
                                               std::size_t from, std::size_t until,
                                               double tolerance) {
  until = std::min(until, trace.outputs.size());
  for (std::size_t e = from; e < until; ++e) {
    const auto& row = trace.outputs[e];
    bool ok = row.size() == target.size();
    for (std::size_t i = 0; ok && i < row.size(); ++i) {
      ok = std::abs(row[i] - target[i]) <= tolerance;
    }
    if (ok) return e - from;
  }
  return std::nullopt;
}

inline AdaptationLag adaptation_lag(const OutputTrace& trace, const DistributionSpec& spec,
                                    double tolerance = 0.05) {
  AdaptationLag lag;
  const std::size_t end = trace.outputs.size();
  const std::size_t first_switch = spec.schedule.empty() ? end : spec.schedule.front().epoch;
  lag.initial = first_within(trace, pmf(spec, 0), 0, first_switch, tolerance);
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
    const std::size_t start = spec.schedule[i].epoch;
    const std::size_t stop = i + 1 < spec.schedule.size() ? spec.schedule[i + 1].epoch : end;
    lag.after.push_back(first_within(trace, pmf(spec, start), start, stop, tolerance));
  }
  return lag;
}

// Hidden units recruited before and after an epoch boundary.
struct RecruitSplit {
  std::size_t before = 0;
  std::size_t after = 0;
};

inline RecruitSplit recruits_around(const TrainHistory& history, std::size_t boundary) {
  RecruitSplit split;
  for (const auto& r : history.epochs) {
    if (r.event == EpochEvent::recruit_sibling || r.event == EpochEvent::recruit_descendant) {
      (r.epoch < boundary ? split.before : split.after) += 1;
    }
  }
  return split;
}

}  // namespace pmnet
