#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanex/model.hpp"
#include "spanex/pipeline.hpp"

namespace spanex {

struct RunConfig {
  int batch_size = 20;
  int epochs = 5;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<int> subsample_n;         // cap each task's train split
  int restarts = 1;
  std::optional<long> max_steps;          // required for multi-task stages
  double grad_clip = 0.0;                 // global-norm clip; 0 disables
  bool linear_decay = false;              // constant rate by default
  std::optional<double> stop_at_metric;   // early-stop once dev metric reaches this
  DecodeMode decode_mode = DecodeMode::independent;
  int max_span_len = 30;
  double init_std = 0.02;                 // fresh-weight scale (restarts, CLI)

  void validate() const;
};

// Adam accumulators, one flat array per parameter tensor in named_tensors
// order.
struct OptimizerState {
  std::vector<Eigen::ArrayXd> first_moment;
  std::vector<Eigen::ArrayXd> second_moment;
  long step_count = 0;

  void reset();
  bool moments_zero() const;
};

OptimizerState make_optimizer_state(const std::vector<TensorView>& params);

// One bias-corrected Adam update over all tensors. lr_scale multiplies the
// configured rate (used by the decay schedule). Throws std::runtime_error on
// a non-finite gradient, naming the tensor.
void adam_step(const std::vector<TensorView>& params,
               const std::vector<TensorView>& grads, OptimizerState& state,
               const RunConfig& config, double lr_scale = 1.0);

struct Stage {
  std::vector<std::string> task_names;  // >1 means round-robin multi-task
  std::optional<int> batch_size;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<int> subsample_n;
  std::optional<long> max_steps;
};

struct TrainingPlan {
  std::vector<Stage> stages;
  bool reset_optimizer_between_stages = true;
};

// One JSON-lines record per completed task epoch.
struct EpochRecord {
  int stage = 0;
  std::string task;
  int epoch = 0;  // 1-based within the stage
  long step = 0;  // optimizer steps so far in this run
  double train_loss = 0.0;  // mean per-example loss over the epoch
  std::optional<double> dev_metric;
  std::string metric_name;
};

std::string epoch_record_to_json(const EpochRecord& record);

// What happened at a stage boundary with optimizer reset enabled.
struct StageBoundaryAudit {
  int next_stage = 0;
  std::uint64_t weights_before = 0;
  std::uint64_t weights_after = 0;
  bool moments_zero_after = false;
  long step_count_after = -1;
};

// Fixed round-robin batch scheduler over task train splits: task order is
// declaration order; an exhausted task reshuffles and continues. Each epoch
// covers every example once (final batch may be short).
class MultitaskScheduler {
 public:
  struct Batch {
    int task_index = 0;
    std::vector<std::size_t> example_indices;
    bool epoch_completed = false;  // this batch finished the task's pass
    int epoch = 1;                 // 1-based epoch the batch belongs to
  };

  MultitaskScheduler(std::vector<std::size_t> task_sizes, int batch_size,
                     std::uint64_t seed);
  Batch next();

 private:
  struct Cursor {
    std::vector<std::size_t> order;
    std::size_t position = 0;
    int epoch = 1;
  };
  std::vector<Cursor> cursors_;
  int batch_size_;
  int next_task_ = 0;
  std::mt19937_64 rng_;
};

struct StageResult {
  std::vector<EpochRecord> records;
  long steps_taken = 0;
};

// Trains one stage (single-task epoch loop, or round-robin when several
// tasks are given). Evaluates each task's dev split at task-epoch
// boundaries. Deterministic given shuffle_seed.
StageResult run_stage(Model& model, OptimizerState& state,
                      const std::vector<const Task*>& tasks, const RunConfig& config,
                      int stage_index, std::uint64_t shuffle_seed);

struct PlanResult {
  std::vector<EpochRecord> records;
  std::vector<StageBoundaryAudit> audits;
  std::optional<MetricReport> final_dev;  // last stage's last task, final weights
};

// Runs stages in order. Weights carry over between stages unchanged; with
// reset_optimizer_between_stages the moments are zeroed at each boundary
// (audited via weight hashes).
PlanResult run_plan(Model& model, const TrainingPlan& plan,
                    const std::map<std::string, Task>& registry,
                    const RunConfig& base);

// min(n, |dataset|) distinct examples, original order, deterministic in seed.
std::vector<SpanExample> subsample(const std::vector<SpanExample>& dataset,
                                   std::size_t n, std::uint64_t seed);

struct RestartOutcome {
  Model model;
  double dev_metric = 0.0;
  std::uint64_t seed = 0;
  PlanResult result;
};

// k full runs with seeds seed+0..k-1 and fresh models; returns the run with
// the best final dev metric (ties keep the lowest seed).
RestartOutcome random_restarts(const EncoderConfig& config, const Vocabulary& vocab,
                               const TrainingPlan& plan,
                               const std::map<std::string, Task>& registry,
                               const RunConfig& base, int k);

// Stream seeds for stage shuffling / per-task subsampling, derived from the
// run seed by splitmix64 so stages and tasks cannot collide.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t task_subsample_seed(std::uint64_t seed, const std::string& task_name);

}  // namespace spanex
