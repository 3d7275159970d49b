#include "spanex/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spanex {

namespace {

Eigen::Map<Eigen::ArrayXd> flat(const TensorView& view) {
  return {view.data, view.size()};
}

void zero_all(const std::vector<TensorView>& views) {
  for (const auto& view : views) flat(view).setZero();
}

double global_grad_norm(const std::vector<TensorView>& grads) {
  double sum_sq = 0.0;
  for (const auto& view : grads) sum_sq += flat(view).square().sum();
  return std::sqrt(sum_sq);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void RunConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("run config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("run config: epochs must be >= 1");
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("run config: learning_rate must be > 0");
  }
  if (restarts < 1) throw std::invalid_argument("run config: restarts must be >= 1");
  if (subsample_n && *subsample_n < 1) {
    throw std::invalid_argument("run config: subsample_n must be >= 1");
  }
  if (max_steps && *max_steps < 1) {
    throw std::invalid_argument("run config: max_steps must be >= 1");
  }
  if (grad_clip < 0) throw std::invalid_argument("run config: grad_clip must be >= 0");
}

OptimizerState make_optimizer_state(const std::vector<TensorView>& params) {
  OptimizerState state;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const auto& view : params) {
    state.first_moment.emplace_back(Eigen::ArrayXd::Zero(view.size()));
    state.second_moment.emplace_back(Eigen::ArrayXd::Zero(view.size()));
  }
  return state;
}

void OptimizerState::reset() {
  for (auto& m : first_moment) m.setZero();
  for (auto& v : second_moment) v.setZero();
  step_count = 0;
}

bool OptimizerState::moments_zero() const {
  for (const auto& m : first_moment) {
    if ((m != 0.0).any()) return false;
  }
  for (const auto& v : second_moment) {
    if ((v != 0.0).any()) return false;
  }
  return true;
}

void adam_step(const std::vector<TensorView>& params,
               const std::vector<TensorView>& grads, OptimizerState& state,
               const RunConfig& config, double lr_scale) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: tensor count mismatch");
  }
  const long t = ++state.step_count;
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const double lr = config.learning_rate * lr_scale;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = flat(grads[i]);
    if (!g.isFinite().all()) {
      throw std::runtime_error("adam_step: non-finite gradient in tensor '" +
                               grads[i].name + "' at step " + std::to_string(t));
    }
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    flat(params[i]) -= lr * (m / bias1) / ((v / bias2).sqrt() + config.adam_epsilon);
  }
}

std::string epoch_record_to_json(const EpochRecord& record) {
  nlohmann::json j;
  j["stage"] = record.stage;
  j["task"] = record.task;
  j["epoch"] = record.epoch;
  j["step"] = record.step;
  j["loss"] = record.train_loss;
  if (record.dev_metric) {
    j["metric"] = record.metric_name;
    j["value"] = *record.dev_metric;
  }
  return j.dump();
}

MultitaskScheduler::MultitaskScheduler(std::vector<std::size_t> task_sizes,
                                       int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
  if (task_sizes.empty()) {
    throw std::invalid_argument("scheduler: needs at least one task");
  }
  if (batch_size < 1) throw std::invalid_argument("scheduler: batch_size must be >= 1");
  for (std::size_t size : task_sizes) {
    if (size == 0) throw std::invalid_argument("scheduler: empty task train split");
    Cursor cursor;
    cursor.order = shuffled_indices(size, rng_);
    cursors_.push_back(std::move(cursor));
  }
}

MultitaskScheduler::Batch MultitaskScheduler::next() {
  Cursor& cursor = cursors_[static_cast<std::size_t>(next_task_)];
  Batch batch;
  batch.task_index = next_task_;
  batch.epoch = cursor.epoch;
  const std::size_t remaining = cursor.order.size() - cursor.position;
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(batch_size_),
                                                 remaining);
  batch.example_indices.assign(cursor.order.begin() + static_cast<long>(cursor.position),
                               cursor.order.begin() + static_cast<long>(cursor.position + take));
  cursor.position += take;
  if (cursor.position == cursor.order.size()) {
    batch.epoch_completed = true;
    cursor.order = shuffled_indices(cursor.order.size(), rng_);
    cursor.position = 0;
    ++cursor.epoch;
  }
  next_task_ = (next_task_ + 1) % static_cast<int>(cursors_.size());
  return batch;
}

namespace {

struct GradBuffer {
  EncoderParams encoder;
  SpanHead head;
  std::vector<TensorView> views;
};

GradBuffer make_grad_buffer(const Model& model) {
  GradBuffer buffer;
  buffer.encoder = make_encoder_params(model.config);
  buffer.head = make_span_head(model.config.hidden_dim);
  buffer.views = named_tensors(buffer.encoder, buffer.head);
  return buffer;
}

// Sum-over-batch loss and gradients, then one optimizer update.
double batch_step(Model& model, const std::vector<TensorView>& param_views,
                  GradBuffer& grads, OptimizerState& state,
                  const std::vector<CompiledExample>& examples,
                  const std::vector<std::size_t>& batch, const RunConfig& config,
                  double lr_scale) {
  zero_all(grads.views);
  double loss = 0.0;
  for (std::size_t idx : batch) {
    loss += example_loss(model, examples[idx], &grads.encoder, &grads.head);
  }
  if (config.grad_clip > 0.0) {
    const double norm = global_grad_norm(grads.views);
    if (norm > config.grad_clip) {
      const double scale = config.grad_clip / norm;
      for (const auto& view : grads.views) flat(view) *= scale;
    }
  }
  adam_step(param_views, grads.views, state, config, lr_scale);
  return loss;
}

std::optional<MetricReport> eval_dev(const Model& model,
                                     const std::vector<CompiledExample>& dev,
                                     const Task& task, const RunConfig& config) {
  if (dev.empty()) return std::nullopt;
  return evaluate(model, dev, task, config.decode_mode, config.max_span_len);
}

}  // namespace

StageResult run_stage(Model& model, OptimizerState& state,
                      const std::vector<const Task*>& tasks, const RunConfig& config,
                      int stage_index, std::uint64_t shuffle_seed) {
  config.validate();
  if (tasks.empty()) throw std::invalid_argument("run_stage: no tasks");

  const std::size_t max_len = static_cast<std::size_t>(model.config.max_positions);
  std::vector<std::vector<CompiledExample>> train(tasks.size()), dev(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i]->train.empty()) {
      throw std::invalid_argument("run_stage: task '" + tasks[i]->name +
                                  "' has no training examples");
    }
    train[i] = compile_dataset(tasks[i]->train, model.vocab, max_len);
    dev[i] = compile_dataset(tasks[i]->dev, model.vocab, max_len);
  }

  auto param_views = named_tensors(model);
  GradBuffer grads = make_grad_buffer(model);
  StageResult result;

  if (tasks.size() == 1) {
    std::mt19937_64 rng(shuffle_seed);
    const std::size_t n = train[0].size();
    const long batches_per_epoch =
        static_cast<long>((n + static_cast<std::size_t>(config.batch_size) - 1) /
                          static_cast<std::size_t>(config.batch_size));
    const long planned_steps = batches_per_epoch * config.epochs;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto order = shuffled_indices(n, rng);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
        const std::vector<std::size_t> batch(order.begin() + static_cast<long>(start),
                                             order.begin() + static_cast<long>(stop));
        const double lr_scale =
            config.linear_decay
                ? 1.0 - static_cast<double>(result.steps_taken) /
                            static_cast<double>(planned_steps)
                : 1.0;
        epoch_loss += batch_step(model, param_views, grads, state, train[0], batch,
                                 config, lr_scale);
        ++result.steps_taken;
      }

      EpochRecord record;
      record.stage = stage_index;
      record.task = tasks[0]->name;
      record.epoch = epoch;
      record.step = state.step_count;
      record.train_loss = epoch_loss / static_cast<double>(n);
      record.metric_name = tasks[0]->metric;
      if (auto report = eval_dev(model, dev[0], *tasks[0], config)) {
        record.dev_metric = report->value;
      }
      result.records.push_back(record);
      if (config.stop_at_metric && record.dev_metric &&
          *record.dev_metric >= *config.stop_at_metric) {
        break;
      }
    }
    return result;
  }

  // Multi-task: one batch per task in declaration order until max_steps.
  if (!config.max_steps) {
    throw std::invalid_argument("run_stage: multi-task stage needs max_steps");
  }
  std::vector<std::size_t> sizes;
  for (const auto& t : train) sizes.push_back(t.size());
  MultitaskScheduler scheduler(sizes, config.batch_size, shuffle_seed);

  std::vector<double> epoch_loss(tasks.size(), 0.0);
  std::vector<std::size_t> epoch_examples(tasks.size(), 0);
  while (result.steps_taken < *config.max_steps) {
    const auto batch = scheduler.next();
    const auto task_idx = static_cast<std::size_t>(batch.task_index);
    const double lr_scale =
        config.linear_decay ? 1.0 - static_cast<double>(result.steps_taken) /
                                        static_cast<double>(*config.max_steps)
                            : 1.0;
    epoch_loss[task_idx] +=
        batch_step(model, param_views, grads, state, train[task_idx],
                   batch.example_indices, config, lr_scale);
    epoch_examples[task_idx] += batch.example_indices.size();
    ++result.steps_taken;

    if (batch.epoch_completed) {
      EpochRecord record;
      record.stage = stage_index;
      record.task = tasks[task_idx]->name;
      record.epoch = batch.epoch;
      record.step = state.step_count;
      record.train_loss =
          epoch_loss[task_idx] / static_cast<double>(epoch_examples[task_idx]);
      record.metric_name = tasks[task_idx]->metric;
      if (auto report = eval_dev(model, dev[task_idx], *tasks[task_idx], config)) {
        record.dev_metric = report->value;
      }
      result.records.push_back(record);
      epoch_loss[task_idx] = 0.0;
      epoch_examples[task_idx] = 0;
    }
  }
  return result;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + (salt + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t task_subsample_seed(std::uint64_t seed, const std::string& task_name) {
  std::uint64_t hash = 1469598103934665603ull;
  for (char c : task_name) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  return mix_seed(seed, hash);
}

std::vector<SpanExample> subsample(const std::vector<SpanExample>& dataset,
                                   std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("subsample: n must be >= 1");
  if (n >= dataset.size()) return dataset;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(dataset.size());
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());  // keep original dataset order

  std::vector<SpanExample> out;
  out.reserve(n);
  for (std::size_t idx : pool) out.push_back(dataset[idx]);
  return out;
}

PlanResult run_plan(Model& model, const TrainingPlan& plan,
                    const std::map<std::string, Task>& registry,
                    const RunConfig& base) {
  base.validate();
  if (plan.stages.empty()) throw std::invalid_argument("run_plan: plan has no stages");

  auto param_views = named_tensors(model);
  OptimizerState state = make_optimizer_state(param_views);
  PlanResult result;
  const Task* final_task = nullptr;
  std::vector<CompiledExample> final_dev;

  for (std::size_t stage_idx = 0; stage_idx < plan.stages.size(); ++stage_idx) {
    const Stage& stage = plan.stages[stage_idx];
    if (stage.task_names.empty()) {
      throw std::invalid_argument("run_plan: stage " + std::to_string(stage_idx) +
                                  " names no tasks");
    }

    if (stage_idx > 0 && plan.reset_optimizer_between_stages) {
      StageBoundaryAudit audit;
      audit.next_stage = static_cast<int>(stage_idx);
      audit.weights_before = weights_hash(model);
      state.reset();
      audit.weights_after = weights_hash(model);
      audit.moments_zero_after = state.moments_zero();
      audit.step_count_after = state.step_count;
      result.audits.push_back(audit);
    }

    RunConfig config = base;
    if (stage.batch_size) config.batch_size = *stage.batch_size;
    if (stage.epochs) config.epochs = *stage.epochs;
    if (stage.learning_rate) config.learning_rate = *stage.learning_rate;
    if (stage.subsample_n) config.subsample_n = stage.subsample_n;
    if (stage.max_steps) config.max_steps = stage.max_steps;

    // Subsampled copies live here so the registry stays untouched; the
    // subset depends only on (seed, task name), not on stage position.
    std::vector<Task> storage;
    storage.reserve(stage.task_names.size());
    std::vector<const Task*> tasks;
    std::set<std::string> seen;
    for (const auto& name : stage.task_names) {
      if (!seen.insert(name).second) {
        throw std::invalid_argument("run_plan: stage " + std::to_string(stage_idx) +
                                    " repeats task '" + name + "'");
      }
      auto it = registry.find(name);
      if (it == registry.end()) {
        throw std::invalid_argument("run_plan: unknown task '" + name + "'");
      }
      storage.push_back(it->second);
      if (config.subsample_n) {
        storage.back().train =
            subsample(it->second.train, static_cast<std::size_t>(*config.subsample_n),
                      task_subsample_seed(base.seed, name));
      }
    }
    for (const auto& task : storage) tasks.push_back(&task);

    StageResult stage_result = run_stage(model, state, tasks, config,
                                         static_cast<int>(stage_idx),
                                         mix_seed(base.seed, stage_idx));
    result.records.insert(result.records.end(), stage_result.records.begin(),
                          stage_result.records.end());

    if (stage_idx + 1 == plan.stages.size()) {
      const std::string& last_name = stage.task_names.back();
      final_task = &registry.at(last_name);
      if (!final_task->dev.empty()) {
        final_dev = compile_dataset(final_task->dev, model.vocab,
                                    static_cast<std::size_t>(model.config.max_positions));
      }
    }
  }

  if (final_task && !final_dev.empty()) {
    result.final_dev =
        evaluate(model, final_dev, *final_task, base.decode_mode, base.max_span_len);
  }
  return result;
}

RestartOutcome random_restarts(const EncoderConfig& config, const Vocabulary& vocab,
                               const TrainingPlan& plan,
                               const std::map<std::string, Task>& registry,
                               const RunConfig& base, int k) {
  if (k < 1) throw std::invalid_argument("random_restarts: k must be >= 1");
  std::optional<RestartOutcome> best;
  for (int r = 0; r < k; ++r) {
    RunConfig run = base;
    run.seed = base.seed + static_cast<std::uint64_t>(r);
    Model model = make_model(config, vocab, run.seed, run.init_std);
    PlanResult result = run_plan(model, plan, registry, run);
    if (!result.final_dev) {
      throw std::runtime_error("random_restarts: plan's final task has no dev split");
    }
    const double metric = result.final_dev->value;
    if (!best || metric > best->dev_metric) {
      best = RestartOutcome{std::move(model), metric, run.seed, std::move(result)};
    }
  }
  return std::move(*best);
}

}  // namespace spanex
