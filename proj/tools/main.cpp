#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spanex/converters.hpp"
#include "spanex/dataset.hpp"
#include "spanex/gradcheck.hpp"
#include "spanex/model.hpp"
#include "spanex/pipeline.hpp"
#include "spanex/synthetic.hpp"
#include "spanex/training.hpp"

namespace {

using nlohmann::json;

spanex::DecodeMode mode_from_name(const std::string& name) {
  if (name == "independent") return spanex::DecodeMode::independent;
  if (name == "joint") return spanex::DecodeMode::joint;
  throw std::invalid_argument("unknown decode mode '" + name + "'");
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

json report_to_json(const spanex::MetricReport& report) {
  return {{"metric", report.metric},
          {"value", report.value},
          {"n", report.n},
          {"valid_predictions", report.valid_predictions}};
}

spanex::EncoderConfig encoder_config_from_json(const json& j) {
  spanex::EncoderConfig config;
  config.num_layers = j.value("num_layers", config.num_layers);
  config.hidden_dim = j.value("hidden_dim", config.hidden_dim);
  config.num_heads = j.value("num_heads", config.num_heads);
  config.ffn_dim = j.value("ffn_dim", config.ffn_dim);
  config.vocab_size = j.value("vocab_size", 0);  // 0: derive from the vocabulary
  config.max_positions = j.value("max_positions", config.max_positions);
  if (j.contains("scale_mode")) {
    config.scale_mode = spanex::scale_mode_from_name(j.at("scale_mode").get<std::string>());
  }
  config.layer_norm_eps = j.value("layer_norm_eps", config.layer_norm_eps);
  return config;
}

spanex::RunConfig run_config_from_json(const json& j) {
  spanex::RunConfig run;
  run.batch_size = j.value("batch_size", run.batch_size);
  run.epochs = j.value("epochs", run.epochs);
  run.learning_rate = j.value("learning_rate", run.learning_rate);
  run.beta1 = j.value("beta1", run.beta1);
  run.beta2 = j.value("beta2", run.beta2);
  run.adam_epsilon = j.value("adam_epsilon", run.adam_epsilon);
  run.seed = j.value("seed", run.seed);
  if (j.contains("subsample_n")) run.subsample_n = j.at("subsample_n").get<int>();
  run.restarts = j.value("restarts", run.restarts);
  if (j.contains("max_steps")) run.max_steps = j.at("max_steps").get<long>();
  run.grad_clip = j.value("grad_clip", run.grad_clip);
  run.linear_decay = j.value("linear_decay", run.linear_decay);
  if (j.contains("stop_at_metric")) {
    run.stop_at_metric = j.at("stop_at_metric").get<double>();
  }
  if (j.contains("decode_mode")) {
    run.decode_mode = mode_from_name(j.at("decode_mode").get<std::string>());
  }
  run.max_span_len = j.value("max_span_len", run.max_span_len);
  run.init_std = j.value("init_std", run.init_std);
  return run;
}

spanex::TrainingPlan plan_from_json(const json& j) {
  spanex::TrainingPlan plan;
  plan.reset_optimizer_between_stages = j.value("reset_optimizer_between_stages", true);
  for (const auto& js : j.at("stages")) {
    spanex::Stage stage;
    stage.task_names = js.at("tasks").get<std::vector<std::string>>();
    if (js.contains("batch_size")) stage.batch_size = js.at("batch_size").get<int>();
    if (js.contains("epochs")) stage.epochs = js.at("epochs").get<int>();
    if (js.contains("learning_rate")) {
      stage.learning_rate = js.at("learning_rate").get<double>();
    }
    if (js.contains("subsample_n")) stage.subsample_n = js.at("subsample_n").get<int>();
    if (js.contains("max_steps")) stage.max_steps = js.at("max_steps").get<long>();
    plan.stages.push_back(std::move(stage));
  }
  return plan;
}

// Tasks in a plan are either task.json paths or inline synthetic specs. When
// a synthetic task is present its vocabulary is unioned into the model's.
struct LoadedTasks {
  std::map<std::string, spanex::Task> registry;
  std::vector<spanex::Vocabulary> synthetic_vocabs;
};

LoadedTasks load_plan_tasks(const json& tasks_json,
                            const std::filesystem::path& base_dir) {
  LoadedTasks out;
  for (const auto& [name, spec] : tasks_json.items()) {
    if (spec.is_string()) {
      auto path = std::filesystem::path(spec.get<std::string>());
      if (path.is_relative()) path = base_dir / path;
      spanex::Task task = spanex::load_task(path.string());
      task.name = name;
      out.registry.emplace(name, std::move(task));
    } else if (spec.is_object() && spec.contains("synthetic")) {
      const auto& s = spec.at("synthetic");
      spanex::SyntheticTask generated = spanex::generate_synthetic_suite(
          s.at("kind").get<std::string>(), s.value("train_n", 200),
          s.value("dev_n", 50), s.value("seed", std::uint64_t{0}),
          s.value("vocab_size", 64));
      generated.task.name = name;
      out.registry.emplace(name, std::move(generated.task));
      out.synthetic_vocabs.push_back(std::move(generated.vocab));
    } else {
      throw std::invalid_argument("task '" + name +
                                  "': expected a task.json path or a synthetic spec");
    }
  }
  return out;
}

spanex::Vocabulary resolve_vocabulary(const json& plan_json,
                                      const std::filesystem::path& base_dir,
                                      const LoadedTasks& tasks) {
  if (plan_json.contains("vocab")) {
    auto path = std::filesystem::path(plan_json.at("vocab").get<std::string>());
    if (path.is_relative()) path = base_dir / path;
    return spanex::Vocabulary::from_file(path.string());
  }
  if (!tasks.synthetic_vocabs.empty() &&
      tasks.synthetic_vocabs.size() == tasks.registry.size()) {
    // All tasks synthetic: union of their token lists, first vocab's order.
    std::vector<std::string> tokens = tasks.synthetic_vocabs.front().tokens();
    std::set<std::string> seen(tokens.begin(), tokens.end());
    for (std::size_t i = 1; i < tasks.synthetic_vocabs.size(); ++i) {
      for (const auto& token : tasks.synthetic_vocabs[i].tokens()) {
        if (seen.insert(token).second) tokens.push_back(token);
      }
    }
    return spanex::Vocabulary::from_tokens(std::move(tokens));
  }
  // Mixed or file-based tasks: frequency vocabulary over all task text.
  std::vector<std::string> texts;
  for (const auto& [name, task] : tasks.registry) {
    for (const auto* split : {&task.train, &task.dev}) {
      for (const auto& ex : *split) {
        texts.push_back(ex.source_text);
        texts.push_back(ex.auxiliary_text);
      }
    }
  }
  return spanex::Vocabulary::build_from_corpus(texts, 100000);
}

int cmd_synth(const std::string& kind, int train_n, int dev_n, std::uint64_t seed,
              int vocab_size, const std::string& out_dir) {
  spanex::SyntheticTask generated =
      spanex::generate_synthetic_suite(kind, train_n, dev_n, seed, vocab_size);
  std::filesystem::create_directories(out_dir);
  spanex::save_task(generated.task, out_dir);
  generated.vocab.save((std::filesystem::path(out_dir) / "vocab.txt").string());
  std::cout << json({{"task", generated.task.name},
                     {"train_n", generated.task.train.size()},
                     {"dev_n", generated.task.dev.size()},
                     {"vocab_size", generated.vocab.size()},
                     {"out", out_dir}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open plan '" + config_path + "'");
  json plan_json;
  in >> plan_json;
  const auto base_dir = std::filesystem::path(config_path).parent_path();

  spanex::EncoderConfig config = encoder_config_from_json(plan_json.value("model", json::object()));
  spanex::RunConfig run = run_config_from_json(plan_json.value("run", json::object()));
  if (seed_override) run.seed = *seed_override;
  spanex::TrainingPlan plan = plan_from_json(plan_json);
  LoadedTasks tasks = load_plan_tasks(plan_json.at("tasks"), base_dir);
  spanex::Vocabulary vocab = resolve_vocabulary(plan_json, base_dir, tasks);
  if (config.vocab_size == 0) config.vocab_size = static_cast<int>(vocab.size());

  std::filesystem::create_directories(out_dir);
  const auto out_base = std::filesystem::path(out_dir);

  spanex::Model model = spanex::make_model(config, vocab, run.seed, run.init_std);
  spanex::PlanResult result;
  std::uint64_t best_seed = run.seed;
  if (run.restarts > 1) {
    spanex::RestartOutcome best = spanex::random_restarts(config, vocab, plan,
                                                          tasks.registry, run,
                                                          run.restarts);
    model = std::move(best.model);
    result = std::move(best.result);
    best_seed = best.seed;
  } else {
    result = spanex::run_plan(model, plan, tasks.registry, run);
  }

  spanex::save_checkpoint(model, (out_base / "model.ckpt").string());
  std::string report_lines;
  for (const auto& record : result.records) {
    report_lines += spanex::epoch_record_to_json(record);
    report_lines += '\n';
  }
  write_text_atomic((out_base / "report.jsonl").string(), report_lines);

  json summary;
  summary["seed"] = best_seed;
  summary["checkpoint"] = (out_base / "model.ckpt").string();
  if (result.final_dev) summary["final_dev"] = report_to_json(*result.final_dev);
  auto& audits = summary["stage_boundaries"] = json::array();
  for (const auto& audit : result.audits) {
    audits.push_back({{"next_stage", audit.next_stage},
                      {"weights_preserved", audit.weights_before == audit.weights_after},
                      {"moments_zero", audit.moments_zero_after},
                      {"step_count", audit.step_count_after}});
  }
  write_text_atomic((out_base / "result.json").string(), summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& task_path,
             const std::string& split, const std::string& mode_name,
             int max_span_len, bool dump) {
  spanex::Model model = spanex::load_checkpoint(ckpt_path);
  spanex::Task task = spanex::load_task(task_path);
  const auto& examples = split == "train" ? task.train : task.dev;
  if (examples.empty()) throw std::runtime_error("split '" + split + "' is empty");
  const auto compiled = spanex::compile_dataset(
      examples, model.vocab, static_cast<std::size_t>(model.config.max_positions));
  if (dump) {
    for (const auto& ex : compiled) {
      const auto pred = spanex::predict(model, ex, mode_from_name(mode_name),
                                        max_span_len);
      std::cout << json({{"source", ex.example.source_text},
                         {"auxiliary", ex.example.auxiliary_text},
                         {"gold", ex.example.gold_text()},
                         {"predicted", pred.text},
                         {"log_score", pred.log_score}})
                       .dump()
                << "\n";
    }
  }
  const spanex::MetricReport report = spanex::evaluate(
      model, compiled, task, mode_from_name(mode_name), max_span_len);
  std::cout << report_to_json(report).dump() << "\n";
  return 0;
}

int cmd_gradcheck(int num_layers, int hidden_dim, int num_heads, int ffn_dim,
                  std::uint64_t seed, double step, double tolerance,
                  double init_std) {
  spanex::EncoderConfig config;
  config.num_layers = num_layers;
  config.hidden_dim = hidden_dim;
  config.num_heads = num_heads;
  config.ffn_dim = ffn_dim;
  config.vocab_size = 24;
  config.max_positions = 16;

  std::vector<std::string> tokens = {spanex::Vocabulary::kPad, spanex::Vocabulary::kUnk,
                                     spanex::Vocabulary::kCls, spanex::Vocabulary::kSep};
  for (auto& w : spanex::synthetic_words(
           static_cast<std::size_t>(config.vocab_size) - tokens.size(), tokens)) {
    tokens.push_back(std::move(w));
  }
  spanex::Model model = spanex::make_model(
      config, spanex::Vocabulary::from_tokens(std::move(tokens)), seed, init_std);

  std::mt19937_64 rng(seed ^ 0x5eedull);
  std::vector<spanex::CompiledExample> batch;
  batch.push_back(spanex::make_probe_example(config.vocab_size, 5, 3, rng));
  batch.push_back(spanex::make_probe_example(config.vocab_size, 4, 2, rng));

  const spanex::GradCheckReport report =
      spanex::gradient_check(model, batch, step, tolerance);
  std::cout << spanex::format_report(report);
  return report.pass ? 0 : 1;
}

int cmd_convert(const std::string& format, const std::string& in_path,
                const std::string& out_path) {
  std::vector<spanex::SpanExample> examples;
  if (format == "squad") {
    examples = spanex::convert_squad_json(in_path, false);
  } else if (format == "squad2") {
    examples = spanex::convert_squad_json(in_path, true);
  } else {
    examples = spanex::convert_glue_tsv(in_path, spanex::glue_format_from_name(format));
  }
  spanex::save_dataset(examples, out_path);
  std::cout << json({{"examples", examples.size()}, {"out", out_path}}).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"span-extraction toolkit: train/evaluate a unified span model"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic task directory");
  std::string synth_kind = "lookup_qa";
  int synth_train = 200, synth_dev = 50, synth_vocab = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "synth_task";
  synth->add_option("--kind", synth_kind,
                    "lookup_qa | cue_classification | overlap_regression");
  synth->add_option("--train-n", synth_train, "training examples");
  synth->add_option("--dev-n", synth_dev, "dev examples");
  synth->add_option("--vocab-size", synth_vocab, "token table size");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "run a training plan");
  std::string train_config, train_out = "run";
  std::optional<std::uint64_t> train_seed;
  train->add_option("--config", train_config, "plan JSON path")->required();
  train->add_option("--seed", train_seed, "override the plan's seed");
  train->add_option("--out", train_out, "output directory");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a task split");
  std::string eval_ckpt, eval_task, eval_split = "dev", eval_mode = "independent";
  int eval_span_len = 30;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--task", eval_task, "task.json path")->required();
  eval->add_option("--split", eval_split, "train | dev");
  eval->add_option("--mode", eval_mode, "independent | joint");
  eval->add_option("--max-span-len", eval_span_len, "joint-mode span cap");
  bool eval_dump = false;
  eval->add_flag("--dump", eval_dump, "print one prediction JSON per example");

  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "finite-difference gradient verification");
  int gc_layers = 2, gc_dim = 16, gc_heads = 2, gc_ffn = 32;
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-5, gc_tol = 1e-5, gc_init_std = 0.5;
  gradcheck->add_option("--layers", gc_layers, "encoder layers");
  gradcheck->add_option("--dim", gc_dim, "hidden dimension");
  gradcheck->add_option("--heads", gc_heads, "attention heads");
  gradcheck->add_option("--ffn", gc_ffn, "feedforward dimension");
  gradcheck->add_option("--seed", gc_seed, "init/probe seed");
  gradcheck->add_option("--step", gc_step, "finite-difference step");
  gradcheck->add_option("--tol", gc_tol, "relative tolerance");
  gradcheck->add_option("--init-std", gc_init_std, "probe weight scale");

  auto* convert = app.add_subcommand("convert", "convert a public dataset to JSONL");
  std::string convert_format, convert_in, convert_out;
  convert->add_option("--format", convert_format,
                      "sst2 | mnli | rte | stsb | squad | squad2")->required();
  convert->add_option("--in", convert_in, "raw dataset path")->required();
  convert->add_option("--out", convert_out, "JSONL output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_kind, synth_train, synth_dev, synth_seed, synth_vocab,
                       synth_out);
    }
    if (train->parsed()) return cmd_train(train_config, train_seed, train_out);
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_task, eval_split, eval_mode, eval_span_len,
                      eval_dump);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_layers, gc_dim, gc_heads, gc_ffn, gc_seed, gc_step,
                           gc_tol, gc_init_std);
    }
    if (convert->parsed()) return cmd_convert(convert_format, convert_in, convert_out);
  } catch (const std::exception& e) {
    std::cerr << json({{"error", e.what()}}).dump() << "\n";
    return 1;
  }
  return 0;
}
