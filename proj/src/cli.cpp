// SPDX-License-Identifier: Apache-2.0

#include "mivc/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mivc/checkpoint.hpp"
#include "mivc/data.hpp"
#include "mivc/eval.hpp"
#include "mivc/gradcheck.hpp"
#include "mivc/io_util.hpp"
#include "mivc/run_config.hpp"

namespace mivc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> kind;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> hidden;
  std::optional<std::string> optimizer;
  std::optional<std::string> train_manifest;
  std::optional<std::string> eval_manifest;
  std::optional<std::size_t> n_bags;
  std::optional<std::string> strategies;
};

void add_config_flag(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration (flags override it)");
  cmd->add_option("--seed", f.seed, "Seed for all randomness in this run");
  cmd->add_option("--out", f.out, "Output directory");
}

void add_train_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--kind", f.kind,
                  "Strategy: single, concat-grid, concat-embed, avg, max, attn, gated");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--lr", f.learning_rate, "Learning rate");
  cmd->add_option("--batch-size", f.batch_size, "Bags per optimizer step");
  cmd->add_option("--K", f.hidden, "Attention hidden width");
  cmd->add_option("--optimizer", f.optimizer, "sgd or adam");
}

RunConfig resolve_config(const ConfigFlags& f) {
  RunConfig c = default_run_config();
  if (!f.config_path.empty()) {
    if (!fs::exists(f.config_path)) throw UsageError("config file not found: " + f.config_path);
    c = parse_run_config(io::read_file(f.config_path));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.kind) c.train.strategy = parse_strategy(*f.kind);
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.hidden) c.train.hidden = *f.hidden;
  if (f.optimizer) c.train.optimizer = parse_optimizer_kind(*f.optimizer);
  if (f.train_manifest) c.train_manifest = *f.train_manifest;
  if (f.eval_manifest) c.eval_manifest = *f.eval_manifest;
  if (f.n_bags) c.synthetic.n_bags = *f.n_bags;
  if (f.strategies) {
    c.strategies.clear();
    std::stringstream ss(*f.strategies);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) c.strategies.push_back(parse_strategy(item));
    }
    if (c.strategies.empty()) throw UsageError("--strategies lists no strategy");
  }
  c.sync_seed();
  return c;
}

fs::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw UsageError("an output directory is required (--out or config 'out')");
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) {
    throw LoadError(LoadErrorKind::kMissingFile, std::string(what) + " " + path);
  }
}

void write_text(const fs::path& path, const std::string& text) { io::write_file_atomic(path, text); }

json vector_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

std::string history_jsonl(const std::vector<EpochStats>& history) {
  std::string out;
  for (const auto& h : history) {
    out += json{{"epoch", h.epoch}, {"loss", h.loss}, {"accuracy", h.accuracy}}.dump() + "\n";
  }
  return out;
}

// ---- gen ------------------------------------------------------------------

int cmd_gen(const ConfigFlags& f, std::ostream& out) {
  RunConfig c = resolve_config(f);
  const fs::path dir = require_out(c);
  const SyntheticDataset data = generate_synthetic(c.synthetic);
  write_synthetic(dir, data);
  write_text(dir / "resolved_config.json", run_config_json(c));
  json summary = {{"out", dir.string()},
                  {"train_bags", data.train.size()},
                  {"eval_bags", data.eval.size()},
                  {"classes", data.class_centers.size()},
                  {"warnings", data.warnings}};
  out << summary.dump() << "\n";
  return kExitOk;
}

// ---- pool -----------------------------------------------------------------

struct PoolFlags {
  std::string input;
  std::string kind;
  std::string params;
  bool random_init = false;
  std::optional<std::uint64_t> seed;
  std::size_t hidden = 64;
  std::string out;
  char delimiter = ',';
};

Bag read_input_bag(const std::string& path, char delimiter) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() >= 4 && bytes.compare(0, 4, std::string(kBagMagic, 4)) == 0) {
    Bag bag = decode_bag(bytes, path);
    bag.id = fs::path(path).stem().string();
    return bag;
  }
  return parse_csv(bytes, delimiter, path);
}

int cmd_pool(const PoolFlags& f, std::ostream& out) {
  const PoolingKind kind = parse_pooling_kind(f.kind);
  if (is_attention(kind) && f.params.empty() && !f.random_init) {
    throw UsageError(f.kind + " pooling needs --params <checkpoint> or --random-init --seed <s>");
  }
  if (f.random_init && !f.seed) throw UsageError("--random-init requires --seed");
  if (!f.params.empty() && f.random_init) throw UsageError("--params and --random-init conflict");
  if (f.hidden == 0) throw UsageError("--K must be positive");
  require_file(f.input, "--input");
  if (!f.params.empty()) require_file(f.params, "--params");

  const Bag bag = read_input_bag(f.input, f.delimiter);
  bag.validate();

  PoolingParams params = PoolingParams::parameter_free(PoolingKind::kAvg);
  if (!is_attention(kind)) {
    params = PoolingParams::parameter_free(kind);
  } else if (!f.params.empty()) {
    const Model model = load_checkpoint(f.params);
    if (model.pooling.kind != kind) {
      throw UsageError("checkpoint pools with " + std::string(to_string(model.pooling.kind)) +
                       ", requested " + f.kind);
    }
    params = model.pooling;
  } else {
    Rng rng(*f.seed);
    params = PoolingParams::random(kind, f.hidden, bag.dim(), rng);
  }

  PooledOutput pooled;
  json doc = json::object();
  doc["kind"] = f.kind;
  doc["n_instances"] = bag.size();
  if (bag.instances.front().shape) {
    const InstanceEmbedding shaped = pool_shaped(params, bag, &pooled);
    doc["shape"] = {shaped.shape->patches, shaped.shape->dims};
  } else {
    pooled = pool(params, bag);
  }
  doc["E"] = vector_json(pooled.E);
  if (pooled.alpha) doc["alpha"] = vector_json(*pooled.alpha);
  if (pooled.argmax_index) doc["argmax_index"] = *pooled.argmax_index;

  const std::string text = doc.dump() + "\n";
  if (f.out.empty() || f.out == "-") {
    out << text;
  } else {
    write_text(f.out, text);
  }
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------------

struct GradFlags {
  std::string kind = "all";
  long long trials = 100;
  std::uint64_t seed = 7;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradFlags& f, std::ostream& out) {
  if (f.trials < 1) throw UsageError("--trials must be >= 1");
  std::vector<PoolingKind> kinds;
  if (f.kind == "all") {
    kinds = {PoolingKind::kAttn, PoolingKind::kGated};
  } else {
    const PoolingKind k = parse_pooling_kind(f.kind);
    if (!is_attention(k)) throw UsageError("--kind must be attn, gated or all");
    kinds = {k};
  }
  GradCheckOptions options;
  options.trials = static_cast<std::size_t>(f.trials);
  options.seed = f.seed;
  options.inject_fault = f.inject_fault;

  bool passed = true;
  for (PoolingKind k : kinds) {
    const GradCheckReport report = check_pool_gradients(k, options);
    for (const auto& g : report.groups) {
      out << json{{"kind", std::string(to_string(k))},
                  {"group", g.group},
                  {"max_rel_error", g.max_rel_error},
                  {"entries", g.entries},
                  {"tolerance", options.tolerance},
                  {"passed", g.max_rel_error < options.tolerance}}
                 .dump()
          << "\n";
    }
    passed = passed && report.passed;
  }
  return passed ? kExitOk : kExitCheckFailed;
}

// ---- params -----------------------------------------------------------------

struct ParamFlags {
  std::string kind;
  std::size_t hidden = 64;
  std::size_t dim = 0;
  std::optional<std::size_t> in_dim;
  std::size_t classes = 2;
  std::string encoder = "identity";
  std::size_t max_images = 6;
  std::size_t concat_hidden = 32;
};

int cmd_params(const ParamFlags& f, std::ostream& out) {
  TrainConfig c;
  c.strategy = parse_strategy(f.kind);
  c.hidden = f.hidden;
  c.dim = f.dim;
  c.encoder = parse_encoder_kind(f.encoder);
  c.in_dim = f.in_dim.value_or(f.dim);
  c.classes = f.classes;
  c.max_images = f.max_images;
  c.concat_hidden = f.concat_hidden;
  const ParamReport r = count_params(c);
  out << json{{"kind", f.kind},
              {"K", f.hidden},
              {"M", f.dim},
              {"M_in", c.in_dim},
              {"C", f.classes},
              {"encoder", r.encoder},
              {"pooling", r.pooling},
              {"concat_projection", r.concat_projection},
              {"head", r.head},
              {"baseline_total", r.baseline_total},
              {"total", r.total},
              {"extra", r.extra_over_baseline}}
             .dump()
      << "\n";
  return kExitOk;
}

// ---- train / eval / bench ---------------------------------------------------

int cmd_train(const ConfigFlags& f, std::ostream& out) {
  RunConfig c = resolve_config(f);
  require_file(c.train_manifest, "train manifest");
  if (!c.eval_manifest.empty()) require_file(c.eval_manifest, "eval manifest");
  const fs::path dir = require_out(c);

  const DatasetManifest train_manifest = load_manifest(c.train_manifest);
  const std::vector<Bag> train_bags = load_dataset(train_manifest);
  std::optional<DatasetManifest> eval_manifest;
  std::vector<Bag> eval_bags;
  if (!c.eval_manifest.empty()) {
    eval_manifest = load_manifest(c.eval_manifest);
    eval_bags = load_dataset(*eval_manifest);
  }
  resolve_dims(c, train_bags, train_manifest.classes());

  const TrainResult result = train(c.train, train_bags);
  save_checkpoint(dir / "model.mivm", result.model);
  write_text(dir / "history.jsonl", history_jsonl(result.history));
  write_text(dir / "resolved_config.json", run_config_json(c));

  json summary = {{"checkpoint", (dir / "model.mivm").string()},
                  {"strategy", std::string(to_string(c.train.strategy))},
                  {"final_loss", result.history.back().loss},
                  {"train_accuracy", result.history.back().accuracy}};
  if (!eval_bags.empty()) {
    const MetricsReport m = evaluate(result.model, eval_bags);
    write_text(dir / "metrics.json", metrics_json(m));
    summary["eval_accuracy"] = m.accuracy;
  }
  out << summary.dump() << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string manifest;
  std::string out;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  require_file(f.checkpoint, "--checkpoint");
  require_file(f.manifest, "--manifest");
  if (f.out.empty()) throw UsageError("--out is required");
  const fs::path dir(f.out);
  fs::create_directories(dir);

  const Model model = load_checkpoint(f.checkpoint);
  const std::vector<Bag> bags = load_dataset(load_manifest(f.manifest));
  const MetricsReport m = evaluate(model, bags);
  write_text(dir / "metrics.json", metrics_json(m));
  json summary = {{"strategy", std::string(to_string(model.strategy))},
                  {"accuracy", m.accuracy},
                  {"macro_precision", m.macro_precision},
                  {"macro_recall", m.macro_recall}};
  if (const auto k = pooling_kind_of(model.strategy); k && is_attention(*k)) {
    const auto reports = export_attention(model, bags, dir / "attention.jsonl");
    summary["attention"] = (dir / "attention.jsonl").string();
    bool any_witness = std::any_of(bags.begin(), bags.end(),
                                   [](const Bag& b) { return !witnesses_of(b).empty(); });
    if (any_witness) summary["witness_hit_rate"] = witness_hit_rate(reports, bags);
  }
  out << summary.dump() << "\n";
  return kExitOk;
}

int cmd_bench(const ConfigFlags& f, std::ostream& out) {
  RunConfig c = resolve_config(f);
  if (!c.train_manifest.empty() || !c.eval_manifest.empty()) {
    require_file(c.train_manifest, "train manifest");
    require_file(c.eval_manifest, "eval manifest");
  }
  const fs::path dir = require_out(c);

  std::vector<Bag> train_bags, eval_bags;
  std::size_t classes = 0;
  if (!c.train_manifest.empty()) {
    const DatasetManifest tm = load_manifest(c.train_manifest);
    train_bags = load_dataset(tm);
    eval_bags = load_dataset(load_manifest(c.eval_manifest));
    classes = tm.classes();
  } else {
    SyntheticDataset data = generate_synthetic(c.synthetic);
    classes = data.class_centers.size();
    train_bags = std::move(data.train);
    eval_bags = std::move(data.eval);
  }
  resolve_dims(c, train_bags, classes);
  write_text(dir / "resolved_config.json", run_config_json(c));

  const auto rows = run_benchmark(train_bags, eval_bags, c.strategies, c.train);
  for (const auto& row : rows) {
    const std::string name(to_string(row.strategy));
    save_checkpoint(dir / "models" / (name + ".mivm"), row.trained.model);
    if (const auto k = pooling_kind_of(row.strategy); k && is_attention(*k)) {
      export_attention(row.trained.model, eval_bags, dir / ("attention_" + name + ".jsonl"));
    }
  }
  const std::string table = benchmark_table(rows);
  write_text(dir / "benchmark.jsonl", benchmark_jsonl(rows));
  write_text(dir / "benchmark.txt", table);
  out << table;
  return kExitOk;
}

void emit_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple-instance pooling toolkit: pool bags of embeddings, train and "
               "benchmark pooling strategies, verify gradients.",
               "mivc"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, bench_flags;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic witness-style bag dataset");
  add_config_flag(gen, gen_flags);
  gen->add_option("--n-bags", gen_flags.n_bags, "Number of bags to generate");

  PoolFlags pool_flags;
  auto* pool_cmd = app.add_subcommand("pool", "Pool one bag and write E (and alpha) as JSON");
  pool_cmd->add_option("--input", pool_flags.input, "Bag file (.mivc) or CSV, one instance per row")
      ->required();
  pool_cmd->add_option("--kind", pool_flags.kind, "avg, max, attn or gated")->required();
  pool_cmd->add_option("--params", pool_flags.params, "Checkpoint holding attention parameters");
  pool_cmd->add_flag("--random-init", pool_flags.random_init,
                     "Draw attention parameters from --seed instead of --params");
  pool_cmd->add_option("--seed", pool_flags.seed, "Seed for --random-init");
  pool_cmd->add_option("--K", pool_flags.hidden, "Attention hidden width for --random-init");
  pool_cmd->add_option("--delimiter", pool_flags.delimiter, "CSV delimiter");
  pool_cmd->add_option("--out", pool_flags.out, "Output JSON path ('-' for stdout)");

  auto* train_cmd = app.add_subcommand("train", "Train one strategy on a manifest dataset");
  add_config_flag(train_cmd, train_flags);
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--train-manifest", train_flags.train_manifest, "Training manifest");
  train_cmd->add_option("--eval-manifest", train_flags.eval_manifest, "Evaluation manifest");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and export attention");
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_flags.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--out", eval_flags.out, "Output directory")->required();

  auto* bench = app.add_subcommand("bench", "Train and compare pooling strategies and baselines");
  add_config_flag(bench, bench_flags);
  add_train_flags(bench, bench_flags);
  bench->add_option("--strategies", bench_flags.strategies, "Comma-separated strategy list");
  bench->add_option("--train-manifest", bench_flags.train_manifest, "Training manifest");
  bench->add_option("--eval-manifest", bench_flags.eval_manifest, "Evaluation manifest");
  bench->add_option("--n-bags", bench_flags.n_bags, "Synthetic bag count");

  GradFlags grad_flags;
  auto* grad = app.add_subcommand("gradcheck", "Check attention gradients by finite differences");
  grad->add_option("--kind", grad_flags.kind, "attn, gated or all");
  grad->add_option("--trials", grad_flags.trials, "Random problems per kind");
  grad->add_option("--seed", grad_flags.seed, "Seed");
  grad->add_flag("--inject-fault", grad_flags.inject_fault,
                 "Perturb the analytic gradient (negative control; must fail)");

  ParamFlags param_flags;
  auto* params_cmd = app.add_subcommand("params", "Report parameter counts for a configuration");
  params_cmd->add_option("--kind", param_flags.kind, "Strategy or pooling kind")->required();
  params_cmd->add_option("--K", param_flags.hidden, "Attention hidden width");
  params_cmd->add_option("--M", param_flags.dim, "Pooled embedding dimension")->required();
  params_cmd->add_option("--M-in", param_flags.in_dim, "Encoder input dimension (default M)");
  params_cmd->add_option("--C", param_flags.classes, "Number of classes");
  params_cmd->add_option("--encoder", param_flags.encoder, "identity or mlp1");
  params_cmd->add_option("--max-images", param_flags.max_images, "concat-embed image cap");
  params_cmd->add_option("--concat-hidden", param_flags.concat_hidden,
                         "concat-embed bottleneck width");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags, out);
    if (pool_cmd->parsed()) return cmd_pool(pool_flags, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, out);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags, out);
    if (bench->parsed()) return cmd_bench(bench_flags, out);
    if (grad->parsed()) return cmd_gradcheck(grad_flags, out);
    if (params_cmd->parsed()) return cmd_params(param_flags, out);
  } catch (const UsageError& e) {
    emit_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    emit_error(err, "data", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    emit_error(err, "data", e.what());
    return kExitData;
  }
  emit_error(err, "usage", "no command given");
  return kExitUsage;
}

}  // namespace mivc::cli
