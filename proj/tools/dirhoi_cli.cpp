// Command-line front end: generate, train, eval, ablate, dump-attention,
// inspect-checkpoint.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dirhoi/annotations.hpp"
#include "dirhoi/config.hpp"
#include "dirhoi/errors.hpp"
#include "dirhoi/evaluation.hpp"
#include "dirhoi/model.hpp"
#include "dirhoi/parameters.hpp"
#include "dirhoi/synthetic.hpp"
#include "dirhoi/training.hpp"

namespace fs = std::filesystem;
using namespace dirhoi;

namespace {

struct Common {
  std::string config;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::string data;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "config file (key = value)");
  cmd->add_option("--profile", c.profile, "base settings the config file overrides")
      ->check(CLI::IsMember({"desk", "trend"}));
  cmd->add_option("--seed", c.seed, "seed override");
  if (needs_out) cmd->add_option("--out", c.out, "output location")->required();
  cmd->add_option("--variant", c.variant, "ablation variant to apply");
}

TrainConfig load(const Common& c) {
  const TrainConfig base = profile_config(c.profile);
  TrainConfig config = c.config.empty() ? base : load_config(c.config, base);
  if (!c.variant.empty()) apply_variant(config.model, c.variant);
  config.validate();
  return config;
}

DatasetSplit dataset(const Common& c, const TrainConfig& config) {
  if (!c.data.empty()) return load_annotations(c.data);
  return generate(config.data_seed, config.data);
}

Model load_model(const TrainConfig& config, const std::string& checkpoint) {
  Model model(config.model, config.seed);
  if (!checkpoint.empty()) load_checkpoint(model.parameters(), read_checkpoint(checkpoint));
  return model;
}

int run_generate(const Common& c) {
  TrainConfig config = load(c);
  if (c.seed) config.data_seed = *c.seed;
  const DatasetSplit split = generate(config.data_seed, config.data);
  const fs::path out(c.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_annotations(split, out);
  std::size_t rare = 0;
  for (bool r : split.rare_categories) rare += r ? 1 : 0;
  std::cout << "wrote " << split.train.size() << " train and " << split.test.size()
            << " test scenes to " << out.string() << " (" << rare << " rare categories)\n";
  return 0;
}

int run_train(const Common& c) {
  TrainConfig config = load(c);
  if (c.seed) config.seed = *c.seed;
  const DatasetSplit split = dataset(c, config);
  Model model(config.model, config.seed);
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochRecord& r) { std::cout << metric_line(r) << '\n' << std::flush; };
  const TrainResult result = train(model, config, split, hooks);
  write_training_outputs(result, config, c.out);
  std::cout << "best epoch " << result.best_epoch << " checkpoint in " << c.out << '\n';
  return 0;
}

int run_eval(const Common& c) {
  TrainConfig config = load(c);
  if (c.seed) config.seed = *c.seed;
  const DatasetSplit split = dataset(c, config);
  const Model model = load_model(config, c.checkpoint);
  const EvalReport report = evaluate_model(model, split.test, split, config.top_k);
  const std::string text = format_report(report);
  std::cout << text;
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "report.txt") << text;
  write_report_csv(report, fs::path(c.out) / "report.csv");
  return 0;
}

int run_ablate(const Common& c, std::size_t seed_count, const std::vector<std::string>& only) {
  TrainConfig config = load(c);
  const std::uint64_t base = c.seed.value_or(config.seed);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < seed_count; ++i) seeds.push_back(base + i);
  std::vector<std::string> variants = only.empty() ? variant_names() : only;
  if (!c.variant.empty()) variants = {c.variant};
  const DatasetSplit split = dataset(c, config);
  const auto runs = ablate(config, split, variants, seeds,
                           [](const std::string& line) { std::cout << line << '\n' << std::flush; });
  const std::string table = format_ablation(runs);
  std::cout << '\n' << table;
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "ablation.txt") << table;
  return 0;
}

int run_dump(const Common& c, std::size_t scene_index, bool training_mode) {
  TrainConfig config = load(c);
  if (c.seed) config.seed = *c.seed;
  const DatasetSplit split = dataset(c, config);
  if (scene_index >= split.test.size()) throw std::out_of_range("scene index out of range");
  const Scene& scene = split.test[scene_index];
  const Model model = load_model(config, c.checkpoint);
  AttentionRecorder recorder(config.model.grid_rows, config.model.grid_cols);
  recorder.set_enabled(true);
  ForwardInputs inputs;
  inputs.features = scene_features(scene, split.config);
  inputs.training = training_mode;
  if (training_mode) inputs.gt_pairs = box_pairs(scene_targets(scene, config.model.verb_classes));
  inputs.recorder = &recorder;
  model.forward(inputs);
  fs::create_directories(c.out);
  const std::size_t files = recorder.write_grids(c.out);
  std::cout << "wrote " << files << " attention grids to " << c.out << '\n';
  return 0;
}

int run_inspect(const Common& c) {
  const auto entries = read_checkpoint(c.checkpoint);
  std::size_t scalars = 0;
  for (const auto& e : entries) {
    std::cout << e.name << " [";
    for (std::size_t i = 0; i < e.shape.size(); ++i) std::cout << (i ? "x" : "") << e.shape[i];
    std::cout << "]\n";
    scalars += e.values.size();
  }
  std::cout << entries.size() << " tensors, " << scalars << " values\n";
  if (!c.config.empty()) {
    Model model(load(c).model, 0);
    load_checkpoint(model.parameters(), entries);
    std::cout << "matches the model described by " << c.config << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled interaction representation for HOI detection on synthetic scenes"};
  app.require_subcommand(1);

  Common gen, tr, ev, ab, dump, inspect;
  std::size_t seed_count = 3;
  std::vector<std::string> only;
  std::size_t scene_index = 0;
  bool training_mode = false;

  auto* g = app.add_subcommand("generate", "write a synthetic annotation file");
  add_common(g, gen);

  auto* t = app.add_subcommand("train", "train a model and save the best checkpoint");
  add_common(t, tr);
  t->add_option("--data", tr.data, "annotation file (default: generate from config)");

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(e, ev);
  e->add_option("--data", ev.data, "annotation file");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint (default: untrained weights)");

  auto* a = app.add_subcommand("ablate", "train and compare variants over several seeds");
  add_common(a, ab);
  a->add_option("--data", ab.data, "annotation file");
  a->add_option("--seeds", seed_count, "number of consecutive seeds")->check(CLI::PositiveNumber);
  a->add_option("--only", only, "subset of variants");

  auto* d = app.add_subcommand("dump-attention", "write attention grids for one test scene");
  add_common(d, dump);
  d->add_option("--data", dump.data, "annotation file");
  d->add_option("--checkpoint", dump.checkpoint, "checkpoint (default: untrained weights)");
  d->add_option("--scene", scene_index, "test scene index");
  d->add_flag("--training", training_mode, "run in training mode so shunted masks are applied");

  auto* i = app.add_subcommand("inspect-checkpoint", "list the tensors in a checkpoint");
  add_common(i, inspect, false);
  i->add_option("--checkpoint", inspect.checkpoint, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (a->parsed()) return run_ablate(ab, seed_count, only);
    if (d->parsed()) return run_dump(dump, scene_index, training_mode);
    if (i->parsed()) return run_inspect(inspect);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
