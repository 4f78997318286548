#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dirhoi/annotations.hpp"
#include "dirhoi/config.hpp"
#include "dirhoi/errors.hpp"
#include "dirhoi/parameters.hpp"
#include "dirhoi/training.hpp"

using namespace dirhoi;
namespace fs = std::filesystem;

namespace {

TrainConfig small_run() {
  TrainConfig c = TrainConfig::desk();
  c.model.grid_rows = c.data.grid_rows = 8;
  c.model.grid_cols = c.data.grid_cols = 8;
  c.model.dim = 16;
  c.model.ffn_dim = 32;
  c.model.num_queries = 6;
  c.model.encoder_layers = 1;
  c.model.detection_layers = 1;
  c.model.interaction_layers = 1;
  c.model.pose_layers = 1;
  c.data.train_scenes = 10;
  c.data.test_scenes = 4;
  c.validation_scenes = 2;
  c.epochs = 2;
  c.decay_epoch = 1;
  c.eval_every = 1;
  c.batch_size = 2;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dirhoi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DIRHOI_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config text round trip") {
    TrainConfig c = small_run();
    c.loss.box = 3.25;
    c.model.fusion = Fusion::kLate;
    c.optimizer = Optimizer::kAdamW;
    c.seed = 42;
    const std::string text = serialize_config(c);
    CHECK(parse_config(text) == c);
    CHECK(parse_config("# only a comment\n\n") == TrainConfig::desk());
    CHECK(parse_config("optim.learning_rate = 0.002\n").learning_rate == 0.002);

    const auto path = scratch("config") / "run.cfg";
    save_config(c, path);
    CHECK(load_config(path) == c);
  }

  TEST_CASE("config parse errors") {
    try {
      parse_config("model.dim = 16\nmodel.colour = 3\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_config("model.dim = 16\nmodel.dim = 32\n"), ParseError);
    CHECK_THROWS_AS(parse_config("model.dim = sixteen\n"), ParseError);
    CHECK_THROWS_AS(parse_config("model.dim\n"), ParseError);
    TrainConfig c = small_run();
    c.model.grid_rows = 16;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("profiles and schedule") {
    const TrainConfig desk = TrainConfig::desk();
    CHECK(desk.epochs == 60);
    CHECK(desk.decay_epoch == 40);
    CHECK(desk.learning_rate == 1e-4);
    const TrainConfig paper = TrainConfig::paper();
    CHECK(paper.epochs == 90);
    CHECK(paper.decay_epoch == 60);
    CHECK(learning_rate_at(desk, 0) == 1e-4);
    CHECK(learning_rate_at(desk, 39) == 1e-4);
    CHECK(learning_rate_at(desk, 40) == doctest::Approx(1e-5).epsilon(1e-15));

    const TrainConfig trend = TrainConfig::trend();
    CHECK_NOTHROW(trend.validate());
    CHECK(trend.data.train_scenes - trend.validation_scenes >= 500);
    CHECK(trend.data.verb_classes == 6);
    CHECK(profile_config("trend") == trend);
    CHECK(profile_config("paper") == paper);
    CHECK_THROWS_AS(profile_config("huge"), ConfigError);
    const TrainConfig over = parse_config("train.epochs = 3\n", trend);
    CHECK(over.epochs == 3);
    CHECK(over.model.dim == trend.model.dim);
  }

  TEST_CASE("variant flags") {
    const auto& names = variant_names();
    CHECK(names.size() == 9);
    CHECK(std::set<std::string>(names.begin(), names.end()).size() == 9);
    CHECK_THROWS_AS([] {
      ModelConfig m;
      apply_variant(m, "everything");
    }(), ConfigError);

    auto flags = [](const std::string& name) {
      ModelConfig m = ModelConfig::desk();
      apply_variant(m, name);
      return m;
    };
    const ModelConfig full = flags("early-fusion");
    CHECK(full.use_sca);
    CHECK(full.use_ipe);
    CHECK(full.sca_queries);
    CHECK(full.sca_gt_masks);
    CHECK(full.use_ipa_mask);
    CHECK(full.use_pose_loss);
    CHECK(full.fusion == Fusion::kEarly);
    CHECK_FALSE(flags("baseline").use_sca);
    CHECK_FALSE(flags("baseline").use_ipe);
    CHECK(flags("sca").use_sca);
    CHECK_FALSE(flags("sca").use_ipe);
    CHECK(flags("ipe").use_ipe);
    CHECK_FALSE(flags("ipe").use_sca);
    CHECK(flags("late-fusion").fusion == Fusion::kLate);
    CHECK_FALSE(flags("no-ipa-mask").use_ipa_mask);
    CHECK_FALSE(flags("no-pose-loss").use_pose_loss);
    CHECK_FALSE(flags("no-sca-queries").sca_queries);
    CHECK_FALSE(flags("no-gt-boxes").sca_gt_masks);

    // Each single-switch variant differs from its parent in one field.
    auto differences = [](ModelConfig a, const ModelConfig& b) {
      int n = 0;
      n += a.use_sca != b.use_sca;
      n += a.use_ipe != b.use_ipe;
      n += a.sca_queries != b.sca_queries;
      n += a.sca_gt_masks != b.sca_gt_masks;
      n += a.use_ipa_mask != b.use_ipa_mask;
      n += a.use_pose_loss != b.use_pose_loss;
      n += a.fusion != b.fusion;
      return n;
    };
    CHECK(differences(flags("late-fusion"), full) == 1);
    CHECK(differences(flags("no-ipa-mask"), flags("ipe")) == 1);
    CHECK(differences(flags("no-pose-loss"), flags("ipe")) == 1);
    CHECK(differences(flags("no-sca-queries"), flags("sca")) == 1);
    CHECK(differences(flags("no-gt-boxes"), flags("sca")) == 1);
  }

  TEST_CASE("baseline equals the model with every switch off") {
    TrainConfig c = small_run();
    ModelConfig a = c.model, b = c.model;
    apply_variant(a, "baseline");
    b.use_sca = false;
    b.use_ipe = false;
    b.use_ipa_mask = false;
    b.use_pose_loss = false;
    const Model ma(a, 5), mb(b, 5);
    CHECK(ma.parameter_count() == mb.parameter_count());
    const DatasetSplit split = generate(3, c.data);
    for (bool training : {false, true}) {
      ForwardInputs in;
      in.features = scene_features(split.train[0], c.data);
      in.training = training;
      in.gt_pairs = box_pairs(scene_targets(split.train[0], c.model.verb_classes));
      const auto oa = ma.forward(in), ob = mb.forward(in);
      CHECK(oa.verb_logits.values().size() == ob.verb_logits.values().size());
      CHECK(std::equal(oa.verb_logits.values().begin(), oa.verb_logits.values().end(),
                       ob.verb_logits.values().begin()));
      CHECK(std::equal(oa.human_boxes.values().begin(), oa.human_boxes.values().end(),
                       ob.human_boxes.values().begin()));
    }
  }

  TEST_CASE("two-epoch smoke run and reproducibility") {
    const TrainConfig c = small_run();
    const DatasetSplit split = generate(c.data_seed, c.data);
    Model a(c.model, c.seed), b(c.model, c.seed);
    std::size_t epochs_seen = 0;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord&) { ++epochs_seen; };
    const TrainResult ra = train(a, c, split, hooks);
    const TrainResult rb = train(b, c, split);
    CHECK(epochs_seen == 2);
    REQUIRE(ra.epochs.size() == 2);
    for (const auto& e : ra.epochs) {
      CHECK(std::isfinite(e.loss));
      CHECK(e.loss > 0.0);
      CHECK(e.evaluated);
      CHECK(e.learning_rate == learning_rate_at(c, e.epoch));
      CHECK(std::fabs(e.loss - (e.learnable + e.sca + e.pose)) <= 1e-9 * e.loss);
    }
    CHECK_FALSE(ra.best_checkpoint.empty());
    CHECK(ra.best_checkpoint == rb.best_checkpoint);
    CHECK(ra.metric_log == rb.metric_log);

    const fs::path dir = scratch("smoke");
    write_training_outputs(ra, c, dir);
    CHECK(fs::exists(dir / "checkpoint.bin"));
    CHECK(fs::exists(dir / "metrics.jsonl"));
    CHECK(read_file(dir / "metrics.jsonl") == ra.metric_log);
    CHECK(load_config(dir / "config.txt") == c);

    TrainConfig other = c;
    other.seed = 1;
    Model m(other.model, other.seed);
    CHECK(train(m, other, split).best_checkpoint != ra.best_checkpoint);
  }

  TEST_CASE("loss falls steadily under small gradient steps") {
    TrainConfig c = small_run();
    c.optimizer = Optimizer::kMomentum;
    c.momentum = 0.0;
    c.weight_decay = 0.0;
    c.grad_clip = 0.0;
    const DatasetSplit split = generate(c.data_seed, c.data);
    Model m(c.model, 9);
    OptimizerState opt(c);
    double previous = INFINITY;
    int decreases = 0;
    for (int step = 0; step < 50; ++step) {
      m.parameters().zero_grad();
      double loss = 0.0;
      for (std::size_t s = 0; s < 2; ++s) loss += scene_step(m, split.train[s], c, 0.5).total.item();
      if (loss < previous) ++decreases;
      INFO("step " << step << " loss " << loss);
      CHECK(loss < previous);
      previous = loss;
      opt.step(m.parameters(), 2e-4);
    }
    CHECK(decreases == 50);
  }

  TEST_CASE("gradient clipping") {
    ParameterSet p;
    Tensor& a = p.create("a", {2}, Init::kZeros);
    a.mutable_grad()[0] = 3.0;
    a.mutable_grad()[1] = 4.0;
    CHECK(OptimizerState::clip_gradients(p, 1.0) == 5.0);
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(a.grad()[1] == doctest::Approx(0.8));
    CHECK(OptimizerState::clip_gradients(p, 0.0) == doctest::Approx(1.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
  }

  TEST_CASE("a non-finite loss names its term") {
    const TrainConfig c = small_run();
    const DatasetSplit split = generate(c.data_seed, c.data);
    Model m(c.model, 2);
    for (auto& v : m.parameters().get("head.keypoints.1.bias").mutable_values()) v = std::nan("");
    std::size_t scene = 0;
    while (split.train[scene].pairs.empty()) ++scene;
    try {
      scene_step(m, split.train[scene], c, 1.0);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("'pose'") != std::string::npos);
    }
  }

  TEST_CASE("command line pipeline") {
    const fs::path dir = scratch("cli");
    TrainConfig c = small_run();
    c.epochs = 1;
    save_config(c, dir / "run.cfg");
    const std::string cfg = "--config " + (dir / "run.cfg").string();
    const std::string data = (dir / "data.jsonl").string();

    CHECK(run_cli("generate " + cfg + " --out " + data, dir / "gen.log") == 0);
    CHECK(fs::exists(data));
    CHECK(run_cli("train " + cfg + " --data " + data + " --out " + (dir / "run").string(),
                  dir / "train.log") == 0);
    CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
    CHECK(run_cli("eval " + cfg + " --data " + data + " --checkpoint " +
                      (dir / "run" / "checkpoint.bin").string() + " --out " + (dir / "eval").string(),
                  dir / "eval.log") == 0);
    CHECK(fs::exists(dir / "eval" / "report.csv"));
    CHECK(read_file(dir / "eval.log").find("DT") != std::string::npos);

    // Untrained weights still give a valid report.
    CHECK(run_cli("eval " + cfg + " --data " + data + " --out " + (dir / "eval0").string(),
                  dir / "eval0.log") == 0);

    CHECK(run_cli("dump-attention " + cfg + " --data " + data + " --training --out " +
                      (dir / "attn").string(),
                  dir / "dump.log") == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "attn")) files += e.is_regular_file();
    const std::size_t pairs = load_annotations(data).test[0].pairs.size();
    const std::size_t rows = c.model.num_queries;
    const std::size_t sca = std::min(pairs, c.model.max_sca_queries);
    const std::size_t layers = c.model.interaction_layers + c.model.pose_layers;
    CHECK(files == layers * c.model.heads * (rows + sca));

    CHECK(run_cli("inspect-checkpoint " + cfg + " --checkpoint " +
                      (dir / "run" / "checkpoint.bin").string(),
                  dir / "inspect.log") == 0);
    CHECK(read_file(dir / "inspect.log").find("queries.learnable") != std::string::npos);

    CHECK(run_cli("eval --config " + (dir / "missing.cfg").string() + " --out " + (dir / "x").string(),
                  dir / "fail.log") != 0);
    const std::string err = read_file(dir / "fail.log");
    CHECK(err.find("error:") == 0);
    CHECK(std::count(err.begin(), err.end(), '\n') == 1);
    CHECK(run_cli("train --out " + (dir / "y").string() + " --variant nonsense", dir / "fail2.log") != 0);
  }
}
