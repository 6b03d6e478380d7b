#include "torch_doctest.hpp"

#include <fstream>
#include <set>

#include "carotid/phantom.hpp"
#include "carotid/trainer.hpp"
#include "fixtures.hpp"

using namespace carotid;

namespace {

// Eight small volumes from four subjects, generated once per process.
struct TinyCohort {
  fixtures::TempDir dir{"tiny_cohort"};
  std::vector<CohortEntry> entries;

  TinyCohort() {
    PhantomSpec s;
    s.n_slices = 4;
    s.rows = 64;
    s.cols = 80;
    s.mab_radius = {13, 16};
    s.wall_thickness = {3, 5};
    s.speckle_strength = 0.1;
    s.shadow_probability = 0;
    s.write_roi = true;
    entries = generate_cohort(8, s, 5, dir.path());
  }
};

TinyCohort& cohort() {
  static TinyCohort c;
  return c;
}

NetConfig tiny_net() {
  NetConfig n;
  n.input_rows = 32;
  n.input_cols = 32;
  n.depth = 2;
  n.base_channels = 4;
  return n;
}

TrainConfig tiny_train(LossMode mode) {
  TrainConfig t;
  t.mode = mode;
  t.epochs = 5;
  t.batch_size = 4;
  t.seed = 13;
  t.use_reslice_augment = false;
  t.augment = AugmentPolicy::identity();
  t.learning_rate = 3e-3;
  return t;
}

TrainingSet tiny_set(const TrainConfig& t) {
  // make_split wants five subjects; the tiny cohort has four, so split by hand.
  const auto train = load_partition(cohort().dir.path(), {"subj_000", "subj_001", "subj_002"});
  const auto val = load_partition(cohort().dir.path(), {"subj_003"});
  return build_training_set(train, val, t, tiny_net());
}

}  // namespace

TEST_CASE("partitions and samples") {
  const auto train = load_partition(cohort().dir.path(), {"subj_000", "subj_002"});
  REQUIRE(train.size() == 4);
  std::set<std::string> subjects;
  for (const auto& v : train) subjects.insert(v.subject_id);
  CHECK(subjects == std::set<std::string>{"subj_000", "subj_002"});
  const auto samples = network_samples(train[0], Artery::CCA, 32, 32);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].image.rows() == 32);
  CHECK(samples[0].labels.mab.cols() == 32);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < s.labels.lib.size(); ++i)
      if (s.labels.lib.values()[i]) CHECK(s.labels.mab.values()[i]);
  CHECK(network_samples(train[0], Artery::ICA, 32, 32).size() == 4);

  const auto pool = resliced_samples(train[0], Artery::CCA, 0.25, 32, 32);
  const double extent = (train[0].volume.n_slices() - 1) * train[0].volume.slice_spacing;
  CHECK(pool.size() == static_cast<std::size_t>(std::lround(extent / 0.25)) + 1);
}

TEST_CASE("empty training partition throws") {
  TrainingSet empty;
  CHECK_THROWS_AS(train(tiny_train(LossMode::TDL), tiny_net(), empty), ArgumentError);
}

TEST_CASE("TDL training: loss falls, weights constant, best >= final") {
  const auto cfg = tiny_train(LossMode::TDL);
  const auto r = train(cfg, tiny_net(), tiny_set(cfg));
  REQUIRE(r.epochs.size() == 5);
  int falls = 0;
  for (std::size_t i = 1; i < r.epochs.size(); ++i) falls += r.epochs[i].train_loss < r.epochs[i - 1].train_loss;
  CHECK(falls >= 3);
  for (const auto& s : r.steps) {
    CHECK(s.weights.alpha == 1.0 / 3);
    CHECK(s.weights.gamma == 1.0 / 3);
  }
  CHECK(r.best_val_dsc >= r.final_val_dsc);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_epoch <= 5);
  CHECK(r.best_val_dsc == doctest::Approx(r.epochs[r.best_epoch - 1].val_dsc));
  CHECK_FALSE(r.model->is_training());

  // The returned model carries the best epoch's weights.
  const auto val = tiny_set(cfg).validation;
  Segmenter best = r.model;
  CHECK(validate(best, val, 4).dsc == doctest::Approx(r.best_val_dsc).epsilon(1e-6));

  fixtures::TempDir tmp("log");
  write_training_log(tmp.path() / "log.csv", r.epochs);
  std::ifstream in(tmp.path() / "log.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,L_MAB,L_LIB,L_CVW,alpha,beta,gamma,train_loss,val_loss,val_dsc,seconds");
}

TEST_CASE("ATDL training: uniform first half, adaptive simplex weights after") {
  const auto cfg = tiny_train(LossMode::ATDL);
  const auto r = train(cfg, tiny_net(), tiny_set(cfg));
  for (const auto& s : r.steps) {
    CHECK(std::abs(s.weights.alpha + s.weights.beta + s.weights.gamma - 1.0) < 1e-12);
    if (s.epoch <= 3) {
      CHECK(s.weights.alpha == 1.0 / 3);
    } else {
      CHECK(s.weights.gamma >= 1.0 / 3);
      CHECK(s.weights.alpha == doctest::Approx(atdl_weights(s.loss_mab, s.loss_lib, 0.5).alpha).epsilon(1e-9));
    }
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto cfg = tiny_train(LossMode::DDL);
  cfg.epochs = 2;
  cfg.augment = AugmentPolicy{};
  cfg.use_reslice_augment = true;
  cfg.reslice_spacing_mm = 0.5;
  const auto set = tiny_set(cfg);
  CHECK(set.reslice_pool.size() > set.train.size());
  const auto a = train(cfg, tiny_net(), set);
  const auto b = train(cfg, tiny_net(), set);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].loss_mab == b.steps[i].loss_mab);
    CHECK(a.steps[i].loss_lib == b.steps[i].loss_lib);
  }
  CHECK(a.best_val_dsc == b.best_val_dsc);
}

TEST_CASE("SDL trains two independent networks") {
  auto cfg = tiny_train(LossMode::SDL);
  cfg.epochs = 1;
  const auto r = train(cfg, tiny_net(), tiny_set(cfg));
  CHECK_FALSE(r.model->two_channel());
  for (const auto& s : r.steps) CHECK(s.weights.gamma == 0.0);
}

TEST_CASE("experiment matrix has the nine settings") {
  const auto& s = matrix_settings();
  REQUIRE(s.size() == 9);
  std::set<std::string> names;
  for (const auto& x : s) names.insert(x.name);
  CHECK(names.size() == 9);
  CHECK(names.count("ATDL+TTA"));
  CHECK(names.count("SDL"));
  int no_reslice = 0;
  for (const auto& x : s) no_reslice += !x.reslice;
  CHECK(no_reslice == 1);
}
