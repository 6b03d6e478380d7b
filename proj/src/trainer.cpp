#include "carotid/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <sstream>

#include "carotid/augment.hpp"
#include "carotid/log.hpp"
#include "carotid/loss.hpp"
#include "carotid/report.hpp"
#include "carotid/volumetry.hpp"

namespace fs = std::filesystem;

namespace carotid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Sample to_network(const Image& image, const LabelPair& labels, const std::optional<RoiBox>& roi,
                  int rows, int cols) {
  Sample s;
  s.labels.slice_index = labels.slice_index;
  if (roi) {
    s.image = resample_bilinear(crop(image, *roi), rows, cols);
    s.labels.mab = resample_nearest(crop(labels.mab, *roi), rows, cols);
    s.labels.lib = resample_nearest(crop(labels.lib, *roi), rows, cols);
  } else {
    s.image = resample_bilinear(image, rows, cols);
    s.labels.mab = resample_nearest(labels.mab, rows, cols);
    s.labels.lib = resample_nearest(labels.lib, rows, cols);
  }
  return s;
}

std::optional<RoiBox> roi_at(const Volume& v, Artery artery, int slice) {
  if (artery == Artery::CCA) return std::nullopt;
  if (!v.roi_first || !v.roi_last) {
    throw ArgumentError("ICA training requires ROI endpoints in every volume");
  }
  return roi_for_slice(*v.roi_first, *v.roi_last, slice, v.rows(), v.cols());
}

}  // namespace

std::vector<VolumeData> load_partition(const fs::path& cohort_root,
                                       const std::vector<std::string>& subject_ids) {
  std::vector<VolumeData> out;
  for (const auto& e : load_cohort(cohort_root)) {
    if (std::find(subject_ids.begin(), subject_ids.end(), e.subject_id) == subject_ids.end()) {
      continue;
    }
    VolumeData v;
    v.volume_id = e.volume_id;
    v.subject_id = e.subject_id;
    v.volume = load_volume(image_dir(cohort_root, e.volume_id));
    v.labels = load_labels(label_dir(cohort_root, e.volume_id));
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Sample> network_samples(const VolumeData& v, Artery artery, int rows, int cols) {
  std::vector<Sample> out;
  for (const auto& lp : v.labels) {
    const Image& img = v.volume.slices.at(static_cast<std::size_t>(lp.slice_index));
    out.push_back(to_network(img, lp, roi_at(v.volume, artery, lp.slice_index), rows, cols));
  }
  return out;
}

std::vector<Sample> resliced_samples(const VolumeData& v, Artery artery, double spacing_mm,
                                     int rows, int cols) {
  if (v.labels.size() < 2) return network_samples(v, artery, rows, cols);
  const auto stack = shape_interp_reslice(v.volume, v.labels, spacing_mm);
  int first = v.labels.front().slice_index;
  for (const auto& lp : v.labels) first = std::min(first, lp.slice_index);
  std::vector<Sample> out;
  out.reserve(stack.labels.size());
  for (std::size_t k = 0; k < stack.labels.size(); ++k) {
    const int nearest = first + static_cast<int>(std::lround(k * spacing_mm / v.volume.slice_spacing));
    out.push_back(to_network(stack.volume.slices[k], stack.labels[k],
                             roi_at(v.volume, artery, nearest), rows, cols));
  }
  return out;
}

TrainingSet build_training_set(const std::vector<VolumeData>& train,
                               const std::vector<VolumeData>& val, const TrainConfig& config,
                               const NetConfig& net) {
  TrainingSet set;
  for (const auto& v : train) {
    auto s = network_samples(v, config.artery, net.input_rows, net.input_cols);
    std::move(s.begin(), s.end(), std::back_inserter(set.train));
    if (config.use_reslice_augment) {
      auto r = resliced_samples(v, config.artery, config.reslice_spacing_mm, net.input_rows,
                                net.input_cols);
      std::move(r.begin(), r.end(), std::back_inserter(set.reslice_pool));
    }
  }
  for (const auto& v : val) {
    auto s = network_samples(v, config.artery, net.input_rows, net.input_cols);
    std::move(s.begin(), s.end(), std::back_inserter(set.validation));
  }
  return set;
}

// ---------------------------------------------------------------------------

ValidationScore validate(Segmenter& model, const std::vector<Sample>& samples, int batch_size) {
  ValidationScore score;
  if (samples.empty()) return score;
  torch::NoGradGuard guard;
  model->eval();
  double loss_sum = 0, dsc_sum = 0;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<Image> imgs;
    std::vector<LabelPair> labs;
    for (auto k = i; k < end; ++k) {
      imgs.push_back(samples[k].image);
      labs.push_back(samples[k].labels);
    }
    const auto x = images_to_tensor(imgs);
    const auto y = labels_to_tensor(labs);
    const auto pred = model->forward(x);
    const auto obj = weighted_objective(pred, y, LossWeights::uniform());
    loss_sum += obj.total.item<double>() * static_cast<double>(end - i);

    const auto bin = (pred >= 0.5).to(torch::kFloat32).flatten(2);
    const auto tgt = y.flatten(2);
    const auto inter = (bin * tgt).sum(2);
    const auto denom = bin.sum(2) + tgt.sum(2);
    const auto per = torch::where(denom > 0, 2 * inter / denom.clamp_min(1), torch::ones_like(denom));
    dsc_sum += per.mean(1).sum().item<double>();
  }
  score.loss = loss_sum / static_cast<double>(samples.size());
  score.dsc = dsc_sum / static_cast<double>(samples.size());
  return score;
}

TrainResult train(const TrainConfig& config, const NetConfig& net, const TrainingSet& data,
                  const EpochCallback& on_epoch) {
  validate_train_config(config);
  validate_net_config(net);
  if (data.train.empty()) throw ArgumentError("training partition is empty");

  const auto t_start = Clock::now();
  torch::manual_seed(config.seed);
  TrainResult result;
  result.model = Segmenter(net, config.mode != LossMode::SDL);
  Segmenter& model = result.model;
  torch::optim::Adam optimizer(
      model->parameters(),
      torch::optim::AdamOptions(config.learning_rate)
          .betas(std::make_tuple(config.momentum_beta1, config.momentum_beta2)));

  std::mt19937_64 rng(config.seed);
  const bool use_pool = config.use_reslice_augment && !data.reslice_pool.empty();
  const auto& pool = use_pool ? data.reslice_pool : data.train;
  const std::size_t per_epoch =
      use_pool ? std::min(pool.size(), config.reslice_epoch_cap > 0
                                           ? static_cast<std::size_t>(config.reslice_epoch_cap)
                                           : data.train.size())
               : pool.size();

  std::vector<std::size_t> order(pool.size());
  std::vector<torch::Tensor> best_state;
  double prev_mab = 1.0, prev_lib = 1.0;
  int global_step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    const ScheduleState state{epoch, config.epochs, config.adaptive_a};
    std::optional<LossWeights> epoch_weights;
    if (config.mode == LossMode::ATDL && config.weight_update == WeightUpdate::PerEpoch) {
      epoch_weights = in_uniform_phase(state) ? LossWeights::uniform()
                                              : atdl_weights(prev_mab, prev_lib, config.adaptive_a);
    }

    EpochLog log;
    log.epoch = epoch + 1;
    LossWeights wsum{0, 0, 0};
    int steps = 0;
    double sample_count = 0;
    for (std::size_t b = 0; b < per_epoch; b += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(per_epoch, b + static_cast<std::size_t>(config.batch_size));
      std::vector<Image> imgs;
      std::vector<LabelPair> labs;
      for (auto k = b; k < end; ++k) {
        const Sample& s = pool[order[k]];
        auto [img, lab] = augment_sample(s.image, s.labels, config.augment, rng);
        imgs.push_back(std::move(img));
        labs.push_back(std::move(lab));
      }
      model->train();
      const auto pred = model->forward(images_to_tensor(imgs));
      const auto target = labels_to_tensor(labs);
      const ObjectiveResult obj = epoch_weights
                                      ? weighted_objective(pred, target, *epoch_weights)
                                      : objective(pred, target, config.mode, state);
      optimizer.zero_grad();
      obj.total.backward();
      optimizer.step();

      const double n = static_cast<double>(end - b);
      log.loss_mab += obj.loss_mab * n;
      log.loss_lib += obj.loss_lib * n;
      log.loss_cvw += obj.loss_cvw * n;
      log.train_loss += obj.total.item<double>() * n;
      sample_count += n;
      wsum.alpha += obj.weights.alpha;
      wsum.beta += obj.weights.beta;
      wsum.gamma += obj.weights.gamma;
      ++steps;
      result.steps.push_back({epoch + 1, ++global_step, obj.weights, obj.loss_mab, obj.loss_lib,
                              obj.loss_cvw});
    }
    log.loss_mab /= sample_count;
    log.loss_lib /= sample_count;
    log.loss_cvw /= sample_count;
    log.train_loss /= sample_count;
    log.weights = {wsum.alpha / steps, wsum.beta / steps, wsum.gamma / steps};
    prev_mab = log.loss_mab;
    prev_lib = log.loss_lib;

    const auto val = validate(model, data.validation.empty() ? data.train : data.validation,
                              config.batch_size);
    log.val_loss = val.loss;
    log.val_dsc = val.dsc;
    log.seconds = seconds_since(t_epoch);
    result.epochs.push_back(log);
    if (val.dsc > result.best_val_dsc) {
      result.best_val_dsc = val.dsc;
      result.best_epoch = epoch + 1;
      best_state = snapshot_state(*model);
    }
    result.final_val_dsc = val.dsc;
    std::ostringstream msg;
    msg.precision(4);
    msg << std::fixed << '[' << to_string(config.mode) << ' ' << to_string(config.artery)
        << "] epoch " << log.epoch << '/' << config.epochs << ": L_mab " << log.loss_mab
        << " L_lib " << log.loss_lib << " L_cvw " << log.loss_cvw << " w=(" << log.weights.alpha
        << ',' << log.weights.beta << ',' << log.weights.gamma << ") val_dsc " << log.val_dsc
        << " (" << std::setprecision(1) << log.seconds << "s)";
    log_info(msg.str());
    if (on_epoch) on_epoch(log);
  }
  restore_state(*model, best_state);
  model->eval();
  result.seconds = seconds_since(t_start);
  return result;
}

void write_training_log(const fs::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(8);
  out << "epoch,L_MAB,L_LIB,L_CVW,alpha,beta,gamma,train_loss,val_loss,val_dsc,seconds\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss_mab << ',' << e.loss_lib << ',' << e.loss_cvw << ','
        << e.weights.alpha << ',' << e.weights.beta << ',' << e.weights.gamma << ','
        << e.train_loss << ',' << e.val_loss << ',' << e.val_dsc << ',' << e.seconds << '\n';
  }
}

namespace {

nlohmann::json manifest_for(const RunConfig& config, const TrainConfig& train_cfg,
                            const TrainResult& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                       {"val_dsc", e.val_dsc}});
  }
  RunConfig effective = config;
  effective.train = train_cfg;
  return {{"epoch", r.best_epoch},
          {"best_val_dsc", r.best_val_dsc},
          {"loss_history", history},
          {"config_hash", config_hash(to_json(effective))},
          {"seed", train_cfg.seed},
          {"mode", to_string(train_cfg.mode)},
          {"artery", to_string(train_cfg.artery)}};
}

}  // namespace

DatasetSplit cohort_split(const fs::path& cohort_root, std::uint64_t seed) {
  std::vector<std::string> subjects;
  for (const auto& e : load_cohort(cohort_root)) subjects.push_back(e.subject_id);
  return make_split(subjects, seed);
}

TrainResult train_on_disk(const RunConfig& config, const fs::path& cohort_root,
                          const DatasetSplit& split, const fs::path& out_dir) {
  const auto train_vols = load_partition(cohort_root, split.train_ids);
  const auto val_vols = load_partition(cohort_root, split.val_ids);
  if (train_vols.empty()) throw ArgumentError("training partition is empty");
  const auto data = build_training_set(train_vols, val_vols, config.train, config.net);
  auto result = train(config.train, config.net, data);
  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "checkpoint", result.model, manifest_for(config, config.train, result));
  write_training_log(out_dir / "train_log.csv", result.epochs);
  return result;
}

// ---------------------------------------------------------------------------

const std::vector<Setting>& matrix_settings() {
  static const std::vector<Setting> settings = {
      {"SDL", LossMode::SDL, false, true},
      {"SDL+TTA", LossMode::SDL, true, true},
      {"DDL", LossMode::DDL, false, true},
      {"DDL+TTA", LossMode::DDL, true, true},
      {"TDL", LossMode::TDL, false, true},
      {"TDL+TTA", LossMode::TDL, true, true},
      {"ATDL", LossMode::ATDL, false, true},
      {"ATDL+TTA", LossMode::ATDL, true, true},
      {"ATDL+TTA_noreslice", LossMode::ATDL, true, false},
  };
  return settings;
}

namespace {

std::string training_key(const Setting& s) {
  return std::string(to_string(s.mode)) + (s.reslice ? "" : "_noreslice");
}

// Directory that holds a trained model's checkpoint: the first setting using it.
std::string checkpoint_owner(const std::string& key) {
  for (const auto& s : matrix_settings())
    if (training_key(s) == key) return s.name;
  return key;
}

void write_vwv_csv(const fs::path& path, const SettingOutcome& o) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "volume,manual_vwv_mm3,auto_vwv_mm3\n";
  for (const auto& [vol, manual] : o.manual_vwv) {
    out << vol << ',' << manual << ',' << o.auto_vwv.at(vol) << '\n';
  }
}

const std::vector<std::pair<std::string, std::string>>& comparison_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"SDL", "SDL+TTA"},         {"DDL", "DDL+TTA"},         {"TDL", "TDL+TTA"},
      {"ATDL", "ATDL+TTA"},       {"SDL+TTA", "DDL+TTA"},     {"DDL+TTA", "TDL+TTA"},
      {"SDL+TTA", "ATDL+TTA"},    {"DDL+TTA", "ATDL+TTA"},    {"TDL+TTA", "ATDL+TTA"},
      {"ATDL+TTA", "ATDL+TTA_noreslice"},
  };
  return pairs;
}

}  // namespace

MatrixReport run_matrix(const RunConfig& config, const fs::path& cohort_root,
                        const fs::path& results_root) {
  const auto split = cohort_split(cohort_root, config.cohort.seed);
  const auto train_vols = load_partition(cohort_root, split.train_ids);
  const auto val_vols = load_partition(cohort_root, split.val_ids);
  const auto test_vols = load_partition(cohort_root, split.test_ids);
  if (train_vols.empty()) throw ArgumentError("training partition is empty");
  log_info("matrix: " + std::to_string(train_vols.size()) + " train / " +
           std::to_string(val_vols.size()) + " val / " + std::to_string(test_vols.size()) +
           " test volumes");

  MatrixReport report;
  for (Artery artery : config.matrix.arteries) {
    TrainConfig base = config.train;
    base.artery = artery;
    base.use_reslice_augment = true;
    TrainingSet with_pool = build_training_set(train_vols, val_vols, base, config.net);

    std::map<std::string, Segmenter> models;
    std::map<std::string, double> train_seconds;
    for (const auto& s : matrix_settings()) {
      const auto key = training_key(s);
      if (models.count(key)) continue;
      TrainConfig cfg = base;
      cfg.mode = s.mode;
      cfg.use_reslice_augment = s.reslice;
      // The resliced pool is large; copy only the parts a no-pool run needs.
      TrainingSet without_pool;
      if (!s.reslice) without_pool = {with_pool.train, {}, with_pool.validation};
      auto result = train(cfg, config.net, s.reslice ? with_pool : without_pool);
      const fs::path dir = results_root / checkpoint_owner(key) / to_string(artery);
      fs::create_directories(dir);
      save_checkpoint(dir / "checkpoint", result.model, manifest_for(config, cfg, result));
      write_training_log(dir / "train_log.csv", result.epochs);
      models.emplace(key, result.model);
      train_seconds[key] = result.seconds;
    }

    std::vector<SettingOutcome> outcomes;
    for (const auto& s : matrix_settings()) {
      const auto t0 = Clock::now();
      SettingOutcome o;
      o.setting = s;
      o.train_seconds = train_seconds[training_key(s)];
      const auto predictor = make_predictor(models.at(training_key(s)), config.segment.batch_size);
      SegmentOptions opts = config.segment;
      opts.tta = s.tta;
      opts.input_rows = config.net.input_rows;
      opts.input_cols = config.net.input_cols;
      const fs::path dir = results_root / s.name / to_string(artery);
      fs::create_directories(dir);
      for (const auto& v : test_vols) {
        auto seg = segment_volume(predictor, v.volume, artery, opts);
        auto rows = evaluate_slices(seg.slices, v.labels, v.volume.in_plane_spacing, v.volume_id);
        o.records.insert(o.records.end(), rows.begin(), rows.end());
        // Volumetry is restricted to the labeled slices on both sides.
        std::vector<LabelPair> predicted_labeled;
        for (const auto& lp : v.labels) predicted_labeled.push_back(seg.slices.at(lp.slice_index));
        const Spacing3 sp{v.volume.in_plane_spacing.x, v.volume.in_plane_spacing.y,
                          v.volume.slice_spacing};
        o.manual_vwv[v.volume_id] = vwv(v.labels, sp);
        const auto rep = volume_report(predicted_labeled, sp);
        o.auto_vwv[v.volume_id] = rep.vwv;
        write_volume_report(dir / (v.volume_id + "_volumereport.json"), rep);
      }
      o.eval_seconds = seconds_since(t0);
      write_eval_csv(dir / "metrics.csv", o.records);
      write_vwv_csv(dir / "vwv.csv", o);
      outcomes.push_back(std::move(o));
    }

    // Summary tables for this artery.
    std::vector<std::pair<std::string, std::vector<EvalRecord>>> table;
    std::map<std::string, std::vector<double>> groups_mab, groups_lib;
    for (const auto& o : outcomes) {
      table.push_back({o.setting.name, o.records});
      for (const auto& [vol, d] : per_volume_dsc(o.records, Boundary::MAB))
        groups_mab[o.setting.name].push_back(d);
      for (const auto& [vol, d] : per_volume_dsc(o.records, Boundary::LIB))
        groups_lib[o.setting.name].push_back(d);
    }
    std::string md = "# " + std::string(to_string(artery)) + " segmentation, test partition\n\n";
    md += metrics_table_markdown(table);
    const fs::path art_dir = results_root / "summary";
    fs::create_directories(art_dir);
    if (test_vols.size() >= 2) {
      const auto tk_mab = stats::tukey_hsd(groups_mab);
      const auto tk_lib = stats::tukey_hsd(groups_lib);
      write_tukey_csv(art_dir / (std::string(to_string(artery)) + "_tukey_mab.csv"), tk_mab);
      write_tukey_csv(art_dir / (std::string(to_string(artery)) + "_tukey_lib.csv"), tk_lib);
      md += "\n## Tukey HSD on per-volume mean DSC\n\n";
      md += tukey_table_markdown(comparison_pairs(), tk_mab, tk_lib);
    }
    const auto& best = *std::find_if(outcomes.begin(), outcomes.end(),
                                     [](const auto& o) { return o.setting.name == "ATDL+TTA"; });
    if (best.manual_vwv.size() >= 3) {
      std::vector<double> manual, automatic;
      for (const auto& [vol, m] : best.manual_vwv) {
        manual.push_back(m);
        automatic.push_back(best.auto_vwv.at(vol));
      }
      md += "\n## VWV agreement (ATDL+TTA vs ground truth)\n\n";
      try {
        md += agreement_markdown(stats::pearson(automatic, manual),
                                 stats::bland_altman(automatic, manual), "mm^3");
      } catch (const ArgumentError& e) {
        md += std::string("not computable: ") + e.what() + "\n";
      }
    }
    md += "\n## Timing\n\n| Setting | train (s) | eval (s) |\n|---|---|---|\n";
    for (const auto& o : outcomes) {
      md += "| " + o.setting.name + " | " + std::to_string(o.train_seconds) + " | " +
            std::to_string(o.eval_seconds) + " |\n";
    }
    write_text(art_dir / (std::string(to_string(artery)) + "_summary.md"), md);
    report.outcomes[artery] = std::move(outcomes);
  }
  return report;
}

}  // namespace carotid
