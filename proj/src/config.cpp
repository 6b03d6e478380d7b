#include "carotid/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <utility>

namespace carotid {

using nlohmann::json;

void validate_net_config(const NetConfig& c) {
  if (c.depth < 1) throw ArgumentError("net depth must be >= 1");
  if (c.base_channels < 1 || c.channel_growth < 1.0) throw ArgumentError("bad channel widths");
  const int f = 1 << c.depth;
  if (c.input_rows % f != 0 || c.input_cols % f != 0) {
    throw ArgumentError("network input size must be divisible by 2^depth");
  }
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.adaptive_a > 0)) throw ArgumentError("adaptive_a must be > 0");
  if (!(c.learning_rate > 0)) throw ArgumentError("learning_rate must be > 0");
  if (c.batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (c.epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (c.mode == LossMode::ATDL && c.epochs < 2) {
    throw ArgumentError("ATDL needs at least 2 epochs (uniform and adaptive phases)");
  }
  if (!(c.reslice_spacing_mm > 0)) throw ArgumentError("reslice_spacing_mm must be > 0");
  if (c.reslice_epoch_cap < 0) throw ArgumentError("reslice_epoch_cap must be >= 0");
  validate_policy(c.augment);
}

// ---------------------------------------------------------------------------

namespace {

// Reads fields from an object and rejects anything it was not asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ArgumentError(where_ + ": expected an object");
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ArgumentError("unknown config key '" + where_ + "." + k + "'");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ArgumentError("config key '" + where_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_range(Reader& r, const char* key, Range& out) {
  if (const json* j = r.child(key)) {
    if (!j->is_array() || j->size() != 2) throw ArgumentError(r.path(key) + ": expected [min,max]");
    out = {j->at(0).get<double>(), j->at(1).get<double>()};
  }
}

void read_augment(const json& j, AugmentPolicy& p, const std::string& where) {
  Reader r(j, where);
  r.get("p_hflip", p.p_hflip);
  r.get("p_vflip", p.p_vflip);
  r.get("max_translate_frac", p.max_translate_frac);
  r.get("max_rotate_deg", p.max_rotate_deg);
  r.get("seed", p.seed);
  r.get("symmetric_translation", p.symmetric_translation);
  r.finish();
}

void read_phantom(const json& j, PhantomSpec& s) {
  Reader r(j, "phantom");
  r.get("n_slices", s.n_slices);
  if (const json* size = r.child("image_size")) {
    if (!size->is_array() || size->size() != 2) throw ArgumentError("phantom.image_size: [rows,cols]");
    s.rows = size->at(0).get<int>();
    s.cols = size->at(1).get<int>();
  }
  r.get("centerline_drift_amplitude", s.centerline_drift_amplitude);
  read_range(r, "mab_radius_range", s.mab_radius);
  read_range(r, "wall_thickness_range", s.wall_thickness);
  read_range(r, "ellipticity_range", s.ellipticity);
  r.get("speckle_strength", s.speckle_strength);
  r.get("shadow_probability", s.shadow_probability);
  r.get("seed", s.seed);
  if (const json* sp = r.child("in_plane_spacing_mm")) {
    s.in_plane_spacing = {sp->at(0).get<double>(), sp->at(1).get<double>()};
  }
  r.get("slice_spacing_mm", s.slice_spacing);
  r.get("write_roi", s.write_roi);
  r.finish();
}

void read_net(const json& j, NetConfig& c) {
  Reader r(j, "net");
  if (const json* size = r.child("input_size")) {
    if (!size->is_array() || size->size() != 2) throw ArgumentError("net.input_size: [rows,cols]");
    c.input_rows = size->at(0).get<int>();
    c.input_cols = size->at(1).get<int>();
  }
  r.get("depth", c.depth);
  r.get("base_channels", c.base_channels);
  r.get("channel_growth", c.channel_growth);
  r.get("batch_norm", c.batch_norm);
  r.finish();
}

void read_train(const json& j, TrainConfig& c) {
  Reader r(j, "train");
  std::string mode = to_string(c.mode);
  r.get("mode", mode);
  c.mode = loss_mode_from_string(mode);
  r.get("adaptive_a", c.adaptive_a);
  r.get("learning_rate", c.learning_rate);
  r.get("momentum_beta1", c.momentum_beta1);
  r.get("momentum_beta2", c.momentum_beta2);
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("use_reslice_augment", c.use_reslice_augment);
  r.get("reslice_spacing_mm", c.reslice_spacing_mm);
  r.get("reslice_epoch_cap", c.reslice_epoch_cap);
  std::string update = c.weight_update == WeightUpdate::PerBatch ? "batch" : "epoch";
  r.get("weight_update", update);
  if (update == "batch") {
    c.weight_update = WeightUpdate::PerBatch;
  } else if (update == "epoch") {
    c.weight_update = WeightUpdate::PerEpoch;
  } else {
    throw ArgumentError("train.weight_update must be 'batch' or 'epoch'");
  }
  if (const json* a = r.child("augment")) read_augment(*a, c.augment, "train.augment");
  std::string artery = to_string(c.artery);
  r.get("artery", artery);
  c.artery = artery_from_string(artery);
  r.finish();
}

}  // namespace

json to_json(const AugmentPolicy& p) {
  return {{"p_hflip", p.p_hflip},
          {"p_vflip", p.p_vflip},
          {"max_translate_frac", p.max_translate_frac},
          {"max_rotate_deg", p.max_rotate_deg},
          {"seed", p.seed},
          {"symmetric_translation", p.symmetric_translation}};
}

json to_json(const PhantomSpec& s) {
  return {{"n_slices", s.n_slices},
          {"image_size", {s.rows, s.cols}},
          {"centerline_drift_amplitude", s.centerline_drift_amplitude},
          {"mab_radius_range", {s.mab_radius.min, s.mab_radius.max}},
          {"wall_thickness_range", {s.wall_thickness.min, s.wall_thickness.max}},
          {"ellipticity_range", {s.ellipticity.min, s.ellipticity.max}},
          {"speckle_strength", s.speckle_strength},
          {"shadow_probability", s.shadow_probability},
          {"seed", s.seed},
          {"in_plane_spacing_mm", {s.in_plane_spacing.x, s.in_plane_spacing.y}},
          {"slice_spacing_mm", s.slice_spacing},
          {"write_roi", s.write_roi}};
}

json to_json(const NetConfig& c) {
  return {{"input_size", {c.input_rows, c.input_cols}},
          {"depth", c.depth},
          {"base_channels", c.base_channels},
          {"channel_growth", c.channel_growth},
          {"batch_norm", c.batch_norm}};
}

json to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"adaptive_a", c.adaptive_a},
          {"learning_rate", c.learning_rate},
          {"momentum_beta1", c.momentum_beta1},
          {"momentum_beta2", c.momentum_beta2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"use_reslice_augment", c.use_reslice_augment},
          {"reslice_spacing_mm", c.reslice_spacing_mm},
          {"reslice_epoch_cap", c.reslice_epoch_cap},
          {"weight_update", c.weight_update == WeightUpdate::PerBatch ? "batch" : "epoch"},
          {"augment", to_json(c.augment)},
          {"artery", to_string(c.artery)}};
}

json to_json(const RunConfig& c) {
  json arteries = json::array();
  for (auto a : c.matrix.arteries) arteries.push_back(to_string(a));
  return {{"phantom", to_json(c.phantom)},
          {"cohort", {{"n_volumes", c.cohort.n_volumes}, {"seed", c.cohort.seed}}},
          {"net", to_json(c.net)},
          {"train", to_json(c.train)},
          {"segment",
           {{"threshold", c.segment.threshold},
            {"largest_component", c.segment.largest_component},
            {"batch_size", c.segment.batch_size}}},
          {"paths", {{"data_root", c.paths.data_root}, {"results_root", c.paths.results_root}}},
          {"matrix", {{"arteries", arteries}}}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig c;
  read_net(j, c);
  validate_net_config(c);
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  read_train(j, c);
  validate_train_config(c);
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  {
    Reader r(j, "config");
    if (const json* p = r.child("phantom")) read_phantom(*p, c.phantom);
    if (const json* p = r.child("cohort")) {
      Reader cr(*p, "cohort");
      cr.get("n_volumes", c.cohort.n_volumes);
      cr.get("seed", c.cohort.seed);
      cr.finish();
    }
    if (const json* p = r.child("net")) read_net(*p, c.net);
    if (const json* p = r.child("train")) read_train(*p, c.train);
    if (const json* p = r.child("segment")) {
      Reader sr(*p, "segment");
      sr.get("threshold", c.segment.threshold);
      sr.get("largest_component", c.segment.largest_component);
      sr.get("batch_size", c.segment.batch_size);
      sr.finish();
    }
    if (const json* p = r.child("paths")) {
      Reader pr(*p, "paths");
      pr.get("data_root", c.paths.data_root);
      pr.get("results_root", c.paths.results_root);
      pr.finish();
    }
    if (const json* p = r.child("matrix")) {
      Reader mr(*p, "matrix");
      std::vector<std::string> names;
      mr.get("arteries", names);
      if (mr.child("arteries")) {
        c.matrix.arteries.clear();
        for (const auto& n : names) c.matrix.arteries.push_back(artery_from_string(n));
      }
      mr.finish();
    }
    r.finish();
  }
  validate_phantom_spec(c.phantom);
  validate_net_config(c.net);
  validate_train_config(c.train);
  if (c.cohort.n_volumes < 1) throw ArgumentError("cohort.n_volumes must be >= 1");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace carotid
