#include "carotid/net.hpp"

#include <cmath>
#include <fstream>

namespace carotid {

namespace nn = torch::nn;

DoubleConvImpl::DoubleConvImpl(int in_channels, int out_channels, bool batch_norm) {
  nn::Sequential seq;
  auto block = [&](int cin) {
    seq->push_back(nn::Conv2d(nn::Conv2dOptions(cin, out_channels, 3).stride(1).padding(1).bias(!batch_norm)));
    if (batch_norm) seq->push_back(nn::BatchNorm2d(out_channels));
    seq->push_back(nn::ReLU(nn::ReLUOptions(true)));
  };
  block(in_channels);
  block(out_channels);
  body_ = register_module("body", seq);
}

torch::Tensor DoubleConvImpl::forward(torch::Tensor x) { return body_->forward(x); }

namespace {

std::vector<int> level_widths(const NetConfig& c) {
  std::vector<int> w;
  for (int l = 0; l <= c.depth; ++l) {
    w.push_back(std::max(1, static_cast<int>(std::lround(c.base_channels * std::pow(c.channel_growth, l)))));
  }
  return w;
}

}  // namespace

UNetImpl::UNetImpl(const NetConfig& config, int out_channels) : config_(config) {
  validate_net_config(config_);
  const auto w = level_widths(config_);
  int in = 1;
  for (int l = 0; l <= config_.depth; ++l) {
    encoders_->push_back(DoubleConv(in, w[l], config_.batch_norm));
    in = w[l];
  }
  for (int l = config_.depth - 1; l >= 0; --l) {
    upsamplers_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(w[l + 1], w[l], 2).stride(2)));
    decoders_->push_back(DoubleConv(2 * w[l], w[l], config_.batch_norm));
  }
  register_module("encoders", encoders_);
  register_module("upsamplers", upsamplers_);
  register_module("decoders", decoders_);
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(w[0], out_channels, 1)));
}

torch::Tensor UNetImpl::forward(torch::Tensor x) {
  std::vector<torch::Tensor> skips;
  for (std::size_t l = 0; l < encoders_->size(); ++l) {
    if (l > 0) x = torch::max_pool2d(x, 2, 2);
    x = encoders_[l]->as<DoubleConvImpl>()->forward(x);
    skips.push_back(x);
  }
  skips.pop_back();
  for (std::size_t i = 0; i < decoders_->size(); ++i) {
    x = upsamplers_[i]->as<nn::ConvTranspose2dImpl>()->forward(x);
    x = torch::cat({skips.back(), x}, 1);
    skips.pop_back();
    x = decoders_[i]->as<DoubleConvImpl>()->forward(x);
  }
  return torch::sigmoid(head_->forward(x));
}

SegmenterImpl::SegmenterImpl(const NetConfig& config, bool two_channel)
    : config_(config), two_channel_(two_channel) {
  if (two_channel_) {
    joint_ = register_module("joint", UNet(config_, 2));
  } else {
    mab_net_ = register_module("mab_net", UNet(config_, 1));
    lib_net_ = register_module("lib_net", UNet(config_, 1));
  }
  init_weights(*this);
}

torch::Tensor SegmenterImpl::forward(torch::Tensor x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != config_.input_rows ||
      x.size(3) != config_.input_cols) {
    throw ShapeError("segmenter expects [N,1," + std::to_string(config_.input_rows) + "," +
                     std::to_string(config_.input_cols) + "] input");
  }
  if (two_channel_) return joint_->forward(x);
  return torch::cat({mab_net_->forward(x), lib_net_->forward(x)}, 1);
}

void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/false)) {
    if (auto* conv = m->as<nn::Conv2dImpl>()) {
      nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (conv->bias.defined()) nn::init::zeros_(conv->bias);
    } else if (auto* up = m->as<nn::ConvTranspose2dImpl>()) {
      nn::init::kaiming_normal_(up->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (up->bias.defined()) nn::init::zeros_(up->bias);
    }
  }
}

std::int64_t count_parameters(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

torch::Tensor images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("empty image batch");
  const int rows = images[0].rows(), cols = images[0].cols();
  auto t = torch::empty({static_cast<long>(images.size()), 1, rows, cols}, torch::kFloat32);
  auto* dst = t.data_ptr<float>();
  for (const auto& im : images) {
    if (im.rows() != rows || im.cols() != cols) throw ShapeError("image batch has mixed sizes");
    std::copy(im.values().begin(), im.values().end(), dst);
    dst += im.size();
  }
  return t;
}

torch::Tensor labels_to_tensor(const std::vector<LabelPair>& labels) {
  if (labels.empty()) throw ShapeError("empty label batch");
  const int rows = labels[0].mab.rows(), cols = labels[0].mab.cols();
  auto t = torch::empty({static_cast<long>(labels.size()), 2, rows, cols}, torch::kFloat32);
  auto* dst = t.data_ptr<float>();
  for (const auto& lp : labels) {
    if (lp.mab.rows() != rows || lp.mab.cols() != cols || !lp.mab.same_shape(lp.lib)) {
      throw ShapeError("label batch has mixed sizes");
    }
    for (auto v : lp.mab.values()) *dst++ = v ? 1.f : 0.f;
    for (auto v : lp.lib.values()) *dst++ = v ? 1.f : 0.f;
  }
  return t;
}

std::vector<ProbabilityPair> tensor_to_pairs(const torch::Tensor& probs) {
  if (probs.dim() != 4 || probs.size(1) != 2) throw ShapeError("expected [N,2,H,W] probabilities");
  auto t = probs.to(torch::kFloat32).contiguous();
  const int rows = static_cast<int>(t.size(2)), cols = static_cast<int>(t.size(3));
  const auto* src = t.data_ptr<float>();
  std::vector<ProbabilityPair> out;
  for (long n = 0; n < t.size(0); ++n) {
    ProbabilityPair p{Grid<float>(rows, cols), Grid<float>(rows, cols)};
    std::copy(src, src + p.mab.size(), p.mab.data());
    src += p.mab.size();
    std::copy(src, src + p.lib.size(), p.lib.data());
    src += p.lib.size();
    out.push_back(std::move(p));
  }
  return out;
}

torch::Tensor derive_cvw(const torch::Tensor& mab, const torch::Tensor& lib) {
  if (!mab.sizes().equals(lib.sizes())) throw ShapeError("derive_cvw: MAB/LIB shape mismatch");
  return torch::relu(mab - lib);
}

Predictor make_predictor(Segmenter model, int max_batch) {
  return [model, max_batch](const std::vector<Image>& images) mutable {
    torch::NoGradGuard guard;
    model->eval();
    std::vector<ProbabilityPair> out;
    for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(max_batch)) {
      const auto end = std::min(images.size(), i + static_cast<std::size_t>(max_batch));
      std::vector<Image> chunk(images.begin() + static_cast<long>(i), images.begin() + static_cast<long>(end));
      auto pairs = tensor_to_pairs(model->forward(images_to_tensor(chunk)));
      for (auto& p : pairs) out.push_back(std::move(p));
    }
    return out;
  };
}

std::vector<torch::Tensor> snapshot_state(const torch::nn::Module& module) {
  std::vector<torch::Tensor> out;
  for (const auto& p : module.parameters()) out.push_back(p.detach().clone());
  for (const auto& b : module.buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore_state(torch::nn::Module& module, const std::vector<torch::Tensor>& state) {
  torch::NoGradGuard guard;
  std::size_t i = 0;
  for (auto& p : module.parameters()) p.copy_(state.at(i++));
  for (auto& b : module.buffers()) b.copy_(state.at(i++));
}

void save_checkpoint(const std::filesystem::path& dir, Segmenter& model,
                     const nlohmann::json& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.save_to((dir / "weights.pt").string());
  nlohmann::json m = manifest;
  m["net"] = to_json(model->config());
  m["two_channel"] = model->two_channel();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
}

Segmenter load_checkpoint(const std::filesystem::path& dir, nlohmann::json* manifest) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("checkpoint manifest missing in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (!m.contains("net") || !m.contains("two_channel")) {
    throw FormatError("checkpoint manifest lacks net/two_channel");
  }
  Segmenter model(net_config_from_json(m["net"]), m["two_channel"].get<bool>());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from((dir / "weights.pt").string());
  } catch (const c10::Error& e) {
    throw FormatError("cannot read checkpoint weights: " + std::string(e.what()));
  }
  model->load(archive);
  model->eval();
  if (manifest) *manifest = std::move(m);
  return model;
}

}  // namespace carotid
