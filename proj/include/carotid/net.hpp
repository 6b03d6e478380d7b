#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "carotid/config.hpp"
#include "carotid/infer.hpp"
#include "carotid/probability.hpp"

namespace carotid {

/// (3x3 conv -> [BN] -> ReLU) x 2, stride 1, same padding.
class DoubleConvImpl : public torch::nn::Module {
 public:
  DoubleConvImpl(int in_channels, int out_channels, bool batch_norm);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(DoubleConv);

/// U-Net: max-pool encoder, 2x2 stride-2 transposed-conv decoder with skip
/// concatenation, 1x1 head with sigmoid output.
class UNetImpl : public torch::nn::Module {
 public:
  UNetImpl(const NetConfig& config, int out_channels);

  /// [N,1,H,W] in [0,1] -> [N,out_channels,H,W] probabilities.
  torch::Tensor forward(torch::Tensor x);

  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  torch::nn::ModuleList encoders_;
  torch::nn::ModuleList upsamplers_;
  torch::nn::ModuleList decoders_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNet);

/// Segmentation model with a [N,2,H,W] (MAB, LIB) output. Either one
/// two-channel U-Net or, for the single-Dice baseline, two independent
/// one-channel U-Nets whose outputs are concatenated.
class SegmenterImpl : public torch::nn::Module {
 public:
  SegmenterImpl(const NetConfig& config, bool two_channel);

  torch::Tensor forward(torch::Tensor x);

  bool two_channel() const { return two_channel_; }
  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  bool two_channel_;
  UNet joint_{nullptr};
  UNet mab_net_{nullptr};
  UNet lib_net_{nullptr};
};
TORCH_MODULE(Segmenter);

/// Variance-scaling (fan-in, ReLU gain) init of every conv weight, zero biases.
void init_weights(torch::nn::Module& module);

std::int64_t count_parameters(const torch::nn::Module& module);

/// Stacks images into [N,1,H,W] float32.
torch::Tensor images_to_tensor(const std::vector<Image>& images);
/// Stacks label pairs into [N,2,H,W] float32 (MAB, LIB).
torch::Tensor labels_to_tensor(const std::vector<LabelPair>& labels);
std::vector<ProbabilityPair> tensor_to_pairs(const torch::Tensor& probs);

/// relu(mab - lib) on tensors.
torch::Tensor derive_cvw(const torch::Tensor& mab, const torch::Tensor& lib);

/// Wraps a model as a batched predictor: eval mode, no gradient tracking.
Predictor make_predictor(Segmenter model, int max_batch = 8);

/// Deep copy of parameters and buffers, for best-checkpoint bookkeeping.
std::vector<torch::Tensor> snapshot_state(const torch::nn::Module& module);
void restore_state(torch::nn::Module& module, const std::vector<torch::Tensor>& state);

/// Checkpoint = `weights.pt` + `manifest.json`. The manifest must carry
/// "net" (NetConfig) and "two_channel"; other keys are the caller's.
void save_checkpoint(const std::filesystem::path& dir, Segmenter& model,
                     const nlohmann::json& manifest);
Segmenter load_checkpoint(const std::filesystem::path& dir, nlohmann::json* manifest = nullptr);

}  // namespace carotid
