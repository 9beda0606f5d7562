#pragma once

#include <optional>
#include <string>
#include <vector>

#include "signflow/colormap.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/nn.hpp"
#include "signflow/preprocess.hpp"

namespace signflow::gradcam {

// One pooled-gradient weight per feature map.
struct CamWeights {
  std::vector<double> alpha;  // K entries
  int Z = 0;                  // pixels per feature map (h * w)
  std::string layer_id;
  int class_index = 0;
};

// ReLU-clamped weighted sum plus the rendering-ready upsampled map.
struct CamResult {
  nn::Tensor raw;        // 1 x h x w, elementwise >= 0
  nn::Tensor upsampled;  // 1 x H x W, max-normalized into [0,1]
  int target_class = 0;
  bool target_was_predicted = false;
  std::string layer_id;
  CamWeights weights;
  bool zero_saliency = false;  // all-zero raw map (warned, still returned)
  std::vector<double> logits;
};

// alpha_k = (1/Z) sum_ij dy_c/dA^k_ij.
CamWeights cam_weights(const nn::Tensor& gradients);

// ReLU(sum_k alpha_k A^k).
nn::Tensor cam_map(const nn::Tensor& activations, const CamWeights& weights);

// Full Grad-CAM composition on a preprocessed image. `target` empty means
// "predicted": the argmax logit picks the class.
CamResult explain(zoo::Model& model, const prep::ImageTensor& img,
                  std::optional<int> target = std::nullopt,
                  const std::string& layer_id = "");

// Colormapped heatmap alpha-blended over the original [0,255] image:
// out = (1 - opacity) * original + opacity * colormap(cam). Output dims equal
// the original's; the cam is bilinearly resized when they differ.
prep::ImageTensor overlay(const prep::ImageTensor& original, const CamResult& cam,
                          double opacity);

// Machine-readable provenance (layer, class, alphas, opacity) emitted next to
// every rendered explanation.
std::string provenance_json(const CamResult& cam, double opacity,
                            const std::string& config_hash,
                            const std::string& image_path = "",
                            const std::string& true_label = "");

}  // namespace signflow::gradcam
