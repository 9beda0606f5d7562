#include "signflow/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "signflow/errors.hpp"
#include "signflow/log.hpp"

namespace signflow::gradcam {

CamWeights cam_weights(const nn::Tensor& gradients) {
  if (gradients.size() == 0 || gradients.channels == 0)
    throw InvalidGradientsError("empty gradient tensor");
  CamWeights w;
  w.Z = gradients.height * gradients.width;
  w.alpha.resize(gradients.channels);
  for (int k = 0; k < gradients.channels; ++k) {
    double acc = 0.0;
    for (int y = 0; y < gradients.height; ++y)
      for (int x = 0; x < gradients.width; ++x) acc += gradients.at(k, y, x);
    w.alpha[k] = acc / static_cast<double>(w.Z);
  }
  return w;
}

nn::Tensor cam_map(const nn::Tensor& activations, const CamWeights& weights) {
  if (static_cast<int>(weights.alpha.size()) != activations.channels ||
      weights.Z != activations.height * activations.width)
    throw ShapeError("cam_map: weights do not match activation shape");
  nn::Tensor map(1, activations.height, activations.width);
  for (int y = 0; y < activations.height; ++y) {
    for (int x = 0; x < activations.width; ++x) {
      double acc = 0.0;
      for (int k = 0; k < activations.channels; ++k)
        acc += weights.alpha[k] * activations.at(k, y, x);
      map.at(0, y, x) = acc > 0.0 ? acc : 0.0;
    }
  }
  return map;
}

CamResult explain(zoo::Model& model, const prep::ImageTensor& img, std::optional<int> target,
                  const std::string& layer_id) {
  model.set_train_mode(false);  // deterministic explanations
  int class_index = target.value_or(0);
  bool predicted = !target.has_value();
  if (predicted) {
    // One extra forward to pick the class; the probe then recomputes it with
    // gradients enabled.
    const auto rows = model.forward({img});
    class_index = static_cast<int>(
        std::max_element(rows[0].begin(), rows[0].end()) - rows[0].begin());
  }
  const zoo::ProbeResult probe = model.feature_and_gradient_probe(img, class_index, layer_id);

  CamResult result;
  result.weights = cam_weights(probe.gradients);
  result.weights.layer_id = probe.layer_id;
  result.weights.class_index = class_index;
  result.raw = cam_map(probe.activations, result.weights);
  result.target_class = class_index;
  result.target_was_predicted = predicted;
  result.layer_id = probe.layer_id;
  result.logits = probe.logits;

  // Upsample to the model input size, then max-normalize.
  prep::ImageTensor coarse = nn::to_hwc(result.raw);
  prep::ImageTensor fine = prep::resize(coarse, img.height, img.width);
  result.upsampled = nn::Tensor(1, fine.height, fine.width);
  double peak = 0.0;
  for (double v : fine.data) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < fine.data.size(); ++i)
      result.upsampled.data[i] = fine.data[i] / peak;
  } else {
    result.zero_saliency = true;
    log::warn("grad-cam: zero saliency for class " + std::to_string(class_index) + " at layer " +
              result.layer_id);
  }
  return result;
}

prep::ImageTensor overlay(const prep::ImageTensor& original, const CamResult& cam,
                          double opacity) {
  if (opacity < 0.0 || opacity > 1.0)
    throw ConfigError("explain.opacity", "must lie in [0, 1]");
  if (original.channels != 1 && original.channels != 3)
    throw InvalidImageError("overlay expects a 1- or 3-channel image");

  prep::ImageTensor heat = nn::to_hwc(cam.upsampled);
  if (heat.height != original.height || heat.width != original.width)
    heat = prep::resize(heat, original.height, original.width);

  const ColormapTable& lut = heat_colormap();
  prep::ImageTensor out(original.height, original.width, 3);
  for (int y = 0; y < original.height; ++y) {
    for (int x = 0; x < original.width; ++x) {
      const double h = std::clamp(heat.at(y, x, 0), 0.0, 1.0);
      const auto& rgb = lut[static_cast<std::size_t>(std::lround(h * 255.0))];
      for (int c = 0; c < 3; ++c) {
        const double src = original.at(y, x, original.channels == 1 ? 0 : c);
        out.at(y, x, c) = (1.0 - opacity) * src + opacity * rgb[c] * 255.0;
      }
    }
  }
  return out;
}

std::string provenance_json(const CamResult& cam, double opacity,
                            const std::string& config_hash, const std::string& image_path,
                            const std::string& true_label) {
  nlohmann::json doc{{"layer", cam.layer_id},
                     {"target_class", cam.target_class},
                     {"target_was_predicted", cam.target_was_predicted},
                     {"alphas", cam.weights.alpha},
                     {"Z", cam.weights.Z},
                     {"opacity", opacity},
                     {"zero_saliency", cam.zero_saliency},
                     {"logits", cam.logits},
                     {"config_hash", config_hash}};
  if (!image_path.empty()) doc["image"] = image_path;
  if (!true_label.empty()) doc["true_label"] = true_label;
  return doc.dump(2) + "\n";
}

}  // namespace signflow::gradcam
