#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "signflow/nn.hpp"
#include "signflow/preprocess.hpp"

namespace signflow::zoo {

// Backbone identity and head geometry. input size is fixed at 224x224x3 for
// the published backbones; tiny_cnn is the desk-scale backbone used by the
// smoke pipeline and accepts any input size.
struct BackboneSpec {
  std::string name;  // tiny_cnn | mobilenet_v3 | resnet50 | efficientnet_b2
  int input_height = 224;
  int input_width = 224;
  int input_channels = 3;
  int num_classes = 0;
  bool pretrained = true;
  std::string feature_layer_id;  // empty = backbone default
};

struct CompoundScaling {
  double alpha = 1.0, beta = 1.0, gamma = 1.0, phi = 0.0;
  double depth = 1.0, width = 1.0, resolution = 1.0;
};

struct ProbeResult {
  nn::Tensor activations;  // A^k at the probed layer, K x h x w
  nn::Tensor gradients;    // dy_c / dA^k, same shape
  std::string layer_id;
  int class_index = 0;
  std::vector<double> logits;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual const BackboneSpec& spec() const = 0;
  // One row of logits per batch item.
  virtual std::vector<std::vector<double>> forward(
      const std::vector<prep::ImageTensor>& batch) = 0;
  // One optimizer step on the batch; returns the mean cross-entropy loss.
  virtual double train_step(const std::vector<prep::ImageTensor>& batch,
                            const std::vector<int>& labels) = 0;
  virtual void configure_optimizer(double lr, double weight_decay) = 0;
  virtual void set_learning_rate(double lr) = 0;
  virtual double learning_rate() const = 0;
  // Activations and d(logit class_index)/d(activations) at `layer_id`
  // (or the spec default when empty), plus the logits of the same pass.
  virtual ProbeResult feature_and_gradient_probe(const prep::ImageTensor& img, int class_index,
                                                 const std::string& layer_id = "") = 0;
  virtual void save_weights(std::ostream& out) const = 0;
  virtual void load_weights(std::istream& in) = 0;
  // Fresh copy with identical weights; optimizer state is not carried over.
  virtual std::unique_ptr<Model> clone() const = 0;
  virtual void set_train_mode(bool train) = 0;

  void save_weights_file(const std::filesystem::path& path) const;
  void load_weights_file(const std::filesystem::path& path);
};

struct ZooOptions {
  // Directory holding exported runtime weight bundles for the pretrained
  // backbones (see tools/export_backbone.py).
  std::filesystem::path backbone_dir = "backbones";
  std::uint64_t seed = 0;
};

std::unique_ptr<Model> build_model(const BackboneSpec& spec, const ZooOptions& opts = {});

// Wraps an arbitrary micro net as a Model; used for toy models in tests.
std::unique_ptr<Model> make_micro_model(nn::Sequential net, BackboneSpec spec);

// Reference implementations of the architectural equations.
double relu6(double x);
nn::Tensor residual_forward(const nn::Tensor& x,
                            const std::function<nn::Tensor(const nn::Tensor&)>& residual_fn);
CompoundScaling compound_scale(double alpha, double beta, double gamma, double phi);

}  // namespace signflow::zoo
