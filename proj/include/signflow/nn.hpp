#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "signflow/preprocess.hpp"
#include "signflow/rng.hpp"

namespace signflow::nn {

// C x H x W feature-map tensor, double precision. Double keeps the
// finite-difference oracles well inside their tolerances.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

Tensor from_hwc(const prep::ImageTensor& img);
prep::ImageTensor to_hwc(const Tensor& t);

inline double relu6(double x) { return x < 0.0 ? 0.0 : (x > 6.0 ? 6.0 : x); }

// One named layer of the sequential micro net. forward() caches whatever
// backward() needs; backward() accumulates parameter gradients and returns
// the gradient with respect to its input.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  virtual Tensor forward(const Tensor& in) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(std::vector<std::vector<double>*>& params,
                       std::vector<std::vector<double>*>& grads) {}
  virtual std::unique_ptr<Layer> clone() const = 0;

 private:
  std::string name_;
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
         Rng& rng);
  Tensor forward(const Tensor& in) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<std::vector<double>*>& params,
               std::vector<std::vector<double>*>& grads) override;
  std::unique_ptr<Layer> clone() const override;

  int in_channels, out_channels, kernel, stride, pad;
  std::vector<double> weight, bias;        // weight: [out][in][k][k]
  std::vector<double> grad_weight, grad_bias;

 private:
  Tensor input_;
};

class ReLU6 final : public Layer {
 public:
  explicit ReLU6(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& in) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  Tensor input_;
};

class MaxPool2 final : public Layer {
 public:
  explicit MaxPool2(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& in) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  Tensor input_;
  std::vector<std::int32_t> argmax_;
};

class GlobalAvgPool final : public Layer {
 public:
  explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& in) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  int in_height_ = 0, in_width_ = 0, in_channels_ = 0;
};

// Flattens its input and applies weight * x + bias; output shape (out, 1, 1).
class Linear final : public Layer {
 public:
  Linear(std::string name, int in_features, int out_features, Rng& rng);
  Tensor forward(const Tensor& in) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<std::vector<double>*>& params,
               std::vector<std::vector<double>*>& grads) override;
  std::unique_ptr<Layer> clone() const override;

  int in_features, out_features;
  std::vector<double> weight, bias;  // weight: [out][in]
  std::vector<double> grad_weight, grad_bias;

 private:
  Tensor input_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential&) = delete;
  Sequential& operator=(const Sequential&) = delete;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer);
  int layer_index(const std::string& name) const;  // -1 when absent
  std::size_t layer_count() const { return layers_.size(); }
  const std::string& layer_name(std::size_t i) const { return layers_[i]->name(); }

  // Full forward pass; per-layer outputs are cached for backward/probing.
  Tensor forward(const Tensor& input);
  // Re-runs layers after `layer_idx` on a replacement activation. Used by the
  // finite-difference oracles; refreshes the caches of the tail layers.
  Tensor forward_from(int layer_idx, const Tensor& activation);
  // Output of layer `layer_idx` from the last full forward pass.
  const Tensor& activation(int layer_idx) const;

  // Backward from a gradient seed at the logits; accumulates parameter
  // gradients and returns the gradient at the network input.
  Tensor backward(const Tensor& grad_logits);
  // Backward through the tail only: gradient of the seeded scalar with
  // respect to the output of layer `layer_idx`. Parameter gradients of the
  // tail layers are touched; call zero_grad() before training steps.
  Tensor gradient_at(int layer_idx, const Tensor& grad_logits);

  void collect(std::vector<std::vector<double>*>& params,
               std::vector<std::vector<double>*>& grads);
  void zero_grad();

  Sequential clone() const;

  void save_params(std::ostream& out) const;
  void load_params(std::istream& in);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> outputs_;
  bool has_forward_ = false;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

// Numerically stable softmax cross-entropy on logits.
double cross_entropy(const std::vector<double>& logits, int label);
LossGrad cross_entropy_grad(const std::vector<double>& logits, int label);

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::vector<std::vector<double>*> params, std::vector<std::vector<double>*> grads,
        double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<std::vector<double>*> params_, grads_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace signflow::nn
