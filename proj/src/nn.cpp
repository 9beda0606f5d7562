#include "signflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "signflow/errors.hpp"

namespace signflow::nn {

Tensor from_hwc(const prep::ImageTensor& img) {
  Tensor t(img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

prep::ImageTensor to_hwc(const Tensor& t) {
  prep::ImageTensor img(t.height, t.width, t.channels);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      for (int c = 0; c < t.channels; ++c) img.at(y, x, c) = t.at(c, y, x);
  return img;
}

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int k, int s, int p, Rng& rng)
    : Layer(std::move(name)), in_channels(in_ch), out_channels(out_ch), kernel(k), stride(s),
      pad(p) {
  if (in_ch <= 0 || out_ch <= 0 || k <= 0 || s <= 0 || p < 0)
    throw ShapeError("conv2d: invalid geometry");
  const std::size_t wsize = static_cast<std::size_t>(out_ch) * in_ch * k * k;
  weight.resize(wsize);
  bias.assign(out_ch, 0.0);
  grad_weight.assign(wsize, 0.0);
  grad_bias.assign(out_ch, 0.0);
  // He initialisation: fan_in = in_ch * k * k.
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
  for (auto& w : weight) w = rng.next_normal() * stddev;
}

Tensor Conv2d::forward(const Tensor& in) {
  if (in.channels != in_channels) throw ShapeError("conv2d '" + name() + "': channel mismatch");
  const int oh = (in.height + 2 * pad - kernel) / stride + 1;
  const int ow = (in.width + 2 * pad - kernel) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d '" + name() + "': output collapses to zero");
  input_ = in;
  Tensor out(out_channels, oh, ow);
  for (int oc = 0; oc < out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias[oc];
        const int base_y = oy * stride - pad;
        const int base_x = ox * stride - pad;
        for (int ic = 0; ic < in_channels; ++ic) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = base_y + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = base_x + kx;
              if (ix < 0 || ix >= in.width) continue;
              acc += weight[((static_cast<std::size_t>(oc) * in_channels + ic) * kernel + ky) *
                                kernel +
                            kx] *
                     in.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  Tensor grad_in(input_.channels, input_.height, input_.width);
  for (int oc = 0; oc < out_channels; ++oc) {
    for (int oy = 0; oy < grad_out.height; ++oy) {
      for (int ox = 0; ox < grad_out.width; ++ox) {
        const double g = grad_out.at(oc, oy, ox);
        if (g == 0.0) continue;
        grad_bias[oc] += g;
        const int base_y = oy * stride - pad;
        const int base_x = ox * stride - pad;
        for (int ic = 0; ic < in_channels; ++ic) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = base_y + ky;
            if (iy < 0 || iy >= input_.height) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = base_x + kx;
              if (ix < 0 || ix >= input_.width) continue;
              const std::size_t wi =
                  ((static_cast<std::size_t>(oc) * in_channels + ic) * kernel + ky) * kernel + kx;
              grad_weight[wi] += g * input_.at(ic, iy, ix);
              grad_in.at(ic, iy, ix) += g * weight[wi];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

void Conv2d::collect(std::vector<std::vector<double>*>& params,
                     std::vector<std::vector<double>*>& grads) {
  params.push_back(&weight);
  params.push_back(&bias);
  grads.push_back(&grad_weight);
  grads.push_back(&grad_bias);
}

std::unique_ptr<Layer> Conv2d::clone() const {
  auto copy = std::make_unique<Conv2d>(*this);
  copy->input_ = Tensor();
  std::fill(copy->grad_weight.begin(), copy->grad_weight.end(), 0.0);
  std::fill(copy->grad_bias.begin(), copy->grad_bias.end(), 0.0);
  return copy;
}

Tensor ReLU6::forward(const Tensor& in) {
  input_ = in;
  Tensor out = in;
  for (auto& v : out.data) v = relu6(v);
  return out;
}

Tensor ReLU6::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.data.size(); ++i) {
    const double x = input_.data[i];
    if (x <= 0.0 || x >= 6.0) grad_in.data[i] = 0.0;
  }
  return grad_in;
}

std::unique_ptr<Layer> ReLU6::clone() const { return std::make_unique<ReLU6>(name()); }

Tensor MaxPool2::forward(const Tensor& in) {
  if (in.height < 2 || in.width < 2)
    throw ShapeError("maxpool '" + name() + "': input smaller than window");
  input_ = in;
  const int oh = in.height / 2;
  const int ow = in.width / 2;
  Tensor out(in.channels, oh, ow);
  argmax_.assign(out.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::int32_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = oy * 2 + dy;
            const int ix = ox * 2 + dx;
            const double v = in.at(c, iy, ix);
            if (v > best) {
              best = v;
              best_idx = static_cast<std::int32_t>(
                  (static_cast<std::size_t>(c) * in.height + iy) * in.width + ix);
            }
          }
        }
        out.at(c, oy, ox) = best;
        argmax_[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = best_idx;
      }
    }
  }
  return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
  Tensor grad_in(input_.channels, input_.height, input_.width);
  for (std::size_t i = 0; i < grad_out.data.size(); ++i)
    grad_in.data[argmax_[i]] += grad_out.data[i];
  return grad_in;
}

std::unique_ptr<Layer> MaxPool2::clone() const { return std::make_unique<MaxPool2>(name()); }

Tensor GlobalAvgPool::forward(const Tensor& in) {
  in_channels_ = in.channels;
  in_height_ = in.height;
  in_width_ = in.width;
  Tensor out(in.channels, 1, 1);
  const double denom = static_cast<double>(in.height) * in.width;
  for (int c = 0; c < in.channels; ++c) {
    double acc = 0.0;
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) acc += in.at(c, y, x);
    out.at(c, 0, 0) = acc / denom;
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor grad_in(in_channels_, in_height_, in_width_);
  const double denom = static_cast<double>(in_height_) * in_width_;
  for (int c = 0; c < in_channels_; ++c) {
    const double g = grad_out.at(c, 0, 0) / denom;
    for (int y = 0; y < in_height_; ++y)
      for (int x = 0; x < in_width_; ++x) grad_in.at(c, y, x) = g;
  }
  return grad_in;
}

std::unique_ptr<Layer> GlobalAvgPool::clone() const {
  return std::make_unique<GlobalAvgPool>(name());
}

Linear::Linear(std::string name, int in_f, int out_f, Rng& rng)
    : Layer(std::move(name)), in_features(in_f), out_features(out_f) {
  if (in_f <= 0 || out_f <= 0) throw ShapeError("linear: invalid geometry");
  weight.resize(static_cast<std::size_t>(out_f) * in_f);
  bias.assign(out_f, 0.0);
  grad_weight.assign(weight.size(), 0.0);
  grad_bias.assign(out_f, 0.0);
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_f + out_f));
  for (auto& w : weight) w = rng.next_normal() * stddev;
}

Tensor Linear::forward(const Tensor& in) {
  if (static_cast<int>(in.size()) != in_features)
    throw ShapeError("linear '" + name() + "': expected " + std::to_string(in_features) +
                     " features, got " + std::to_string(in.size()));
  input_ = in;
  Tensor out(out_features, 1, 1);
  for (int o = 0; o < out_features; ++o) {
    double acc = bias[o];
    const double* w = weight.data() + static_cast<std::size_t>(o) * in_features;
    for (int i = 0; i < in_features; ++i) acc += w[i] * in.data[i];
    out.data[o] = acc;
  }
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  Tensor grad_in(input_.channels, input_.height, input_.width);
  for (int o = 0; o < out_features; ++o) {
    const double g = grad_out.data[o];
    grad_bias[o] += g;
    const double* w = weight.data() + static_cast<std::size_t>(o) * in_features;
    double* gw = grad_weight.data() + static_cast<std::size_t>(o) * in_features;
    for (int i = 0; i < in_features; ++i) {
      gw[i] += g * input_.data[i];
      grad_in.data[i] += g * w[i];
    }
  }
  return grad_in;
}

void Linear::collect(std::vector<std::vector<double>*>& params,
                     std::vector<std::vector<double>*>& grads) {
  params.push_back(&weight);
  params.push_back(&bias);
  grads.push_back(&grad_weight);
  grads.push_back(&grad_bias);
}

std::unique_ptr<Layer> Linear::clone() const {
  auto copy = std::make_unique<Linear>(*this);
  copy->input_ = Tensor();
  std::fill(copy->grad_weight.begin(), copy->grad_weight.end(), 0.0);
  std::fill(copy->grad_bias.begin(), copy->grad_bias.end(), 0.0);
  return copy;
}

void Sequential::add(std::unique_ptr<Layer> layer) {
  if (layer_index(layer->name()) != -1)
    throw ShapeError("duplicate layer name '" + layer->name() + "'");
  layers_.push_back(std::move(layer));
}

int Sequential::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i]->name() == name) return static_cast<int>(i);
  return -1;
}

Tensor Sequential::forward(const Tensor& input) {
  outputs_.clear();
  outputs_.reserve(layers_.size());
  Tensor cur = input;
  for (auto& layer : layers_) {
    cur = layer->forward(cur);
    outputs_.push_back(cur);
  }
  has_forward_ = true;
  return cur;
}

Tensor Sequential::forward_from(int layer_idx, const Tensor& activation) {
  if (layer_idx < 0 || layer_idx >= static_cast<int>(layers_.size()))
    throw LayerNotFoundError("layer index out of range");
  Tensor cur = activation;
  for (std::size_t i = layer_idx + 1; i < layers_.size(); ++i) cur = layers_[i]->forward(cur);
  return cur;
}

const Tensor& Sequential::activation(int layer_idx) const {
  if (!has_forward_) throw InvalidGradientsError("no forward pass recorded");
  if (layer_idx < 0 || layer_idx >= static_cast<int>(outputs_.size()))
    throw LayerNotFoundError("layer index out of range");
  return outputs_[static_cast<std::size_t>(layer_idx)];
}

Tensor Sequential::backward(const Tensor& grad_logits) {
  if (!has_forward_) throw InvalidGradientsError("backward without forward");
  Tensor cur = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

Tensor Sequential::gradient_at(int layer_idx, const Tensor& grad_logits) {
  if (!has_forward_) throw InvalidGradientsError("backward without forward");
  if (layer_idx < 0 || layer_idx >= static_cast<int>(layers_.size()))
    throw LayerNotFoundError("layer index out of range");
  Tensor cur = grad_logits;
  for (int i = static_cast<int>(layers_.size()) - 1; i > layer_idx; --i)
    cur = layers_[i]->backward(cur);
  return cur;
}

void Sequential::collect(std::vector<std::vector<double>*>& params,
                         std::vector<std::vector<double>*>& grads) {
  for (auto& layer : layers_) layer->collect(params, grads);
}

void Sequential::zero_grad() {
  std::vector<std::vector<double>*> params, grads;
  collect(params, grads);
  for (auto* g : grads) std::fill(g->begin(), g->end(), 0.0);
}

Sequential Sequential::clone() const {
  Sequential copy;
  for (const auto& layer : layers_) copy.layers_.push_back(layer->clone());
  return copy;
}

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw IoError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& v) {
  const std::uint64_t n = read_u64(in);
  if (n != v.size())
    throw IoError("checkpoint parameter size mismatch: expected " + std::to_string(v.size()) +
                  ", found " + std::to_string(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("checkpoint truncated");
}

}  // namespace

void Sequential::save_params(std::ostream& out) const {
  std::vector<std::vector<double>*> params, grads;
  const_cast<Sequential*>(this)->collect(params, grads);
  write_u64(out, params.size());
  for (const auto* p : params) write_doubles(out, *p);
}

void Sequential::load_params(std::istream& in) {
  std::vector<std::vector<double>*> params, grads;
  collect(params, grads);
  const std::uint64_t n = read_u64(in);
  if (n != params.size()) throw IoError("checkpoint parameter count mismatch");
  for (auto* p : params) read_doubles(in, *p);
}

double cross_entropy(const std::vector<double>& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw ShapeError("cross_entropy: label out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double z : logits) acc += std::exp(z - m);
  return m + std::log(acc) - logits[label];
}

LossGrad cross_entropy_grad(const std::vector<double>& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw ShapeError("cross_entropy: label out of range");
  LossGrad lg;
  const double m = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  lg.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    lg.grad_logits[i] = std::exp(logits[i] - m);
    acc += lg.grad_logits[i];
  }
  for (auto& g : lg.grad_logits) g /= acc;
  lg.loss = m + std::log(acc) - logits[label];
  lg.grad_logits[label] -= 1.0;
  return lg;
}

AdamW::AdamW(std::vector<std::vector<double>*> params, std::vector<std::vector<double>*> grads,
             double lr, double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)), grads_(std::move(grads)), lr_(lr),
      weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (params_.size() != grads_.size()) throw ShapeError("adamw: params/grads mismatch");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    const auto& g = *grads_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p[i]);
    }
  }
}

}  // namespace signflow::nn
