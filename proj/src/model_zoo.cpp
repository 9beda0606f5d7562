#include "signflow/model_zoo.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "signflow/errors.hpp"
#include "signflow/rng.hpp"

#ifdef SIGNFLOW_HAS_TORCH
#include "signflow/torch_backbone.hpp"
#endif

namespace signflow::zoo {

void Model::save_weights_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  save_weights(out);
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

void Model::load_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  load_weights(in);
}

namespace {

constexpr char kWeightMagic[9] = "SFWEIGHT";

void write_string(std::ostream& out, const std::string& s) {
  const std::uint64_t n = s.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(s.data(), static_cast<std::streamsize>(n));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n > (1u << 20)) throw IoError("corrupt checkpoint header");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("corrupt checkpoint header");
  return s;
}

class MicroModel final : public Model {
 public:
  MicroModel(nn::Sequential net, BackboneSpec spec)
      : net_(std::move(net)), spec_(std::move(spec)) {
    if (spec_.feature_layer_id.empty())
      throw LayerNotFoundError("backbone spec has no feature layer id");
    if (net_.layer_index(spec_.feature_layer_id) == -1)
      throw LayerNotFoundError("feature layer '" + spec_.feature_layer_id +
                               "' not present in micro net");
  }

  const BackboneSpec& spec() const override { return spec_; }

  std::vector<std::vector<double>> forward(
      const std::vector<prep::ImageTensor>& batch) override {
    std::vector<std::vector<double>> rows;
    rows.reserve(batch.size());
    for (const auto& img : batch) {
      nn::Tensor logits = net_.forward(nn::from_hwc(img));
      rows.push_back(std::move(logits.data));
    }
    return rows;
  }

  double train_step(const std::vector<prep::ImageTensor>& batch,
                    const std::vector<int>& labels) override {
    if (batch.empty()) throw EmptyTrainSetError("empty training batch");
    if (batch.size() != labels.size())
      throw ShapeError("train_step: batch/label size mismatch");
    if (!optimizer_) throw InvalidGradientsError("optimizer not configured");
    net_.zero_grad();
    double loss_sum = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      nn::Tensor logits = net_.forward(nn::from_hwc(batch[i]));
      nn::LossGrad lg = nn::cross_entropy_grad(logits.data, labels[i]);
      loss_sum += lg.loss;
      nn::Tensor seed(logits.channels, logits.height, logits.width);
      for (std::size_t j = 0; j < seed.data.size(); ++j)
        seed.data[j] = lg.grad_logits[j] * inv_batch;
      net_.backward(seed);
    }
    optimizer_->step();
    return loss_sum * inv_batch;
  }

  void configure_optimizer(double lr, double weight_decay) override {
    std::vector<std::vector<double>*> params, grads;
    net_.collect(params, grads);
    optimizer_ = std::make_unique<nn::AdamW>(std::move(params), std::move(grads), lr,
                                             weight_decay);
  }

  void set_learning_rate(double lr) override {
    if (!optimizer_) throw InvalidGradientsError("optimizer not configured");
    optimizer_->set_lr(lr);
  }

  double learning_rate() const override {
    if (!optimizer_) throw InvalidGradientsError("optimizer not configured");
    return optimizer_->lr();
  }

  ProbeResult feature_and_gradient_probe(const prep::ImageTensor& img, int class_index,
                                         const std::string& layer_id) override {
    const std::string& layer = layer_id.empty() ? spec_.feature_layer_id : layer_id;
    const int idx = net_.layer_index(layer);
    if (idx == -1) throw LayerNotFoundError("layer '" + layer + "' not found");
    if (class_index < 0 || class_index >= spec_.num_classes)
      throw ShapeError("probe: class index out of range");
    ProbeResult probe;
    nn::Tensor logits = net_.forward(nn::from_hwc(img));
    probe.logits = logits.data;
    probe.activations = net_.activation(idx);
    nn::Tensor seed(logits.channels, logits.height, logits.width);
    seed.data[class_index] = 1.0;
    probe.gradients = net_.gradient_at(idx, seed);
    net_.zero_grad();  // probe gradients must not leak into training steps
    probe.layer_id = layer;
    probe.class_index = class_index;
    return probe;
  }

  void save_weights(std::ostream& out) const override {
    out.write(kWeightMagic, 8);
    write_string(out, spec_.name);
    const std::uint64_t classes = static_cast<std::uint64_t>(spec_.num_classes);
    out.write(reinterpret_cast<const char*>(&classes), sizeof(classes));
    net_.save_params(out);
  }

  void load_weights(std::istream& in) override {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kWeightMagic, 8))
      throw IoError("not a weight checkpoint");
    const std::string name = read_string(in);
    if (name != spec_.name)
      throw IoError("checkpoint backbone '" + name + "' does not match '" + spec_.name + "'");
    std::uint64_t classes = 0;
    in.read(reinterpret_cast<char*>(&classes), sizeof(classes));
    if (!in || static_cast<int>(classes) != spec_.num_classes)
      throw IoError("checkpoint class count mismatch");
    net_.load_params(in);
  }

  std::unique_ptr<Model> clone() const override {
    return std::make_unique<MicroModel>(net_.clone(), spec_);
  }

  void set_train_mode(bool) override {}  // the micro net has no stochastic layers

 private:
  nn::Sequential net_;
  BackboneSpec spec_;
  std::unique_ptr<nn::AdamW> optimizer_;
};

nn::Sequential build_tiny_cnn(int num_classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init/tiny_cnn"));
  nn::Sequential net;
  net.add(std::make_unique<nn::Conv2d>("conv1", 3, 8, 3, 4, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("relu1"));
  net.add(std::make_unique<nn::MaxPool2>("pool1"));
  net.add(std::make_unique<nn::Conv2d>("conv2", 8, 8, 3, 2, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("relu2"));
  net.add(std::make_unique<nn::GlobalAvgPool>("gap"));
  net.add(std::make_unique<nn::Linear>("fc", 8, num_classes, rng));
  return net;
}

}  // namespace

std::unique_ptr<Model> build_model(const BackboneSpec& spec, const ZooOptions& opts) {
  if (spec.num_classes < 2) throw ShapeError("build_model: num_classes must be >= 2");
  BackboneSpec resolved = spec;
  if (spec.name == "tiny_cnn") {
    // Desk-scale backbone: no pretrained corpus exists, weights are seeded.
    if (resolved.feature_layer_id.empty()) resolved.feature_layer_id = "relu2";
    return std::make_unique<MicroModel>(build_tiny_cnn(spec.num_classes, opts.seed), resolved);
  }
  if (spec.name == "mobilenet_v3" || spec.name == "resnet50" ||
      spec.name == "efficientnet_b2") {
    if (resolved.feature_layer_id.empty()) resolved.feature_layer_id = "features";
#ifdef SIGNFLOW_HAS_TORCH
    return build_torch_model(resolved, opts);
#else
    throw WeightsUnavailableError(
        "pretrained weights for '" + spec.name +
        "' need the runtime adapter; rebuild with -DSIGNFLOW_WITH_TORCH=ON and export " +
        (opts.backbone_dir / (spec.name + ".pt")).string() +
        " with tools/export_backbone.py");
#endif
  }
  throw UnknownBackboneError(spec.name);
}

std::unique_ptr<Model> make_micro_model(nn::Sequential net, BackboneSpec spec) {
  return std::make_unique<MicroModel>(std::move(net), std::move(spec));
}

double relu6(double x) { return nn::relu6(x); }

nn::Tensor residual_forward(const nn::Tensor& x,
                            const std::function<nn::Tensor(const nn::Tensor&)>& residual_fn) {
  nn::Tensor fx = residual_fn(x);
  if (!fx.same_shape(x))
    throw ShapeError("residual_forward: residual output shape differs from input");
  nn::Tensor y = x;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += fx.data[i];
  return y;
}

CompoundScaling compound_scale(double alpha, double beta, double gamma, double phi) {
  if (alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0)
    throw InvalidScalingConstantError("compound_scale: bases must be positive");
  CompoundScaling cs;
  cs.alpha = alpha;
  cs.beta = beta;
  cs.gamma = gamma;
  cs.phi = phi;
  cs.depth = std::pow(alpha, phi);
  cs.width = std::pow(beta, phi);
  cs.resolution = std::pow(gamma, phi);
  return cs;
}

}  // namespace signflow::zoo
