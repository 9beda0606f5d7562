#include "signflow/torch_backbone.hpp"

#include <torch/script.h>
#include <torch/torch.h>

#include <filesystem>
#include <sstream>
#include <utility>

#include "signflow/errors.hpp"

namespace signflow::zoo {

namespace {

torch::Tensor batch_to_tensor(const std::vector<prep::ImageTensor>& batch) {
  if (batch.empty()) throw EmptyTrainSetError("empty batch");
  const auto& first = batch.front();
  torch::Tensor t = torch::empty({static_cast<long>(batch.size()), first.channels,
                                  first.height, first.width},
                                 torch::kFloat32);
  auto acc = t.accessor<float, 4>();
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& img = batch[n];
    if (img.height != first.height || img.width != first.width ||
        img.channels != first.channels)
      throw ShapeError("batch images have mixed shapes");
    for (int c = 0; c < img.channels; ++c)
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          acc[n][c][y][x] = static_cast<float>(img.at(y, x, c));
  }
  return t;
}

nn::Tensor to_nn_tensor(const torch::Tensor& t) {
  torch::Tensor cpu = t.to(torch::kFloat64).contiguous();
  nn::Tensor out(static_cast<int>(cpu.size(0)), static_cast<int>(cpu.size(1)),
                 static_cast<int>(cpu.size(2)));
  std::memcpy(out.data.data(), cpu.data_ptr<double>(), out.data.size() * sizeof(double));
  return out;
}

class TorchModel final : public Model {
 public:
  TorchModel(torch::jit::script::Module module, BackboneSpec spec)
      : module_(std::move(module)), spec_(std::move(spec)) {
    module_.eval();
    verify_head();
  }

  const BackboneSpec& spec() const override { return spec_; }

  std::vector<std::vector<double>> forward(
      const std::vector<prep::ImageTensor>& batch) override {
    torch::NoGradGuard guard;
    torch::Tensor logits = run(batch_to_tensor(batch)).first;
    std::vector<std::vector<double>> rows(logits.size(0));
    auto acc = logits.to(torch::kFloat64).accessor<double, 2>();
    for (long n = 0; n < logits.size(0); ++n) {
      rows[n].resize(logits.size(1));
      for (long c = 0; c < logits.size(1); ++c) rows[n][c] = acc[n][c];
    }
    return rows;
  }

  double train_step(const std::vector<prep::ImageTensor>& batch,
                    const std::vector<int>& labels) override {
    if (!optimizer_) throw InvalidGradientsError("optimizer not configured");
    if (batch.size() != labels.size())
      throw ShapeError("train_step: batch/label size mismatch");
    module_.train();
    torch::Tensor target = torch::empty({static_cast<long>(labels.size())}, torch::kLong);
    for (std::size_t i = 0; i < labels.size(); ++i) target[i] = labels[i];
    optimizer_->zero_grad();
    torch::Tensor logits = run(batch_to_tensor(batch)).first;
    torch::Tensor loss = torch::nn::functional::cross_entropy(logits, target);
    loss.backward();
    optimizer_->step();
    module_.eval();
    return loss.item<double>();
  }

  void configure_optimizer(double lr, double weight_decay) override {
    std::vector<torch::Tensor> params;
    for (const auto& p : module_.parameters()) params.push_back(p);
    optimizer_ = std::make_unique<torch::optim::AdamW>(
        params, torch::optim::AdamWOptions(lr).weight_decay(weight_decay));
    lr_ = lr;
  }

  void set_learning_rate(double lr) override {
    if (!optimizer_) throw InvalidGradientsError("optimizer not configured");
    for (auto& group : optimizer_->param_groups())
      static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    lr_ = lr;
  }

  double learning_rate() const override { return lr_; }

  ProbeResult feature_and_gradient_probe(const prep::ImageTensor& img, int class_index,
                                         const std::string& layer_id) override {
    const std::string& layer = layer_id.empty() ? spec_.feature_layer_id : layer_id;
    if (layer != "features")
      throw LayerNotFoundError("adapter exposes only the 'features' layer, got '" + layer +
                               "'");
    if (class_index < 0 || class_index >= spec_.num_classes)
      throw ShapeError("probe: class index out of range");
    module_.eval();
    auto [logits, feats] = run(batch_to_tensor({img}));
    torch::Tensor score = logits.index({0, class_index});
    auto grads = torch::autograd::grad({score}, {feats});
    ProbeResult probe;
    probe.activations = to_nn_tensor(feats.squeeze(0));
    probe.gradients = to_nn_tensor(grads.at(0).squeeze(0));
    probe.layer_id = layer;
    probe.class_index = class_index;
    torch::Tensor row = logits.squeeze(0).to(torch::kFloat64);
    probe.logits.assign(row.data_ptr<double>(), row.data_ptr<double>() + row.numel());
    return probe;
  }

  void save_weights(std::ostream& out) const override { module_.save(out); }

  void load_weights(std::istream& in) override {
    try {
      module_ = torch::jit::load(in);
    } catch (const c10::Error& e) {
      throw IoError(std::string("cannot load checkpoint: ") + e.what_without_backtrace());
    }
    module_.eval();
    optimizer_.reset();
    verify_head();
  }

  std::unique_ptr<Model> clone() const override {
    // Round-trip through the serializer: Module::clone shares tensors.
    std::stringstream buf;
    module_.save(buf);
    return std::make_unique<TorchModel>(torch::jit::load(buf), spec_);
  }

  void set_train_mode(bool train) override { module_.train(train); }

 private:
  std::pair<torch::Tensor, torch::Tensor> run(torch::Tensor input) {
    auto out = module_.forward({input}).toTuple();
    return {out->elements()[0].toTensor(), out->elements()[1].toTensor()};
  }

  void verify_head() {
    torch::NoGradGuard guard;
    torch::Tensor dummy = torch::zeros(
        {1, spec_.input_channels, spec_.input_height, spec_.input_width}, torch::kFloat32);
    auto [logits, feats] = run(dummy);
    if (logits.dim() != 2 || logits.size(1) != spec_.num_classes)
      throw WeightsUnavailableError("exported bundle head has " +
                                    std::to_string(logits.size(1)) + " classes, config needs " +
                                    std::to_string(spec_.num_classes));
    if (feats.dim() != 4) throw WeightsUnavailableError("exported bundle lacks feature maps");
  }

  torch::jit::script::Module module_;
  BackboneSpec spec_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  double lr_ = 0.0;
};

}  // namespace

std::unique_ptr<Model> build_torch_model(const BackboneSpec& spec, const ZooOptions& opts) {
  const std::filesystem::path bundle = opts.backbone_dir / (spec.name + ".pt");
  if (!std::filesystem::exists(bundle))
    throw WeightsUnavailableError("weight bundle missing: " + bundle.string() +
                                  " (export it with tools/export_backbone.py)");
  torch::jit::script::Module module;
  try {
    module = torch::jit::load(bundle.string());
  } catch (const c10::Error& e) {
    throw WeightsUnavailableError("weight bundle unreadable: " + bundle.string() + ": " +
                                  e.what_without_backtrace());
  }
  return std::make_unique<TorchModel>(std::move(module), spec);
}

}  // namespace signflow::zoo
