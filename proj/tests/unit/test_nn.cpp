// Micro-runtime checks: every analytic gradient is validated against a
// central finite-difference oracle, and forward passes against naive
// reference loops written independently of the library code.

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "signflow/errors.hpp"
#include "signflow/nn.hpp"
#include "signflow/rng.hpp"

using namespace signflow;
using nn::Tensor;

namespace {

// conv1(3->4,k3,s2,p1) relu pool conv2(4->5,k3,s1,p1) relu gap fc(5->3).
// On a 3x8x8 input: 4x4x4 -> 4x2x2 -> 5x2x2 -> 5x1x1 -> 3 logits.
nn::Sequential build_net(Rng& rng) {
  nn::Sequential net;
  net.add(std::make_unique<nn::Conv2d>("c1", 3, 4, 3, 2, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("r1"));
  net.add(std::make_unique<nn::MaxPool2>("p1"));
  net.add(std::make_unique<nn::Conv2d>("c2", 4, 5, 3, 1, 1, rng));
  net.add(std::make_unique<nn::ReLU6>("r2"));
  net.add(std::make_unique<nn::GlobalAvgPool>("gap"));
  net.add(std::make_unique<nn::Linear>("fc", 5, 3, rng));
  return net;
}

Tensor random_input(Rng& rng, int c, int h, int w) {
  Tensor t(c, h, w);
  for (auto& v : t.data) v = rng.next_double() * 2.0 - 1.0;
  return t;
}

double dot_seed(const Tensor& logits, const std::vector<double>& seed) {
  double s = 0.0;
  for (std::size_t i = 0; i < logits.data.size(); ++i) s += seed[i] * logits.data[i];
  return s;
}

}  // namespace

TEST_CASE("tensor layout and hwc conversion round-trip") {
  Tensor t(2, 3, 4);
  CHECK(t.size() == 24);
  t.at(1, 2, 3) = 7.5;
  CHECK(t.data[(1 * 3 + 2) * 4 + 3] == 7.5);

  Rng rng(11);
  prep::ImageTensor img(5, 4, 3);
  for (auto& v : img.data) v = rng.next_double() * 255.0;
  const Tensor chw = nn::from_hwc(img);
  CHECK(chw.channels == 3);
  CHECK(chw.height == 5);
  CHECK(chw.width == 4);
  CHECK(chw.at(2, 4, 1) == img.at(4, 1, 2));
  const prep::ImageTensor back = nn::to_hwc(chw);
  REQUIRE(back.data.size() == img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("conv2d forward matches an independent reference loop") {
  Rng rng(42);
  nn::Conv2d conv("c", 3, 2, 3, 2, 1, rng);
  const Tensor in = random_input(rng, 3, 5, 7);
  const Tensor out = conv.forward(in);
  REQUIRE(out.channels == 2);
  REQUIRE(out.height == 3);  // (5 + 2 - 3)/2 + 1
  REQUIRE(out.width == 4);   // (7 + 2 - 3)/2 + 1

  for (int oc = 0; oc < 2; ++oc) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        double acc = conv.bias[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < 3; ++ic) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * 2 - 1 + ky;
              const int ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              acc += conv.weight[((static_cast<std::size_t>(oc) * 3 + ic) * 3 + ky) * 3 + kx] *
                     in.at(ic, iy, ix);
            }
          }
        }
        CHECK(out.at(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conv2d hand example") {
  Rng rng(0);
  nn::Conv2d conv("c", 1, 1, 2, 1, 0, rng);
  conv.weight = {10.0, 20.0, 30.0, 40.0};
  conv.bias = {0.5};
  Tensor in(1, 2, 2);
  in.data = {1.0, 2.0, 3.0, 4.0};
  const Tensor out = conv.forward(in);
  REQUIRE(out.size() == 1);
  CHECK(out.data[0] == 300.5);  // 10*1 + 20*2 + 30*3 + 40*4 + 0.5
}

TEST_CASE("conv2d geometry validation") {
  Rng rng(0);
  CHECK_THROWS_AS(nn::Conv2d("c", 0, 1, 3, 1, 1, rng), ShapeError);
  CHECK_THROWS_AS(nn::Conv2d("c", 1, 1, 3, 0, 1, rng), ShapeError);
  CHECK_THROWS_AS(nn::Conv2d("c", 1, 1, 3, 1, -1, rng), ShapeError);

  nn::Conv2d conv("c", 2, 1, 3, 1, 0, rng);
  CHECK_THROWS_AS(conv.forward(Tensor(3, 8, 8)), ShapeError);   // channel mismatch
  CHECK_THROWS_AS(conv.forward(Tensor(2, 2, 2)), ShapeError);   // collapses to zero
}

TEST_CASE("relu6 forward grid and gradient mask") {
  nn::ReLU6 relu("r");
  Tensor in(1, 1, 5);
  in.data = {-1.0, 0.0, 3.0, 6.0, 7.0};
  const Tensor out = relu.forward(in);
  CHECK(out.data == std::vector<double>{0.0, 0.0, 3.0, 6.0, 6.0});

  Tensor g(1, 1, 5, 1.0);
  const Tensor gin = relu.backward(g);
  CHECK(gin.data == std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("maxpool picks window maxima and routes gradients to them") {
  nn::MaxPool2 pool("p");
  Tensor in(1, 4, 4);
  in.data = {1, 5, 2, 0,
             3, 4, 1, 7,
             9, 0, 2, 2,
             1, 1, 3, 1};
  const Tensor out = pool.forward(in);
  REQUIRE(out.height == 2);
  REQUIRE(out.width == 2);
  CHECK(out.data == std::vector<double>{5, 7, 9, 3});

  Tensor g(1, 2, 2);
  g.data = {10, 20, 30, 40};
  const Tensor gin = pool.backward(g);
  CHECK(gin.at(0, 0, 1) == 10);
  CHECK(gin.at(0, 1, 3) == 20);
  CHECK(gin.at(0, 2, 0) == 30);
  CHECK(gin.at(0, 3, 2) == 40);
  double total = 0.0;
  for (double v : gin.data) total += v;
  CHECK(total == 100.0);
}

TEST_CASE("maxpool truncates odd trailing rows and rejects tiny inputs") {
  nn::MaxPool2 pool("p");
  Tensor in(2, 5, 5, 1.0);
  in.at(1, 4, 4) = 99.0;  // lives in the truncated margin
  const Tensor out = pool.forward(in);
  CHECK(out.height == 2);
  CHECK(out.width == 2);
  for (double v : out.data) CHECK(v == 1.0);

  CHECK_THROWS_AS(pool.forward(Tensor(1, 1, 4)), ShapeError);
}

TEST_CASE("global average pool means and uniform gradient spread") {
  nn::GlobalAvgPool gap("g");
  Tensor in(2, 2, 2);
  in.data = {1, 2, 3, 4, 10, 20, 30, 40};
  const Tensor out = gap.forward(in);
  REQUIRE(out.size() == 2);
  CHECK(out.data[0] == 2.5);
  CHECK(out.data[1] == 25.0);

  Tensor g(2, 1, 1);
  g.data = {8.0, 4.0};
  const Tensor gin = gap.backward(g);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      CHECK(gin.at(0, y, x) == 2.0);
      CHECK(gin.at(1, y, x) == 1.0);
    }
}

TEST_CASE("linear applies Wx + b and validates input size") {
  Rng rng(3);
  nn::Linear fc("fc", 4, 2, rng);
  fc.weight = {1, 2, 3, 4,
               -1, 0, 1, 0};
  fc.bias = {0.5, -0.5};
  Tensor in(1, 2, 2);
  in.data = {1, 1, 2, 3};
  const Tensor out = fc.forward(in);
  REQUIRE(out.size() == 2);
  CHECK(out.data[0] == doctest::Approx(1 + 2 + 6 + 12 + 0.5).epsilon(1e-15));
  CHECK(out.data[1] == doctest::Approx(-1 + 0 + 2 + 0 - 0.5).epsilon(1e-15));

  CHECK_THROWS_AS(fc.forward(Tensor(1, 3, 2)), ShapeError);
  CHECK_THROWS_AS(nn::Linear("fc", 0, 2, rng), ShapeError);
}

TEST_CASE("backward gradients match finite differences") {
  Rng rng(2026);
  nn::Sequential net = build_net(rng);
  Tensor x = random_input(rng, 3, 8, 8);
  const std::vector<double> seed = {0.7, -1.3, 0.4};

  Tensor logits = net.forward(x);
  REQUIRE(logits.size() == 3);
  Tensor seed_t(3, 1, 1);
  seed_t.data = seed;

  net.zero_grad();
  const Tensor grad_input = net.backward(seed_t);
  REQUIRE(grad_input.same_shape(x));

  std::vector<std::vector<double>*> params, grads;
  net.collect(params, grads);
  std::vector<std::vector<double>> analytic;
  for (const auto* g : grads) analytic.push_back(*g);

  const double eps = 1e-5;
  auto scalar_at = [&](const Tensor& input) { return dot_seed(net.forward(input), seed); };

  SUBCASE("input gradient") {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      Tensor plus = x, minus = x;
      plus.data[i] += eps;
      minus.data[i] -= eps;
      const double fd = (scalar_at(plus) - scalar_at(minus)) / (2.0 * eps);
      CHECK(grad_input.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  SUBCASE("parameter gradients") {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      const std::size_t stride = p.size() > 40 ? 5 : 1;
      for (std::size_t i = 0; i < p.size(); i += stride) {
        const double keep = p[i];
        p[i] = keep + eps;
        const double up = scalar_at(x);
        p[i] = keep - eps;
        const double down = scalar_at(x);
        p[i] = keep;
        const double fd = (up - down) / (2.0 * eps);
        CHECK(analytic[k][i] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("gradient_at matches finite differences through the tail") {
  Rng rng(99);
  nn::Sequential net = build_net(rng);
  Tensor x = random_input(rng, 3, 8, 8);
  const std::vector<double> seed = {1.0, -0.5, 0.25};
  Tensor seed_t(3, 1, 1);
  seed_t.data = seed;

  net.forward(x);
  const int idx = net.layer_index("r2");
  REQUIRE(idx >= 0);
  const Tensor base = net.activation(idx);
  net.zero_grad();
  const Tensor grad = net.gradient_at(idx, seed_t);
  REQUIRE(grad.same_shape(base));

  const double eps = 1e-5;
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    Tensor plus = base, minus = base;
    plus.data[i] += eps;
    minus.data[i] -= eps;
    const double up = dot_seed(net.forward_from(idx, plus), seed);
    const double down = dot_seed(net.forward_from(idx, minus), seed);
    const double fd = (up - down) / (2.0 * eps);
    CHECK(grad.data[i] == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("forward_from on the recorded activation reproduces the logits") {
  Rng rng(5);
  nn::Sequential net = build_net(rng);
  const Tensor x = random_input(rng, 3, 8, 8);
  const Tensor logits = net.forward(x);
  for (const char* name : {"c1", "r1", "p1", "c2", "r2", "gap"}) {
    const int idx = net.layer_index(name);
    REQUIRE(idx >= 0);
    const Tensor replay = net.forward_from(idx, net.activation(idx));
    REQUIRE(replay.size() == logits.size());
    for (std::size_t i = 0; i < logits.data.size(); ++i)
      CHECK(replay.data[i] == logits.data[i]);
  }
}

TEST_CASE("sequential bookkeeping errors") {
  Rng rng(1);
  nn::Sequential net;
  net.add(std::make_unique<nn::ReLU6>("r"));
  CHECK_THROWS_AS(net.add(std::make_unique<nn::ReLU6>("r")), ShapeError);
  CHECK(net.layer_index("r") == 0);
  CHECK(net.layer_index("missing") == -1);

  CHECK_THROWS_AS(net.activation(0), InvalidGradientsError);
  CHECK_THROWS_AS(net.backward(Tensor(1, 1, 1)), InvalidGradientsError);
  CHECK_THROWS_AS(net.gradient_at(0, Tensor(1, 1, 1)), InvalidGradientsError);

  net.forward(Tensor(1, 1, 2, 1.0));
  CHECK_THROWS_AS(net.activation(5), LayerNotFoundError);
  CHECK_THROWS_AS(net.gradient_at(-1, Tensor(1, 1, 2)), LayerNotFoundError);
}

TEST_CASE("clone is an independent deep copy") {
  Rng rng(8);
  nn::Sequential net = build_net(rng);
  nn::Sequential copy = net.clone();
  const Tensor x = random_input(rng, 3, 8, 8);

  const Tensor a = net.forward(x);
  const Tensor b = copy.forward(x);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);

  // Mutate the original; the clone must not move.
  std::vector<std::vector<double>*> params, grads;
  net.collect(params, grads);
  for (auto* p : params)
    for (auto& v : *p) v += 0.5;
  const Tensor a2 = net.forward(x);
  const Tensor b2 = copy.forward(x);
  CHECK(a2.data != a.data);
  for (std::size_t i = 0; i < b.data.size(); ++i) CHECK(b2.data[i] == b.data[i]);
}

TEST_CASE("cross entropy agrees with a naive log-sum-exp oracle") {
  const std::vector<double> logits = {0.3, -1.2, 2.0};
  for (int label = 0; label < 3; ++label) {
    double acc = 0.0;
    for (double z : logits) acc += std::exp(z);
    const double expected = std::log(acc) - logits[static_cast<std::size_t>(label)];
    CHECK(nn::cross_entropy(logits, label) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(nn::cross_entropy_grad(logits, label).loss ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy is stable for extreme logits") {
  const std::vector<double> logits = {1000.0, 0.0};
  CHECK(nn::cross_entropy(logits, 0) == 0.0);
  CHECK(nn::cross_entropy(logits, 1) == 1000.0);
  CHECK(std::isfinite(nn::cross_entropy_grad(logits, 1).loss));
}

TEST_CASE("cross entropy gradient is softmax minus one-hot") {
  const std::vector<double> logits = {0.1, 0.9, -0.4, 1.5};
  const int label = 2;
  const auto lg = nn::cross_entropy_grad(logits, label);
  REQUIRE(lg.grad_logits.size() == 4);

  double norm = 0.0;
  for (double z : logits) norm += std::exp(z);
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double expected = std::exp(logits[i]) / norm - (static_cast<int>(i) == label ? 1.0 : 0.0);
    CHECK(lg.grad_logits[i] == doctest::Approx(expected).epsilon(1e-12));
    sum += lg.grad_logits[i];
  }
  CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));

  const double eps = 1e-6;
  for (std::size_t i = 0; i < 4; ++i) {
    auto plus = logits, minus = logits;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (nn::cross_entropy(plus, label) - nn::cross_entropy(minus, label)) / (2 * eps);
    CHECK(lg.grad_logits[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  CHECK_THROWS_AS(nn::cross_entropy({0.0, 1.0}, -1), ShapeError);
  CHECK_THROWS_AS(nn::cross_entropy({0.0, 1.0}, 2), ShapeError);
  CHECK_THROWS_AS(nn::cross_entropy_grad({0.0, 1.0}, 5), ShapeError);
}

TEST_CASE("adamw first step has the closed form -lr*(sign-ish(g) + wd*p)") {
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> g = {0.3, -0.1, 0.0};
  std::vector<double> grad = g;
  const double lr = 0.01, wd = 0.1, eps = 1e-8;
  nn::AdamW opt({&p}, {&grad}, lr, wd);
  opt.step();
  // After one step mhat = g and vhat = g^2 regardless of the betas.
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double denom = std::abs(g[i]) + eps;
    const double expected =
        (i == 2 ? 0.5 : (i == 0 ? 1.0 : -2.0)) -
        lr * ((g[i] == 0.0 ? 0.0 : g[i] / denom) + wd * (i == 0 ? 1.0 : (i == 1 ? -2.0 : 0.5)));
    CHECK(p[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("adamw weight decay is decoupled from the gradient") {
  std::vector<double> p = {4.0, -8.0};
  std::vector<double> grad = {0.0, 0.0};
  const double lr = 0.1, wd = 0.05;
  nn::AdamW opt({&p}, {&grad}, lr, wd);
  opt.step();
  CHECK(p[0] == doctest::Approx(4.0 * (1 - lr * wd)).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-8.0 * (1 - lr * wd)).epsilon(1e-15));
  opt.step();
  CHECK(p[0] == doctest::Approx(4.0 * (1 - lr * wd) * (1 - lr * wd)).epsilon(1e-15));
}

TEST_CASE("adamw multi-step trajectory matches a reference simulation") {
  Rng rng(77);
  std::vector<double> p(12), ref_p;
  for (auto& v : p) v = rng.next_double() * 2 - 1;
  ref_p = p;
  std::vector<double> grad(12, 0.0);

  const double lr = 0.003, wd = 0.02, b1 = 0.8, b2 = 0.95, eps = 1e-8;
  nn::AdamW opt({&p}, {&grad}, lr, wd, b1, b2, eps);

  std::vector<double> m(12, 0.0), v(12, 0.0);
  Rng grad_rng(78);
  for (int t = 1; t <= 25; ++t) {
    for (auto& g : grad) g = grad_rng.next_normal();
    for (std::size_t i = 0; i < 12; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grad[i];
      v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
      const double mhat = m[i] / (1 - std::pow(b1, t));
      const double vhat = v[i] / (1 - std::pow(b2, t));
      ref_p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * ref_p[i]);
    }
    opt.step();
    for (std::size_t i = 0; i < 12; ++i)
      CHECK(p[i] == doctest::Approx(ref_p[i]).epsilon(1e-12));
  }

  CHECK(opt.lr() == lr);
  opt.set_lr(lr * 0.5);
  CHECK(opt.lr() == lr * 0.5);
}

TEST_CASE("adamw rejects mismatched param/grad lists") {
  std::vector<double> p = {1.0};
  CHECK_THROWS_AS(nn::AdamW({&p}, {}, 0.01, 0.0), ShapeError);
}

TEST_CASE("save/load round-trips parameters through a stream") {
  Rng rng_a(7), rng_b(8);
  nn::Sequential a = build_net(rng_a);
  nn::Sequential b = build_net(rng_b);
  Rng rng_x(9);
  const Tensor x = random_input(rng_x, 3, 8, 8);

  const Tensor ya = a.forward(x);
  Tensor yb = b.forward(x);
  CHECK(ya.data != yb.data);

  std::stringstream buf;
  a.save_params(buf);
  b.load_params(buf);
  yb = b.forward(x);
  for (std::size_t i = 0; i < ya.data.size(); ++i) CHECK(yb.data[i] == ya.data[i]);
}

TEST_CASE("load_params rejects truncated or mismatched checkpoints") {
  Rng rng(4);
  nn::Sequential net = build_net(rng);

  std::stringstream empty;
  CHECK_THROWS_AS(net.load_params(empty), IoError);

  nn::Sequential small;
  small.add(std::make_unique<nn::Linear>("fc", 5, 3, rng));
  std::stringstream buf;
  small.save_params(buf);
  CHECK_THROWS_AS(net.load_params(buf), IoError);  // parameter count mismatch

  nn::Sequential k3, k5;
  k3.add(std::make_unique<nn::Conv2d>("c", 1, 2, 3, 1, 1, rng));
  k5.add(std::make_unique<nn::Conv2d>("c", 1, 2, 5, 1, 2, rng));
  std::stringstream buf2;
  k3.save_params(buf2);
  CHECK_THROWS_AS(k5.load_params(buf2), IoError);  // parameter size mismatch

  std::stringstream truncated;
  net.save_params(truncated);
  std::string blob = truncated.str();
  blob.resize(blob.size() / 2);
  std::stringstream half(blob);
  CHECK_THROWS_AS(net.load_params(half), IoError);
}
