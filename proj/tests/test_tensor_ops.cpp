#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "pagn/adam.hpp"
#include "pagn/gradcheck.hpp"
#include "pagn/ops.hpp"
#include "pagn/tape.hpp"

using namespace pagn;

namespace {
Tensor64 rand_tensor(Shape s, std::mt19937_64& eng, double lo = -1, double hi = 1) {
  Tensor64 t(std::move(s));
  for (auto& v : t.data) v = lo + to_unit(eng()) * (hi - lo);
  return t;
}
}  // namespace

TEST_CASE("conv2d hand cases") {
  // all-ones 3x3 input, all-ones 3x3 kernel -> single 9.0
  auto x = Tensor::full({1, 3, 3}, 1.0f);
  auto w = Tensor::full({1, 1, 3, 3}, 1.0f);
  auto b = Tensor({1});
  auto y = ops::conv2d(x, w, b, 1, 0);
  CHECK(y.shape == Shape{1, 1, 1});
  CHECK(y.data[0] == doctest::Approx(9.0));

  // delta kernel reproduces the input
  std::mt19937_64 eng(3);
  Tensor x2({1, 5, 5});
  for (auto& v : x2.data) v = float(to_unit(eng()) * 2 - 1);
  Tensor w2({1, 1, 3, 3});
  w2.data[4] = 1.0f;  // center
  auto y2 = ops::conv2d(x2, w2, b, 1, 1);
  CHECK(y2.shape == x2.shape);
  for (std::size_t i = 0; i < x2.data.size(); ++i) CHECK(y2.data[i] == x2.data[i]);

  // stride-2 halving at the full-scale size
  auto d = ops::conv2d_dims({3, 224, 224}, {8, 3, 3, 3}, 2, 1);
  CHECK(d.hout == 112);
  CHECK(d.wout == 112);
}

TEST_CASE("conv2d rejects channel mismatch") {
  auto x = Tensor::full({2, 4, 4}, 1.0f);
  auto w = Tensor::full({1, 3, 3, 3}, 1.0f);
  auto b = Tensor({1});
  CHECK_THROWS_AS(ops::conv2d(x, w, b, 1, 1), ContractError);
}

TEST_CASE("conv_transpose2d shape and identity") {
  auto d = ops::conv_transpose2d_dims({1, 112, 112}, {1, 1, 3, 3}, 2, 1, 1);
  CHECK(d.hout == 224);

  // 1x1 kernel of value 1 is the identity
  std::mt19937_64 eng(4);
  Tensor x({2, 3, 3});
  for (auto& v : x.data) v = float(to_unit(eng()) * 2 - 1);
  Tensor w({2, 2, 1, 1});
  w.data[0] = 1.0f;               // [0,0]
  w.data[3] = 1.0f;               // [1,1]
  auto y = ops::conv_transpose2d(x, w, Tensor({2}), 1, 0, 0);
  CHECK(y.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);

  CHECK_THROWS_AS(ops::conv_transpose2d(x, w, Tensor({2}), 1, 0, 1), ContractError);
}

TEST_CASE("conv adjoint identity <conv(x,w), y> == <x, conv_t(y,w)>") {
  std::mt19937_64 eng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const int cin = 1 + int(eng() % 3), cout = 1 + int(eng() % 3), k = 1 + int(eng() % 3);
    const int stride = 1 + int(eng() % 2), pad = int(eng() % 2);
    // square input: a single output_padding must restore both axes
    const int h = k + int(eng() % 4), w = h;
    auto x = rand_tensor({cin, h, w}, eng);
    auto wt = rand_tensor({cout, cin, k, k}, eng);
    auto d = ops::conv2d_dims(x.shape, wt.shape, stride, pad);
    auto y = rand_tensor({cout, d.hout, d.wout}, eng);
    auto cx = ops::conv2d(x, wt, Tensor64({cout}), stride, pad);
    // transpose consumes the same weight array reinterpreted as [cin_t=cout, cout_t=cin]
    const int op = (h + 2 * pad - k) % stride;
    Tensor64 wt_view(Shape{cout, cin, k, k}, wt.data);
    auto cty = ops::conv_transpose2d(y, wt_view, Tensor64({cin}), stride, pad, op);
    REQUIRE(cty.shape == x.shape);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.data.size(); ++i) lhs += cx.data[i] * y.data[i];
    for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * cty.data[i];
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("instance_norm basics") {
  auto c = Tensor::full({1, 2, 2}, 5.0f);
  auto y = ops::instance_norm(c, 1e-5f);
  for (float v : y.data) CHECK(std::abs(v) <= 1e-3f);

  auto two = Tensor::from({1, 1, 2}, {1.0f, 3.0f});
  auto y2 = ops::instance_norm(two, 1e-5f);
  CHECK(y2.data[0] == doctest::Approx(-1.0).epsilon(1e-2));
  CHECK(y2.data[1] == doctest::Approx(1.0).epsilon(1e-2));

  std::mt19937_64 eng(5);
  auto x = rand_tensor({2, 3, 4, 4}, eng, -2, 2);
  auto yn = ops::instance_norm(x, 1e-5);
  for (int s = 0; s < 6; ++s) {
    double mean = 0, var = 0;
    for (int i = 0; i < 16; ++i) mean += yn.data[std::size_t(s) * 16 + i];
    mean /= 16;
    for (int i = 0; i < 16; ++i) {
      const double d = yn.data[std::size_t(s) * 16 + i] - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mean) <= 1e-5);
    CHECK(std::abs(var - 1.0) <= 1e-3);
  }
}

TEST_CASE("batch_norm running stats") {
  std::mt19937_64 eng(6);
  auto x = rand_tensor({3, 2, 2, 2}, eng, -2, 2);
  auto gamma = Tensor64::full({2}, 1.0);
  auto beta = Tensor64({2});
  auto rm = Tensor64({2});
  auto rv = Tensor64::full({2}, 1.0);

  // momentum 1.0 copies the batch statistics into the running buffers
  auto y = ops::batch_norm(x, gamma, beta, rm, rv, true, 1e-5, 1.0);
  for (int c = 0; c < 2; ++c) {
    double mean = 0;
    int cnt = 0;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 4; ++i) {
        mean += x.data[std::size_t(n * 2 + c) * 4 + i];
        ++cnt;
      }
    mean /= cnt;
    CHECK(rm.data[c] == doctest::Approx(mean).epsilon(1e-9));
  }
  // normalized output has per-channel batch mean ~ 0 before affine
  for (int c = 0; c < 2; ++c) {
    double mean = 0;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 4; ++i) mean += y.data[std::size_t(n * 2 + c) * 4 + i];
    CHECK(std::abs(mean / 12.0) <= 1e-5);
  }

  // constant batch normalizes to zero
  auto cx = Tensor64::full({2, 1, 2, 2}, 3.0);
  auto rm2 = Tensor64({1});
  auto rv2 = Tensor64::full({1}, 1.0);
  auto cy = ops::batch_norm(cx, Tensor64::full({1}, 1.0), Tensor64({1}), rm2, rv2, true, 1e-5,
                            0.1);
  for (double v : cy.data) CHECK(std::abs(v) <= 1e-3);

  // eval before any train step uses the initialized stats (mean 0, var 1)
  auto rm3 = Tensor64({1});
  auto rv3 = Tensor64::full({1}, 1.0);
  auto ex = Tensor64::full({1, 1, 1, 2}, 0.5);
  auto ey = ops::batch_norm(ex, Tensor64::full({1}, 1.0), Tensor64({1}), rm3, rv3, false, 1e-5,
                            0.1);
  CHECK(ey.data[0] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("elementwise basics") {
  auto x = Tensor::from({3}, {-1.0f, 0.0f, 2.0f});
  auto r = ops::relu(x);
  CHECK(r.data[0] == 0.0f);
  CHECK(r.data[2] == 2.0f);
  auto l = ops::leaky_relu(x, 0.2f);
  CHECK(l.data[0] == doctest::Approx(-0.2));
  CHECK(ops::tanh_op(Tensor::from({1}, {0.0f})).data[0] == 0.0f);
  CHECK(ops::sigmoid(Tensor::from({1}, {0.0f})).data[0] == doctest::Approx(0.5));

  // relu(x) + relu(-x) == |x|
  std::mt19937_64 eng(7);
  auto z = rand_tensor({4, 5}, eng, -3, 3);
  auto a = ops::add(ops::relu(z), ops::relu(ops::mul_scalar(z, -1.0)));
  for (std::size_t i = 0; i < z.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(std::abs(z.data[i])));

  CHECK_THROWS_AS(ops::add(Tensor::full({2}, 1.f), Tensor::full({3}, 1.f)), ContractError);
}

TEST_CASE("concat stacks score blocks to 12x3") {
  std::vector<Tensor> blocks;
  std::vector<const Tensor*> ptrs;
  for (int i = 0; i < 4; ++i) blocks.push_back(Tensor::full({1, 3, 3}, float(i)));
  for (auto& b : blocks) ptrs.push_back(&b);
  auto m = ops::concat(ptrs, 1);
  CHECK(m.shape == Shape{1, 12, 3});
  CHECK(m.data[0] == 0.0f);
  CHECK(m.data[9 * 3] == 3.0f);
}

TEST_CASE("backward linear case and determinism") {
  // loss = sum(w * x) with constant x => dloss/dw == x
  Tape tape;
  auto x = tape.leaf(Tensor::from({3}, {1.0f, -2.0f, 0.5f}));
  auto w = tape.leaf(Tensor::from({3}, {0.3f, 0.7f, -0.1f}), true);
  auto loss = tape.sum_all(tape.mul(w, x));
  tape.backward(loss);
  auto g = tape.grad_of(w);
  CHECK(g.data[0] == 1.0f);
  CHECK(g.data[1] == -2.0f);
  CHECK(g.data[2] == 0.5f);

  CHECK_THROWS_AS([] {
    Tape t2;
    auto a = t2.leaf(Tensor::full({2}, 1.0f), true);
    t2.backward(a);  // non-scalar loss
  }(), ContractError);

  // bitwise-identical gradients across a repeated run
  auto run = [] {
    std::mt19937_64 eng(42);
    Tape t;
    auto xx = t.leaf([&] {
      Tensor v({2, 3, 6, 6});
      for (auto& e : v.data) e = float(to_unit(eng()) * 2 - 1);
      return v;
    }(), true);
    auto ww = t.leaf([&] {
      Tensor v({4, 3, 3, 3});
      for (auto& e : v.data) e = float(to_unit(eng()) * 2 - 1);
      return v;
    }(), true);
    auto y = t.conv2d(xx, ww, t.leaf(Tensor({4}), true), 2, 1);
    auto l = t.mean_all(t.square(y));
    t.backward(l);
    return std::pair{t.grad_of(xx).data, t.grad_of(ww).data};
  };
  auto [gx1, gw1] = run();
  auto [gx2, gw2] = run();
  CHECK(gx1 == gx2);
  CHECK(gw1 == gw2);
}

TEST_CASE("instance_norm gradient ignores constant shifts") {
  std::mt19937_64 eng(9);
  auto x = rand_tensor({1, 2, 3, 3}, eng);
  Tape64 tape;
  auto xid = tape.leaf(x, true);
  auto y = tape.instance_norm(xid, 1e-5);
  auto w = tape.leaf(rand_tensor({1, 2, 3, 3}, eng));
  auto loss = tape.sum_all(tape.mul(y, w));
  tape.backward(loss);
  auto g = tape.grad_of(xid);
  // the gradient of a per-channel normalizer sums to ~0 along each channel
  for (int s = 0; s < 2; ++s) {
    double acc = 0;
    for (int i = 0; i < 9; ++i) acc += g.data[std::size_t(s) * 9 + i];
    CHECK(std::abs(acc) <= 1e-8);
  }
}

TEST_CASE("adam first step and fixed point") {
  ParameterSet params;
  params.add("w", Tensor::from({1}, {1.0f}));
  auto st = AdamState::init_for(params);
  params[0].grad = Tensor::from({1}, {0.1f});
  adam_step(params, st, 1e-4f);
  CHECK(std::abs(params[0].value.data[0] - (1.0f - 1e-4f)) <= 1e-7f);
  CHECK(st.step == 1);

  // zero gradient leaves the parameter unchanged while t advances
  ParameterSet p2;
  p2.add("w", Tensor::from({1}, {0.7f}));
  auto st2 = AdamState::init_for(p2);
  adam_step(p2, st2, 1e-3f);
  CHECK(p2[0].value.data[0] == 0.7f);
  CHECK(st2.step == 1);

  // constant gradient descends a quadratic monotonically
  ParameterSet p3;
  p3.add("w", Tensor::from({1}, {1.0f}));
  auto st3 = AdamState::init_for(p3);
  float prev = 1.0f;
  for (int i = 0; i < 2; ++i) {
    p3[0].grad = Tensor::from({1}, {2.0f * p3[0].value.data[0]});
    adam_step(p3, st3, 1e-2f);
    CHECK(p3[0].value.data[0] * p3[0].value.data[0] < prev * prev);
    prev = p3[0].value.data[0];
  }
}

TEST_CASE("lr schedule") {
  CHECK(lr_at(0, 1e-4) == doctest::Approx(1e-4));
  CHECK(lr_at(1999, 1e-4) == doctest::Approx(1e-4));
  CHECK(lr_at(2000, 1e-4) == doctest::Approx(5e-5));
  CHECK(lr_at(4000, 1e-4) == doctest::Approx(2.5e-5));
}

TEST_CASE("finite-difference suite over every op") {
  auto report = gradcheck::run_all(7, 20, 1e-4);
  for (const auto& op : report.ops) {
    INFO(op.op, " max_rel_err=", op.max_rel_err);
    CHECK(op.max_rel_err <= report.tolerance);
  }
  CHECK(report.pass);
}
