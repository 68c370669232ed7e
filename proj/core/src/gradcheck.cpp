#include "pagn/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <random>

#include "pagn/critics.hpp"
#include "pagn/tape.hpp"

namespace pagn::gradcheck {

namespace {

constexpr double kH = 1e-5;

struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}
  double uni(double lo, double hi) { return lo + to_unit(eng()) * (hi - lo); }
  int irange(int lo, int hi) { return lo + int(eng() % std::uint64_t(hi - lo + 1)); }

  Shape shape(int rmin, int rmax, int dmax) {
    const int rank = irange(rmin, rmax);
    Shape s;
    for (int i = 0; i < rank; ++i) s.push_back(irange(1, dmax));
    return s;
  }
  Tensor64 tensor(const Shape& s, double lo, double hi) {
    Tensor64 t(s);
    for (auto& v : t.data) v = uni(lo, hi);
    return t;
  }
  // magnitudes in [min_abs, max_abs], random sign; keeps inputs away from
  // non-smooth points (relu kinks, near-zero rows)
  Tensor64 tensor_away(const Shape& s, double min_abs, double max_abs) {
    Tensor64 t(s);
    for (auto& v : t.data) v = uni(min_abs, max_abs) * (eng() & 1 ? 1.0 : -1.0);
    return t;
  }
};

// A case owns leaf values and a graph builder returning the op output id.
struct Case {
  std::vector<Tensor64> inputs;
  Tensor64 loss_weights;  // same shape as the op output
  std::function<Tape64::Id(Tape64&, const std::vector<Tape64::Id>&)> build;
};

double eval_loss(const Case& c) {
  Tape64 tape;
  std::vector<Tape64::Id> ids;
  for (const auto& in : c.inputs) ids.push_back(tape.leaf(in));
  const auto out = c.build(tape, ids);
  return tape.val(tape.sum_all(tape.mul(out, tape.leaf(c.loss_weights)))).data[0];
}

void run_case(Case& c, OpReport& rep) {
  // analytic gradients
  std::vector<Tensor64> analytic;
  {
    Tape64 tape;
    std::vector<Tape64::Id> ids;
    for (const auto& in : c.inputs) ids.push_back(tape.leaf(in, /*requires_grad=*/true));
    const auto out = c.build(tape, ids);
    const auto loss = tape.sum_all(tape.mul(out, tape.leaf(c.loss_weights)));
    tape.backward(loss);
    for (auto id : ids) analytic.push_back(tape.grad_of(id));
  }
  // central differences on the forward path
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    for (std::int64_t j = 0; j < c.inputs[i].numel(); ++j) {
      const double orig = c.inputs[i].data[j];
      c.inputs[i].data[j] = orig + kH;
      const double up = eval_loss(c);
      c.inputs[i].data[j] = orig - kH;
      const double dn = eval_loss(c);
      c.inputs[i].data[j] = orig;
      const double fd = (up - dn) / (2 * kH);
      const double ga = analytic[i].data[j];
      const double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-8});
      if (rel > rep.max_rel_err) rep.max_rel_err = rel;
      ++rep.elements;
    }
  }
  ++rep.cases;
}

using CaseGen = std::function<Case(Gen&)>;

Case elementwise_case(Gen& g, double lo, double hi,
                      std::function<Tape64::Id(Tape64&, Tape64::Id)> op) {
  Case c;
  const Shape s = g.shape(1, 4, 6);
  c.inputs.push_back(g.tensor(s, lo, hi));
  c.loss_weights = g.tensor(s, -1, 1);
  c.build = [op](Tape64& t, const std::vector<Tape64::Id>& ids) { return op(t, ids[0]); };
  return c;
}

Case binary_case(Gen& g, std::function<Tape64::Id(Tape64&, Tape64::Id, Tape64::Id)> op) {
  Case c;
  const Shape s = g.shape(1, 4, 6);
  c.inputs.push_back(g.tensor(s, -1.5, 1.5));
  c.inputs.push_back(g.tensor(s, -1.5, 1.5));
  c.loss_weights = g.tensor(s, -1, 1);
  c.build = [op](Tape64& t, const std::vector<Tape64::Id>& ids) {
    return op(t, ids[0], ids[1]);
  };
  return c;
}

}  // namespace

Report run_all(std::uint64_t seed, int cases_per_op, double tol) {
  const auto t0 = std::chrono::steady_clock::now();
  Report report;
  report.tolerance = tol;
  std::vector<std::pair<std::string, CaseGen>> suites;

  suites.emplace_back("conv2d", [](Gen& g) {
    Case c;
    const int cin = g.irange(1, 3), cout = g.irange(1, 3), k = g.irange(1, 3);
    const int stride = g.irange(1, 2), pad = g.irange(0, 1);
    const int n = g.irange(1, 2);
    const int h = std::max(k - 2 * pad, g.irange(k, k + 3)), w = std::max(k - 2 * pad, g.irange(k, k + 3));
    c.inputs.push_back(g.tensor({n, cin, h, w}, -1.5, 1.5));
    c.inputs.push_back(g.tensor({cout, cin, k, k}, -1, 1));
    c.inputs.push_back(g.tensor({cout}, -0.5, 0.5));
    const auto d = ops::conv2d_dims({n, cin, h, w}, {cout, cin, k, k}, stride, pad);
    c.loss_weights = g.tensor({n, cout, d.hout, d.wout}, -1, 1);
    c.build = [stride, pad](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.conv2d(ids[0], ids[1], ids[2], stride, pad);
    };
    return c;
  });

  suites.emplace_back("conv_transpose2d", [](Gen& g) {
    Case c;
    const int cin = g.irange(1, 3), cout = g.irange(1, 3), k = g.irange(1, 3);
    const int stride = g.irange(1, 2), op = g.irange(0, stride - 1);
    const int pad = g.irange(0, std::max(0, (k - 1) / 2));
    const int n = g.irange(1, 2), h = g.irange(2, 5), w = g.irange(2, 5);
    const auto d = ops::conv_transpose2d_dims({n, cin, h, w}, {cin, cout, k, k}, stride, pad, op);
    c.inputs.push_back(g.tensor({n, cin, h, w}, -1.5, 1.5));
    c.inputs.push_back(g.tensor({cin, cout, k, k}, -1, 1));
    c.inputs.push_back(g.tensor({cout}, -0.5, 0.5));
    c.loss_weights = g.tensor({n, cout, d.hout, d.wout}, -1, 1);
    c.build = [stride, pad, op](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.conv_transpose2d(ids[0], ids[1], ids[2], stride, pad, op);
    };
    return c;
  });

  suites.emplace_back("instance_norm", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 2), ch = g.irange(1, 3), h = g.irange(2, 5), w = g.irange(2, 5);
    c.inputs.push_back(g.tensor({n, ch, h, w}, -1.5, 1.5));
    c.loss_weights = g.tensor({n, ch, h, w}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.instance_norm(ids[0], 1e-5);
    };
    return c;
  });

  for (const bool train : {true, false})
    suites.emplace_back(train ? "batch_norm_train" : "batch_norm_eval", [train](Gen& g) {
      Case c;
      const int n = g.irange(2, 4), ch = g.irange(1, 3), h = g.irange(2, 4), w = g.irange(2, 4);
      c.inputs.push_back(g.tensor({n, ch, h, w}, -1.5, 1.5));
      c.inputs.push_back(g.tensor({ch}, 0.5, 1.5));   // gamma
      c.inputs.push_back(g.tensor({ch}, -0.5, 0.5));  // beta
      c.loss_weights = g.tensor({n, ch, h, w}, -1, 1);
      auto rm = std::make_shared<Tensor64>(g.tensor({ch}, -0.3, 0.3));
      auto rv = std::make_shared<Tensor64>(g.tensor({ch}, 0.5, 1.5));
      c.build = [train, rm, rv](Tape64& t, const std::vector<Tape64::Id>& ids) {
        Tensor64 m = *rm, v = *rv;  // keep the case's stats unchanged across evals
        return t.batch_norm(ids[0], ids[1], ids[2], &m, &v, train, 1e-5, 0.1);
      };
      return c;
    });

  suites.emplace_back("relu", [](Gen& g) {
    Case c = elementwise_case(g, 0, 0, [](Tape64& t, Tape64::Id x) { return t.relu(x); });
    c.inputs[0] = g.tensor_away(c.inputs[0].shape, 0.05, 1.5);
    return c;
  });
  suites.emplace_back("leaky_relu", [](Gen& g) {
    Case c = elementwise_case(g, 0, 0,
                              [](Tape64& t, Tape64::Id x) { return t.leaky_relu(x, 0.2); });
    c.inputs[0] = g.tensor_away(c.inputs[0].shape, 0.05, 1.5);
    return c;
  });
  suites.emplace_back("tanh", [](Gen& g) {
    return elementwise_case(g, -2, 2, [](Tape64& t, Tape64::Id x) { return t.tanh_(x); });
  });
  suites.emplace_back("sigmoid", [](Gen& g) {
    return elementwise_case(g, -2, 2, [](Tape64& t, Tape64::Id x) { return t.sigmoid_(x); });
  });
  suites.emplace_back("log", [](Gen& g) {
    return elementwise_case(g, 0.2, 2.5, [](Tape64& t, Tape64::Id x) { return t.log_(x); });
  });
  suites.emplace_back("add", [](Gen& g) {
    return binary_case(g, [](Tape64& t, Tape64::Id a, Tape64::Id b) { return t.add(a, b); });
  });
  suites.emplace_back("sub", [](Gen& g) {
    return binary_case(g, [](Tape64& t, Tape64::Id a, Tape64::Id b) { return t.sub(a, b); });
  });
  suites.emplace_back("mul", [](Gen& g) {
    return binary_case(g, [](Tape64& t, Tape64::Id a, Tape64::Id b) { return t.mul(a, b); });
  });
  suites.emplace_back("add_scalar", [](Gen& g) {
    const double cc = g.uni(-2, 2);
    return elementwise_case(g, -1.5, 1.5,
                            [cc](Tape64& t, Tape64::Id x) { return t.add_scalar(x, cc); });
  });
  suites.emplace_back("mul_scalar", [](Gen& g) {
    const double cc = g.uni(-2, 2);
    return elementwise_case(g, -1.5, 1.5,
                            [cc](Tape64& t, Tape64::Id x) { return t.mul_scalar(x, cc); });
  });

  suites.emplace_back("concat", [](Gen& g) {
    Case c;
    Shape s = g.shape(2, 4, 5);
    const int axis = g.irange(0, int(s.size()) - 1);
    const int parts = g.irange(2, 4);
    Shape total = s;
    total[std::size_t(axis)] = 0;
    for (int p = 0; p < parts; ++p) {
      Shape sp = s;
      sp[std::size_t(axis)] = g.irange(1, 4);
      total[std::size_t(axis)] += sp[std::size_t(axis)];
      c.inputs.push_back(g.tensor(sp, -1.5, 1.5));
    }
    c.loss_weights = g.tensor(total, -1, 1);
    c.build = [axis](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.concat(ids, axis);
    };
    return c;
  });

  suites.emplace_back("mean", [](Gen& g) {
    Case c = elementwise_case(g, -1.5, 1.5, [](Tape64& t, Tape64::Id x) { return t.mean_all(x); });
    c.loss_weights = g.tensor({1}, -1, 1);
    return c;
  });
  suites.emplace_back("sum", [](Gen& g) {
    Case c = elementwise_case(g, -1.5, 1.5, [](Tape64& t, Tape64::Id x) { return t.sum_all(x); });
    c.loss_weights = g.tensor({1}, -1, 1);
    return c;
  });
  suites.emplace_back("row_sum", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 6), f = g.irange(1, 6);
    c.inputs.push_back(g.tensor({n, f}, -1.5, 1.5));
    c.loss_weights = g.tensor({n}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) { return t.row_sum(ids[0]); };
    return c;
  });

  suites.emplace_back("linear", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 5), f = g.irange(1, 6), o = g.irange(1, 6);
    c.inputs.push_back(g.tensor({n, f}, -1.5, 1.5));
    c.inputs.push_back(g.tensor({o, f}, -1, 1));
    c.inputs.push_back(g.tensor({o}, -0.5, 0.5));
    c.loss_weights = g.tensor({n, o}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.linear(ids[0], ids[1], ids[2]);
    };
    return c;
  });

  suites.emplace_back("global_pool", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 3), ch = g.irange(1, 4), h = g.irange(1, 5), w = g.irange(1, 5);
    c.inputs.push_back(g.tensor({n, ch, h, w}, -1.5, 1.5));
    c.loss_weights = g.tensor({n, ch}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) { return t.global_pool(ids[0]); };
    return c;
  });

  suites.emplace_back("flatten", [](Gen& g) {
    Case c;
    const Shape s = g.shape(2, 4, 5);
    std::int64_t rest = 1;
    for (std::size_t i = 1; i < s.size(); ++i) rest *= s[i];
    c.inputs.push_back(g.tensor(s, -1.5, 1.5));
    c.loss_weights = g.tensor({s[0], int(rest)}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) { return t.flatten(ids[0]); };
    return c;
  });

  suites.emplace_back("l2_normalize_rows", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 5), f = g.irange(2, 6);
    c.inputs.push_back(g.tensor_away({n, f}, 0.3, 1.5));
    c.loss_weights = g.tensor({n, f}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.l2_normalize_rows(ids[0], 1e-12);
    };
    return c;
  });

  suites.emplace_back("bce_with_logits", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 5), k = g.irange(1, 5);
    c.inputs.push_back(g.tensor({n, k}, -2, 2));
    Tensor64 y({n, k});
    for (auto& v : y.data) v = g.eng() & 1 ? 1.0 : 0.0;
    c.inputs.push_back(std::move(y));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return t.bce_with_logits(ids[0], ids[1]);
    };
    return c;
  });

  // Composed losses checked end to end through the same harness.
  suites.emplace_back("gan_d_loss_ls", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 3);
    for (int i = 0; i < 3; ++i) c.inputs.push_back(g.tensor({n, 1, 4, 3}, -1.5, 1.5));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return gan_d_loss_ls(t, ids[0], ids[1], ids[2]);
    };
    return c;
  });
  suites.emplace_back("gan_g_loss_ls", [](Gen& g) {
    Case c;
    c.inputs.push_back(g.tensor({g.irange(1, 3), 1, 4, 3}, -1.5, 1.5));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return gan_g_loss_ls(t, ids[0]);
    };
    return c;
  });
  suites.emplace_back("gan_d_loss_ce", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 4);
    c.inputs.push_back(g.tensor({n, 1}, 0.1, 0.9));
    c.inputs.push_back(g.tensor({n, 1}, 0.1, 0.9));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return gan_d_loss_ce(t, ids[0], ids[1]);
    };
    return c;
  });
  suites.emplace_back("identity_loss", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 4), e = g.irange(2, 6);
    c.inputs.push_back(g.tensor({n, e}, -1.5, 1.5));
    c.inputs.push_back(g.tensor({n, e}, -1.5, 1.5));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return identity_loss(t, ids[0], ids[1]);
    };
    return c;
  });
  suites.emplace_back("pixel_loss", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 3), h = g.irange(2, 5);
    c.inputs.push_back(g.tensor({n, 3, h, h}, -1, 1));
    c.inputs.push_back(g.tensor({n, 3, h, h}, -1, 1));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return pixel_loss(t, ids[0], ids[1]);
    };
    return c;
  });
  suites.emplace_back("total_g_loss", [](Gen& g) {
    Case c;
    for (int i = 0; i < 3; ++i) c.inputs.push_back(g.tensor({1}, 0.0, 2.0));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return total_g_loss(t, ids[0], ids[1], ids[2], LossWeights{});
    };
    return c;
  });
  suites.emplace_back("triplet_loss", [](Gen& g) {
    Case c;
    const int n = g.irange(1, 4), e = g.irange(2, 6);
    for (int i = 0; i < 3; ++i) c.inputs.push_back(g.tensor({n, e}, -1.5, 1.5));
    c.loss_weights = g.tensor({1}, -1, 1);
    c.build = [](Tape64& t, const std::vector<Tape64::Id>& ids) {
      return triplet_loss(t, ids[0], ids[1], ids[2], 0.2);
    };
    return c;
  });

  for (auto& [name, gen] : suites) {
    OpReport rep;
    rep.op = name;
    Gen g(mix64(seed, std::hash<std::string>{}(name)));
    for (int i = 0; i < cases_per_op; ++i) {
      Case c = gen(g);
      run_case(c, rep);
    }
    report.ops.push_back(rep);
  }

  report.pass = true;
  for (const auto& r : report.ops)
    if (r.max_rel_err > tol) report.pass = false;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void print(const Report& r, std::ostream& os) {
  os << "gradient check (h=1e-5, 64-bit, tol=" << r.tolerance << ")\n";
  for (const auto& op : r.ops) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-20s cases=%-3d elems=%-7lld max_rel_err=%.3e %s\n",
                  op.op.c_str(), op.cases, static_cast<long long>(op.elements), op.max_rel_err,
                  op.max_rel_err <= r.tolerance ? "ok" : "FAIL");
    os << buf;
  }
  os << (r.pass ? "PASS" : "FAIL") << " (" << r.seconds << "s)\n";
}

}  // namespace pagn::gradcheck
