#include "pagn/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "pagn/adam.hpp"
#include "pagn/critics.hpp"

namespace pagn {

namespace {

std::vector<const SyntheticSample*> flatten_split(
    const std::array<std::vector<SyntheticSample>, AgeCluster::count>& buckets) {
  std::vector<const SyntheticSample*> out;
  for (const auto& b : buckets)
    for (const auto& s : b) out.push_back(&s);
  return out;
}

Tensor stack_images(const std::vector<const Tensor*>& imgs) {
  check(!imgs.empty(), "batch: empty image list");
  Shape s{int(imgs.size())};
  s.insert(s.end(), imgs[0]->shape.begin(), imgs[0]->shape.end());
  Tensor out(s);
  const std::int64_t stride = imgs[0]->numel();
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    check(imgs[i]->numel() == stride, "batch: image shape mismatch");
    std::copy(imgs[i]->data.begin(), imgs[i]->data.end(),
              out.data.begin() + std::int64_t(i) * stride);
  }
  return out;
}

}  // namespace

std::string PretrainReport::to_json() const {
  nlohmann::json j;
  j["which"] = which;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["final_loss"] = final_loss;
  j["heldout_metric"] = heldout_metric;
  if (which == "age") j["probe_accuracy"] = probe_accuracy;
  if (which == "id") j["pair_threshold"] = pair_threshold;
  return j.dump(2) + "\n";
}

std::pair<BuiltNetwork, PretrainReport> pretrain_age_extractor(const DatasetPartition& part,
                                                               const RunConfig& cfg,
                                                               long long iterations) {
  int populated = 0;
  for (const auto& b : part.train) populated += b.empty() ? 0 : 1;
  check(populated >= 2, "pretrain: need at least two populated clusters");

  BuiltNetwork net = build_age_extractor(cfg.scale, mix64(cfg.seed, 0xa6e00001ull));
  auto adam = AdamState::init_for(net.params);
  std::mt19937_64 rng(mix64(cfg.seed, 0xa6e00002ull));
  const auto pool = flatten_split(part.train);
  const int head_start = int(net.spec.layers.size()) - 1;  // train on pre-sigmoid logits
  const int labels = cfg.scale.n_age_labels;

  double last_loss = 0;
  for (long long it = 0; it < iterations; ++it) {
    std::vector<const Tensor*> imgs;
    Tensor y({cfg.batch_size, labels});
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto* s = pool[std::size_t(rng() % pool.size())];
      imgs.push_back(&s->image);
      for (int k = 0; k < labels; ++k)
        y.data[std::size_t(b) * labels + k] = (k == s->cluster) ? 1.0f : 0.0f;
    }
    Tape tape;
    auto bound = bind(tape, net.spec, net.params, /*with_grads=*/true);
    auto out = forward(tape, bound, tape.leaf(stack_images(imgs)), /*train=*/true, head_start);
    auto loss = tape.bce_with_logits(out.out, tape.leaf(y));
    last_loss = tape.val(loss).data[0];
    check(std::isfinite(last_loss), "pretrain(age): loss diverged at iteration " +
                                        std::to_string(it));
    tape.backward(loss);
    net.params.zero_grads();
    collect_grads(tape, bound);
    adam_step(net.params, adam,
              float(lr_at(it, cfg.lr0, cfg.lr_decay_interval, cfg.lr_decay_factor)));
  }

  // held-out cluster accuracy from the logits argmax
  const auto test_pool = flatten_split(part.test);
  int correct = 0;
  std::vector<int> hits(test_pool.size(), 0);
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic) if (nt > 1)
#endif
  for (std::size_t i = 0; i < test_pool.size(); ++i) {
    const auto logits = forward_eval(net.spec, net.params, test_pool[i]->image, nullptr,
                                     head_start);
    int arg = 0;
    for (int k = 1; k < labels; ++k)
      if (logits.data[std::size_t(k)] > logits.data[std::size_t(arg)]) arg = k;
    hits[i] = arg == test_pool[i]->cluster ? 1 : 0;
  }
  for (int h : hits) correct += h;

  // probe: nearest class centroid on pooled deepest-tap features
  auto pooled_tap = [&](const Tensor& img) {
    std::vector<Tensor> taps;
    forward_eval(net.spec, net.params, img, &taps);
    const Tensor& t4 = taps.at(3);
    const int c = t4.dim(0);
    const std::int64_t hw = t4.numel() / c;
    Tensor f({c});
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0;
      for (std::int64_t j = 0; j < hw; ++j) acc += t4.data[ci * hw + j];
      f.data[std::size_t(ci)] = float(acc / double(hw));
    }
    return f;
  };
  const int tap_c = cfg.scale.tap_channels()[3];
  std::vector<Tensor> centroids(4, Tensor({tap_c}));
  std::vector<int> counts(4, 0);
  for (const auto* s : pool) {
    const Tensor f = pooled_tap(s->image);
    for (int ci = 0; ci < tap_c; ++ci) centroids[std::size_t(s->cluster)].data[std::size_t(ci)] += f.data[std::size_t(ci)];
    ++counts[std::size_t(s->cluster)];
  }
  for (int c = 0; c < 4; ++c)
    if (counts[std::size_t(c)] > 0)
      for (auto& v : centroids[std::size_t(c)].data) v /= float(counts[std::size_t(c)]);
  int probe_correct = 0;
  for (const auto* s : test_pool) {
    const Tensor f = pooled_tap(s->image);
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 4; ++c) {
      double d = 0;
      for (int ci = 0; ci < tap_c; ++ci) {
        const double e = f.data[std::size_t(ci)] - centroids[std::size_t(c)].data[std::size_t(ci)];
        d += e * e;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    probe_correct += best == s->cluster ? 1 : 0;
  }

  net.params.freeze();
  PretrainReport rep;
  rep.which = "age";
  rep.iterations = iterations;
  rep.seed = cfg.seed;
  rep.final_loss = last_loss;
  rep.heldout_metric = double(correct) / double(test_pool.size());
  rep.probe_accuracy = double(probe_correct) / double(test_pool.size());
  return {std::move(net), rep};
}

Tensor embed_identity(const NetworkSpec& spec, ParameterSet& params, const Tensor& image) {
  return forward_eval(spec, params, image);
}

std::pair<BuiltNetwork, PretrainReport> pretrain_identity_descriptor(const DatasetPartition& part,
                                                                     const RunConfig& cfg,
                                                                     long long iterations,
                                                                     double margin) {
  check(cfg.identities_per_split >= 2, "pretrain: need at least two identities");
  check(margin > 0, "pretrain: triplet margin must be positive");

  BuiltNetwork net = build_identity_descriptor(cfg.scale, mix64(cfg.seed, 0x1de00001ull));
  auto adam = AdamState::init_for(net.params);
  std::mt19937_64 rng(mix64(cfg.seed, 0x1de00002ull));

  // identity -> samples per cluster, train split
  auto by_identity = [&](const std::array<std::vector<SyntheticSample>, 4>& buckets) {
    std::map<int, std::vector<const SyntheticSample*>> m;
    for (const auto& b : buckets)
      for (const auto& s : b) m[s.identity_index].push_back(&s);
    return m;
  };
  const auto train_ids = by_identity(part.train);
  std::vector<int> id_keys;
  for (const auto& [k, v] : train_ids)
    if (v.size() >= 2) id_keys.push_back(k);
  check(id_keys.size() >= 2, "pretrain: identities need samples in at least two clusters");

  double last_loss = 0;
  for (long long it = 0; it < iterations; ++it) {
    std::vector<const Tensor*> a, p, n;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int ia = id_keys[std::size_t(rng() % id_keys.size())];
      const auto& own = train_ids.at(ia);
      const auto* anchor = own[std::size_t(rng() % own.size())];
      const SyntheticSample* pos = anchor;
      while (pos == anchor) pos = own[std::size_t(rng() % own.size())];
      int in = ia;
      while (in == ia) in = id_keys[std::size_t(rng() % id_keys.size())];
      const auto& other = train_ids.at(in);
      const auto* neg = other[std::size_t(rng() % other.size())];
      a.push_back(&anchor->image);
      p.push_back(&pos->image);
      n.push_back(&neg->image);
    }
    Tape tape;
    auto bound = bind(tape, net.spec, net.params, /*with_grads=*/true);
    auto ea = forward(tape, bound, tape.leaf(stack_images(a)), true).out;
    auto ep = forward(tape, bound, tape.leaf(stack_images(p)), true).out;
    auto en = forward(tape, bound, tape.leaf(stack_images(n)), true).out;
    auto loss = triplet_loss(tape, ea, ep, en, float(margin));
    last_loss = tape.val(loss).data[0];
    check(std::isfinite(last_loss), "pretrain(id): loss diverged at iteration " +
                                        std::to_string(it));
    tape.backward(loss);
    net.params.zero_grads();
    collect_grads(tape, bound);
    adam_step(net.params, adam,
              float(lr_at(it, cfg.lr0, cfg.lr_decay_interval, cfg.lr_decay_factor)));
  }

  // held-out gate: same-identity pair distance beats different-identity pair
  const auto test_ids = by_identity(part.test);
  std::vector<int> test_keys;
  for (const auto& [k, v] : test_ids)
    if (v.size() >= 2) test_keys.push_back(k);
  auto emb_dist2 = [&](const Tensor& x, const Tensor& y) {
    const Tensor ex = embed_identity(net.spec, net.params, x);
    const Tensor ey = embed_identity(net.spec, net.params, y);
    double d = 0;
    for (std::size_t i = 0; i < ex.data.size(); ++i) {
      const double e = double(ex.data[i]) - double(ey.data[i]);
      d += e * e;
    }
    return d;
  };
  std::mt19937_64 erng(mix64(cfg.seed, 0x1de00003ull));
  const int n_pairs = 500;
  std::vector<double> same_d(n_pairs), diff_d(n_pairs);
  std::vector<std::array<const Tensor*, 4>> pair_imgs(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const int u = test_keys[std::size_t(erng() % test_keys.size())];
    const auto& su = test_ids.at(u);
    const auto* x1 = su[std::size_t(erng() % su.size())];
    const SyntheticSample* x2 = x1;
    while (x2 == x1) x2 = su[std::size_t(erng() % su.size())];
    int v = u;
    while (v == u) v = test_keys[std::size_t(erng() % test_keys.size())];
    const auto& sv = test_ids.at(v);
    const auto* x3 = sv[std::size_t(erng() % sv.size())];
    pair_imgs[std::size_t(i)] = {&x1->image, &x2->image, &x1->image, &x3->image};
  }
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic) if (nt > 1)
#endif
  for (int i = 0; i < n_pairs; ++i) {
    same_d[std::size_t(i)] = emb_dist2(*pair_imgs[std::size_t(i)][0], *pair_imgs[std::size_t(i)][1]);
    diff_d[std::size_t(i)] = emb_dist2(*pair_imgs[std::size_t(i)][2], *pair_imgs[std::size_t(i)][3]);
  }
  int ordered = 0;
  for (int i = 0; i < n_pairs; ++i) ordered += same_d[std::size_t(i)] < diff_d[std::size_t(i)] ? 1 : 0;

  std::vector<double> diff_sorted = diff_d;
  std::sort(diff_sorted.begin(), diff_sorted.end());

  net.params.freeze();
  PretrainReport rep;
  rep.which = "id";
  rep.iterations = iterations;
  rep.seed = cfg.seed;
  rep.final_loss = last_loss;
  rep.heldout_metric = double(ordered) / double(n_pairs);
  rep.pair_threshold = diff_sorted[std::size_t(n_pairs / 100)];
  return {std::move(net), rep};
}

}  // namespace pagn
