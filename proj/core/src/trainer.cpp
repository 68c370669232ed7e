#include "pagn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "pagn/critics.hpp"

namespace pagn {

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  check(bool(is), "checkpoint: malformed rng_state field");
  return rng;
}

Tensor stack_images(const std::vector<const Tensor*>& imgs) {
  Shape s{int(imgs.size())};
  s.insert(s.end(), imgs[0]->shape.begin(), imgs[0]->shape.end());
  Tensor out(s);
  const std::int64_t stride = imgs[0]->numel();
  for (std::size_t i = 0; i < imgs.size(); ++i)
    std::copy(imgs[i]->data.begin(), imgs[i]->data.end(),
              out.data.begin() + std::int64_t(i) * stride);
  return out;
}

// Per-sample frozen features precomputed once per session: the age-feature
// taps of every real image and the identity embeddings of the young pool.
struct FrozenCache {
  std::vector<std::array<Tensor, 4>> young_taps, old_taps;
  std::vector<Tensor> young_emb;  // [E] rows
  int emb_dim = 0;
};

FrozenCache build_cache(const std::vector<const SyntheticSample*>& young,
                        const std::vector<const SyntheticSample*>& old_,
                        const NetworkSpec& age_spec, ParameterSet& age_params,
                        const NetworkSpec& id_spec, ParameterSet& id_params) {
  FrozenCache cache;
  cache.young_taps.resize(young.size());
  cache.old_taps.resize(old_.size());
  cache.young_emb.resize(young.size());
  const int tap_len = age_spec.tap_prefix_length();
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic) if (nt > 1)
#endif
  for (std::size_t i = 0; i < young.size() + old_.size(); ++i) {
    const bool is_young = i < young.size();
    const auto* s = is_young ? young[i] : old_[i - young.size()];
    std::vector<Tensor> taps;
    forward_eval(age_spec, age_params, s->image, &taps, tap_len);
    auto& slot = is_young ? cache.young_taps[i] : cache.old_taps[i - young.size()];
    for (int t = 0; t < 4; ++t) slot[std::size_t(t)] = std::move(taps[std::size_t(t)]);
    if (is_young) cache.young_emb[i] = forward_eval(id_spec, id_params, s->image);
  }
  cache.emb_dim = cache.young_emb.empty() ? 0 : int(cache.young_emb[0].numel());
  return cache;
}

std::vector<Tensor> stack_taps(const std::vector<int>& idx,
                               const std::vector<std::array<Tensor, 4>>& cache) {
  std::vector<Tensor> out;
  for (int t = 0; t < 4; ++t) {
    std::vector<const Tensor*> parts;
    for (int i : idx) parts.push_back(&cache[std::size_t(i)][std::size_t(t)]);
    out.push_back(stack_images(parts));
  }
  return out;
}

Tensor stack_rows(const std::vector<int>& idx, const std::vector<Tensor>& rows, int dim) {
  Tensor out({int(idx.size()), dim});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(rows[std::size_t(idx[i])].data.begin(), rows[std::size_t(idx[i])].data.end(),
              out.data.begin() + std::int64_t(i) * dim);
  return out;
}

}  // namespace

std::string metrics_csv_header() {
  return "iteration,lr,L_GAN_D,L_GAN_G,L_pixel,L_identity,L_G_total,wall_ms\n";
}

std::string metrics_csv_line(const MetricsRow& r) {
  char buf[256];
  char pixel[40] = "";
  if (r.pixel) std::snprintf(pixel, sizeof(pixel), "%.9g", *r.pixel);
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%s,%.9g,%.9g,%.3f\n", r.iteration, r.lr,
                r.gan_d, r.gan_g, pixel, r.identity, r.g_total, r.wall_ms);
  return buf;
}

Checkpoint train_session(const RunConfig& cfg, const DatasetPartition& part,
                         const CheckpointNetwork& phi_age, const CheckpointNetwork& phi_id,
                         std::ostream* metrics, std::ostream* progress, const Checkpoint* resume,
                         long long stop_after, const std::filesystem::path& diagnostic_dir) {
  cfg.validate();
  check(part.image_size == cfg.scale.image_size, "train: partition size differs from config");

  std::vector<const SyntheticSample*> young, old_;
  for (const auto& s : part.train[0]) young.push_back(&s);
  for (const auto& s : part.train[std::size_t(cfg.target_cluster)]) old_.push_back(&s);
  check(!young.empty() && !old_.empty(),
        "train: partition must populate cluster 0 and the target cluster");

  // Frozen feature networks; local copies, never updated.
  ParameterSet age_params = phi_age.params;
  ParameterSet id_params = phi_id.params;
  age_params.freeze();
  id_params.freeze();

  BuiltNetwork G, D;
  AdamState adam_g, adam_d;
  std::mt19937_64 rng;
  long long start = 0;
  if (resume) {
    const auto* g = resume->find("G");
    const auto* d = resume->find("D");
    check(g && d, "resume: checkpoint lacks G or D network");
    G = BuiltNetwork{g->spec, g->params};
    D = BuiltNetwork{d->spec, d->params};
    const auto* ag = resume->find_adam("G");
    const auto* ad = resume->find_adam("D");
    check(ag && ad, "resume: checkpoint lacks optimizer state");
    adam_g = ag->state;
    adam_d = ad->state;
    rng = rng_from_string(resume->rng_state);
    start = (long long)(resume->iteration);
  } else {
    G = build_generator(cfg.scale, mix64(cfg.seed, 0x6e6e0001ull));
    D = cfg.discriminator == "pyramid"
            ? build_pyramid_discriminator(cfg.scale, mix64(cfg.seed, 0xd1d10001ull))
            : build_one_pathway_discriminator(cfg.scale, mix64(cfg.seed, 0xd1d10001ull));
    adam_g = AdamState::init_for(G.params);
    adam_d = AdamState::init_for(D.params);
    rng.seed(mix64(cfg.seed, 0x7a170001ull));
  }

  const FrozenCache cache = build_cache(young, old_, phi_age.spec, age_params, phi_id.spec,
                                        id_params);
  const int tap_len = phi_age.spec.tap_prefix_length();
  const int B = cfg.batch_size;
  const float wd = float(cfg.weight_decay);

  long long end = cfg.total_iterations;
  if (stop_after >= 0) end = std::min(end, stop_after);
  check(start <= end, "train: resume iteration is beyond the requested stop");

  auto snapshot = [&](long long iteration) {
    Checkpoint ck;
    ck.config_json = config_to_json_text(cfg);
    ck.iteration = std::uint64_t(iteration);
    ck.rng_state = rng_to_string(rng);
    ck.networks.push_back({"G", G.spec, G.params});
    ck.networks.push_back({"D", D.spec, D.params});
    ck.adam.push_back({"G", adam_g});
    ck.adam.push_back({"D", adam_d});
    return ck;
  };

  auto diverged = [&](long long i, const char* what) {
    if (!diagnostic_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(diagnostic_dir, ec);
      save_checkpoint(snapshot(i), diagnostic_dir / "diagnostic.ckpt");
    }
    throw ContractError("train: non-finite " + std::string(what) + " at iteration " +
                        std::to_string(i) + (diagnostic_dir.empty()
                                                 ? std::string()
                                                 : " (diagnostic checkpoint written)"));
  };

  if (metrics && start == 0) *metrics << metrics_csv_header();

  for (long long i = start; i < end; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const float lr = float(lr_at(i, cfg.lr0, cfg.lr_decay_interval, cfg.lr_decay_factor));

    std::vector<int> yi(std::size_t(B), 0), oi(std::size_t(B), 0);
    for (int b = 0; b < B; ++b) yi[std::size_t(b)] = int(rng() % young.size());
    for (int b = 0; b < B; ++b) oi[std::size_t(b)] = int(rng() % old_.size());

    std::vector<const Tensor*> young_ptrs;
    for (int y : yi) young_ptrs.push_back(&young[std::size_t(y)]->image);
    const Tensor young_batch = stack_images(young_ptrs);

    // ---- critic step: update D only; generated images enter detached ----
    const Tensor gen_batch = forward_eval(G.spec, G.params, young_batch);
    std::vector<Tensor> gen_taps;
    forward_eval(phi_age.spec, age_params, gen_batch, &gen_taps, tap_len);

    double d_loss_v = 0;
    {
      Tape tape;
      auto dnet = bind(tape, D.spec, D.params, /*with_grads=*/true);
      auto tap_ids = [&](const std::vector<Tensor>& taps) {
        std::vector<Tape::Id> ids;
        for (const auto& t : taps) ids.push_back(tape.leaf(t));
        return ids;
      };
      const auto so = forward_pathways(tape, dnet, tap_ids(stack_taps(oi, cache.old_taps)), true);
      const auto sy = forward_pathways(tape, dnet, tap_ids(stack_taps(yi, cache.young_taps)), true);
      const auto sg = forward_pathways(tape, dnet, tap_ids(gen_taps), true);
      const auto loss = total_d_loss(tape, gan_d_loss_ls(tape, so, sy, sg));
      d_loss_v = tape.val(loss).data[0];
      if (!std::isfinite(d_loss_v)) diverged(i, "critic loss");
      tape.backward(loss);
      D.params.zero_grads();
      collect_grads(tape, dnet);
      adam_step(D.params, adam_d, lr, wd);
    }

    // ---- generator step: adversarial + identity, pixel on schedule ----
    double g_gan_v = 0, g_id_v = 0, g_total_v = 0;
    std::optional<double> g_pix_v;
    {
      Tape tape;
      auto gnet = bind(tape, G.spec, G.params, /*with_grads=*/true);
      auto anet = bind(tape, phi_age.spec, age_params, false);
      auto inet = bind(tape, phi_id.spec, id_params, false);
      auto dnet = bind(tape, D.spec, D.params, false);
      const auto x = tape.leaf(young_batch);
      const auto gen = forward(tape, gnet, x, true).out;
      const auto taps = forward(tape, anet, gen, true, tap_len).taps;
      const auto sg = forward_pathways(tape, dnet, taps, true);
      const auto g_gan = gan_g_loss_ls(tape, sg);
      const auto emb_out = forward(tape, inet, gen, true).out;
      const auto emb_in = tape.leaf(stack_rows(yi, cache.young_emb, cache.emb_dim));
      const auto l_id = identity_loss(tape, emb_in, emb_out);
      std::optional<Tape::Id> pix;
      if (i % cfg.pixel_period == 0) pix = pixel_loss(tape, x, gen);
      const auto total = total_g_loss(tape, g_gan, pix, l_id, cfg.weights);
      g_gan_v = tape.val(g_gan).data[0];
      g_id_v = tape.val(l_id).data[0];
      if (pix) g_pix_v = tape.val(*pix).data[0];
      g_total_v = tape.val(total).data[0];
      if (!std::isfinite(g_total_v)) diverged(i, "generator loss");
      tape.backward(total);
      G.params.zero_grads();
      collect_grads(tape, gnet);
      adam_step(G.params, adam_g, lr, wd);
    }

    MetricsRow row;
    row.iteration = i;
    row.lr = lr;
    row.gan_d = d_loss_v;
    row.gan_g = g_gan_v;
    row.pixel = g_pix_v;
    row.identity = g_id_v;
    row.g_total = g_total_v;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (metrics) *metrics << metrics_csv_line(row);
    if (progress && (i + 1) % 100 == 0) {
      char line[160];
      std::snprintf(line, sizeof(line), "iter %lld/%lld  lr=%.3g  L_D=%.4g  L_G=%.4g\n", i + 1,
                    cfg.total_iterations, double(lr), d_loss_v, g_total_v);
      *progress << line << std::flush;
    }
  }

  return snapshot(end);
}

Tensor generate(const Checkpoint& ck, const Tensor& input) {
  return generate(ck, std::vector<Tensor>{input})[0];
}

std::vector<Tensor> generate(const Checkpoint& ck, const std::vector<Tensor>& inputs) {
  const auto* g = ck.find("G");
  check(g != nullptr, "generate: checkpoint has no generator network");
  const RunConfig cfg = config_from_json_text(ck.config_json);
  ParameterSet params = g->params;
  std::vector<Tensor> out(inputs.size());
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic) if (nt > 1)
#endif
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& x = inputs[i];
    check(x.rank() == 3 && x.dim(0) == 3 && x.dim(1) == cfg.scale.image_size &&
              x.dim(2) == cfg.scale.image_size,
          "generate: input must be [3," + std::to_string(cfg.scale.image_size) + "," +
              std::to_string(cfg.scale.image_size) + "]");
    Tensor y = forward_eval(g->spec, params, x);  // eval forward never writes params
    for (auto& v : y.data) v = std::clamp(v, -1.0f, 1.0f);
    out[i] = std::move(y);
  }
  return out;
}

}  // namespace pagn
