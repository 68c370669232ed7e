#include "pagn/critics.hpp"

#include "pagn/adam.hpp"

namespace pagn {

namespace {

template <typename T>
void check_scores(const TensorT<T>& s, const char* name) {
  check(s.rank() >= 2, std::string(name) + ": score map must be batched");
  check(s.numel() >= 1, std::string(name) + ": empty batch");
}

}  // namespace

template <typename T>
typename TapeT<T>::Id gan_d_loss_ls(TapeT<T>& tape, typename TapeT<T>::Id score_old,
                                    typename TapeT<T>::Id score_young,
                                    typename TapeT<T>::Id score_gen) {
  check_scores(tape.val(score_old), "gan_d_loss_ls");
  check_scores(tape.val(score_young), "gan_d_loss_ls");
  check_scores(tape.val(score_gen), "gan_d_loss_ls");
  const Shape map_y(tape.val(score_young).shape.begin() + 1, tape.val(score_young).shape.end());
  const Shape map_g(tape.val(score_gen).shape.begin() + 1, tape.val(score_gen).shape.end());
  const Shape map_o(tape.val(score_old).shape.begin() + 1, tape.val(score_old).shape.end());
  check(map_y == map_g && map_y == map_o, "gan_d_loss_ls: score map shape mismatch");
  auto real = tape.mean_all(tape.square(tape.add_scalar(score_old, T(-1))));
  auto young = tape.mean_all(tape.square(score_young));
  auto gen = tape.mean_all(tape.square(score_gen));
  return tape.mul_scalar(tape.add(real, tape.add(young, gen)), T(0.5));
}

template <typename T>
typename TapeT<T>::Id gan_g_loss_ls(TapeT<T>& tape, typename TapeT<T>::Id score_gen) {
  check_scores(tape.val(score_gen), "gan_g_loss_ls");
  return tape.mean_all(tape.square(tape.add_scalar(score_gen, T(-1))));
}

template <typename T>
typename TapeT<T>::Id gan_d_loss_ce(TapeT<T>& tape, typename TapeT<T>::Id d_old,
                                    typename TapeT<T>::Id d_gen) {
  for (auto id : {d_old, d_gen})
    for (T v : tape.val(id).data)
      check(v > T(0) && v < T(1), "gan_d_loss_ce: probabilities must lie strictly in (0,1)");
  auto pos = tape.mean_all(tape.log_(d_old));
  auto neg = tape.mean_all(tape.log_(tape.add_scalar(tape.mul_scalar(d_gen, T(-1)), T(1))));
  return tape.mul_scalar(tape.add(pos, neg), T(-1));
}

template <typename T>
typename TapeT<T>::Id identity_loss(TapeT<T>& tape, typename TapeT<T>::Id emb_in,
                                    typename TapeT<T>::Id emb_out) {
  check(tape.val(emb_in).same_shape(tape.val(emb_out)),
        "identity_loss: embedding shape mismatch");
  check(tape.val(emb_in).rank() == 2, "identity_loss: embeddings must be [N,E]");
  const int n = tape.val(emb_in).dim(0);  // tape pushes below invalidate references
  auto d = tape.sub(emb_in, emb_out);
  auto sq = tape.sum_all(tape.square(d));
  return tape.mul_scalar(sq, T(1.0 / double(n)));
}

template <typename T>
typename TapeT<T>::Id pixel_loss(TapeT<T>& tape, typename TapeT<T>::Id x,
                                 typename TapeT<T>::Id gx) {
  check(tape.val(x).same_shape(tape.val(gx)), "pixel_loss: image shape mismatch");
  return tape.mean_all(tape.square(tape.sub(gx, x)));
}

template <typename T>
typename TapeT<T>::Id total_g_loss(TapeT<T>& tape, typename TapeT<T>::Id gan_g,
                                   std::optional<typename TapeT<T>::Id> pixel,
                                   typename TapeT<T>::Id identity, const LossWeights& w) {
  w.validate();
  auto total = tape.add(tape.mul_scalar(gan_g, T(w.lambda_a)),
                        tape.mul_scalar(identity, T(w.lambda_i)));
  if (pixel) total = tape.add(total, tape.mul_scalar(*pixel, T(w.lambda_p)));
  return total;
}

double total_g_loss_value(double gan_g, std::optional<double> pixel, double identity,
                          const LossWeights& w) {
  w.validate();
  return w.lambda_a * gan_g + (pixel ? w.lambda_p * *pixel : 0.0) + w.lambda_i * identity;
}

template <typename T>
typename TapeT<T>::Id triplet_loss(TapeT<T>& tape, typename TapeT<T>::Id anchor,
                                   typename TapeT<T>::Id positive,
                                   typename TapeT<T>::Id negative, T margin) {
  check(margin > T(0), "triplet_loss: margin must be positive");
  const auto& a = tape.val(anchor);
  check(a.same_shape(tape.val(positive)) && a.same_shape(tape.val(negative)),
        "triplet_loss: embedding shape mismatch");
  auto d_ap = tape.row_sum(tape.square(tape.sub(anchor, positive)));
  auto d_an = tape.row_sum(tape.square(tape.sub(anchor, negative)));
  auto hinge = tape.relu(tape.add_scalar(tape.sub(d_ap, d_an), margin));
  return tape.mean_all(hinge);
}

std::vector<double> lsgan_optimal_scores(const std::vector<double>& p_old,
                                         const std::vector<double>& p_young,
                                         const std::vector<double>& p_gen, int steps, double lr) {
  const std::size_t n = p_old.size();
  check(n > 0 && p_young.size() == n && p_gen.size() == n,
        "lsgan_optimal_scores: distributions must share a support");
  ParameterSetT<double> params;
  params.add("scores", TensorT<double>({int(n)}));
  auto state = AdamStateT<double>::init_for(params);
  const TensorT<double> wo({int(n)}, std::vector<double>(p_old));
  const TensorT<double> wy({int(n)}, std::vector<double>(p_young));
  const TensorT<double> wg({int(n)}, std::vector<double>(p_gen));
  for (int step = 0; step < steps; ++step) {
    Tape64 tape;
    auto d = tape.leaf(params[0].value, /*requires_grad=*/true);
    auto o_id = tape.leaf(wo), y_id = tape.leaf(wy), g_id = tape.leaf(wg);
    // expectation form of the least-squares critic loss over the support
    auto real = tape.sum_all(tape.mul(o_id, tape.square(tape.add_scalar(d, -1.0))));
    auto fake = tape.sum_all(tape.mul(tape.add(y_id, g_id), tape.square(d)));
    auto loss = tape.mul_scalar(tape.add(real, fake), 0.5);
    tape.backward(loss);
    params[0].grad = tape.grad_of(d);
    adam_step(params, state, lr);
  }
  return params[0].value.data;
}

#define PAGN_INSTANTIATE_CRITICS(T)                                                             \
  template TapeT<T>::Id gan_d_loss_ls<T>(TapeT<T>&, TapeT<T>::Id, TapeT<T>::Id, TapeT<T>::Id);  \
  template TapeT<T>::Id gan_g_loss_ls<T>(TapeT<T>&, TapeT<T>::Id);                              \
  template TapeT<T>::Id gan_d_loss_ce<T>(TapeT<T>&, TapeT<T>::Id, TapeT<T>::Id);                \
  template TapeT<T>::Id identity_loss<T>(TapeT<T>&, TapeT<T>::Id, TapeT<T>::Id);                \
  template TapeT<T>::Id pixel_loss<T>(TapeT<T>&, TapeT<T>::Id, TapeT<T>::Id);                   \
  template TapeT<T>::Id total_g_loss<T>(TapeT<T>&, TapeT<T>::Id, std::optional<TapeT<T>::Id>,   \
                                        TapeT<T>::Id, const LossWeights&);                      \
  template TapeT<T>::Id triplet_loss<T>(TapeT<T>&, TapeT<T>::Id, TapeT<T>::Id, TapeT<T>::Id, T);

PAGN_INSTANTIATE_CRITICS(float)
PAGN_INSTANTIATE_CRITICS(double)
#undef PAGN_INSTANTIATE_CRITICS

}  // namespace pagn
