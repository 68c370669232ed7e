#pragma once

#include <optional>

#include "pagn/tape.hpp"

namespace pagn {

/// Trade-off coefficients of the compound generator objective.
struct LossWeights {
  double lambda_a = 300.0;  // adversarial
  double lambda_p = 0.10;   // pixel
  double lambda_i = 0.005;  // identity

  void validate() const {
    check(lambda_a >= 0 && lambda_p >= 0 && lambda_i >= 0,
          "loss weights: coefficients must be non-negative");
  }
};

/// Least-squares critic loss. Real elderly score maps are pushed to 1; both
/// young and generated maps are pushed to 0 as negatives:
///   1/2 mean[(s_old-1)^2] + 1/2 (mean[s_young^2] + mean[s_gen^2])
template <typename T>
typename TapeT<T>::Id gan_d_loss_ls(TapeT<T>& tape, typename TapeT<T>::Id score_old,
                                    typename TapeT<T>::Id score_young,
                                    typename TapeT<T>::Id score_gen);

/// Generator-side least-squares loss: mean[(s_gen - 1)^2].
template <typename T>
typename TapeT<T>::Id gan_g_loss_ls(TapeT<T>& tape, typename TapeT<T>::Id score_gen);

/// Cross-entropy reference critic on probabilities in (0,1):
///   -mean[log d_old] - mean[log(1 - d_gen)]
template <typename T>
typename TapeT<T>::Id gan_d_loss_ce(TapeT<T>& tape, typename TapeT<T>::Id d_old,
                                    typename TapeT<T>::Id d_gen);

/// Mean squared Euclidean distance between embedding rows [N,E].
template <typename T>
typename TapeT<T>::Id identity_loss(TapeT<T>& tape, typename TapeT<T>::Id emb_in,
                                    typename TapeT<T>::Id emb_out);

/// Mean over the batch of the per-image size-normalized squared error, which
/// equals the plain mean of (gx - x)^2 over all elements.
template <typename T>
typename TapeT<T>::Id pixel_loss(TapeT<T>& tape, typename TapeT<T>::Id x,
                                 typename TapeT<T>::Id gx);

/// lambda_a * gan + lambda_p * pixel + lambda_i * identity. The pixel term is
/// only supplied on schedule-designated iterations.
template <typename T>
typename TapeT<T>::Id total_g_loss(TapeT<T>& tape, typename TapeT<T>::Id gan_g,
                                   std::optional<typename TapeT<T>::Id> pixel,
                                   typename TapeT<T>::Id identity, const LossWeights& w);

/// The critic objective is the least-squares loss unchanged.
template <typename T>
typename TapeT<T>::Id total_d_loss(TapeT<T>& tape, typename TapeT<T>::Id gan_d) {
  (void)tape;
  return gan_d;
}

/// Scalar convenience mirroring total_g_loss for plain numbers.
double total_g_loss_value(double gan_g, std::optional<double> pixel, double identity,
                          const LossWeights& w);

/// Hinge embedding objective: mean max(0, |a-p|^2 - |a-n|^2 + margin).
template <typename T>
typename TapeT<T>::Id triplet_loss(TapeT<T>& tape, typename TapeT<T>::Id anchor,
                                   typename TapeT<T>::Id positive,
                                   typename TapeT<T>::Id negative, T margin);

/// Trains a free per-point scalar estimator on the least-squares critic loss
/// over a discrete support with known masses; returns the trained scores.
/// The closed-form optimum at point u is p_old / (p_old + p_young + p_gen).
std::vector<double> lsgan_optimal_scores(const std::vector<double>& p_old,
                                         const std::vector<double>& p_young,
                                         const std::vector<double>& p_gen, int steps, double lr);

}  // namespace pagn
