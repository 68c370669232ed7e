#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pagn/params.hpp"
#include "pagn/tape.hpp"

namespace pagn {

enum class LayerKind {
  conv,
  conv_transpose,
  instance_norm,
  batch_norm,
  relu,
  leaky_relu,
  tanh_,
  sigmoid_,
  residual_block,
  flatten,
  linear,
  global_pool,
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

struct LayerSpec {
  LayerKind kind;
  int in_ch = 0, out_ch = 0;        // conv / conv_transpose / residual_block (in==out)
  int kernel = 0, stride = 1, padding = 0, output_padding = 0;
  int in_features = 0, out_features = 0;  // linear
  double slope = 0.2;               // leaky_relu
  double eps = 1e-5;                // norms
  double momentum = 0.1;            // batch_norm running stats
};

/// Ordered layer list plus tap metadata. `pathway_offsets` is empty for a
/// plain sequential network; when set, the layer list is the concatenation of
/// independent pathway segments fed by tap feature maps (score estimator).
struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<int> tap_indices;     // 1-based conv ordinals to export
  std::vector<int> pathway_offsets; // segment starts into `layers`
  bool normalize_output = false;    // L2-normalize final [N,F] rows

  int conv_count() const;
  /// Layers needed to produce every tap (through the activation following
  /// the last tapped conv); 0 when the network exports no taps.
  int tap_prefix_length() const;
  void validate() const;
};

std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& json_text);

/// Desk-scale knobs for every network builder.
struct ScaleConfig {
  int image_size = 48;
  int base_channels = 16;
  int channel_multiplier = 2;
  int identity_embedding_dim = 32;
  int n_age_labels = 4;

  void validate() const;
  std::vector<int> tap_channels() const;  // channels at the 4 exported taps
  std::vector<int> tap_sizes() const;     // spatial sizes at the 4 taps
};

struct BuiltNetwork {
  NetworkSpec spec;
  ParameterSet params;
};

BuiltNetwork build_generator(const ScaleConfig& cfg, std::uint64_t seed);
BuiltNetwork build_age_extractor(const ScaleConfig& cfg, std::uint64_t seed);
BuiltNetwork build_pyramid_discriminator(const ScaleConfig& cfg, std::uint64_t seed);
BuiltNetwork build_one_pathway_discriminator(const ScaleConfig& cfg, std::uint64_t seed);
BuiltNetwork build_identity_descriptor(const ScaleConfig& cfg, std::uint64_t seed);

/// The estimator's spatial output with its constant label map.
struct ScoreMap {
  Tensor scores;  // [N,1,12,3] pyramid, [N,1,3,3] one-pathway
  static Tensor target_for(const Shape& s, float label) { return Tensor::full(s, label); }
};

template <typename T>
struct BoundNet {
  const NetworkSpec* spec = nullptr;
  ParameterSetT<T>* params = nullptr;
  std::vector<typename TapeT<T>::Id> ids;  // -1 for off-tape buffers (running stats)
};

/// Places parameters on the tape. Gradients flow into a parameter only when
/// it is trainable and `with_grads` is set; frozen networks bind as constants
/// yet still pass gradients through to their inputs.
template <typename T>
BoundNet<T> bind(TapeT<T>& tape, const NetworkSpec& spec, ParameterSetT<T>& params,
                 bool with_grads);

/// Copies accumulated tape gradients back into parameter storage.
template <typename T>
void collect_grads(const TapeT<T>& tape, BoundNet<T>& net);

template <typename T>
struct FwdOut {
  typename TapeT<T>::Id out;
  std::vector<typename TapeT<T>::Id> taps;
};

/// Sequential forward. Input must be [N,C,H,W]. `upto` executes only the
/// first `upto` layers (-1 = all); used to read pre-head logits.
template <typename T>
FwdOut<T> forward(TapeT<T>& tape, const BoundNet<T>& net, typename TapeT<T>::Id input, bool train,
                  int upto = -1);

/// Pathway forward for score estimators; consumes the tap list produced by
/// the age extractor (a single-pathway estimator uses only the deepest tap).
template <typename T>
typename TapeT<T>::Id forward_pathways(TapeT<T>& tape, const BoundNet<T>& net,
                                       const std::vector<typename TapeT<T>::Id>& taps, bool train);

/// Tape-free convenience forward; accepts [C,H,W] or [N,C,H,W].
Tensor forward_eval(const NetworkSpec& spec, ParameterSet& params, const Tensor& input,
                    std::vector<Tensor>* taps = nullptr, int upto = -1);
Tensor forward_pathways_eval(const NetworkSpec& spec, ParameterSet& params,
                             const std::vector<Tensor>& taps);

}  // namespace pagn
