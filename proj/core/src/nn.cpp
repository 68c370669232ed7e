#include "pagn/nn.hpp"

#include <cmath>
#include <random>

#include "json.hpp"

namespace pagn {

namespace {

const char* kKindNames[] = {"conv",   "conv_transpose", "instance_norm", "batch_norm",
                            "relu",   "leaky_relu",     "tanh",          "sigmoid",
                            "residual_block", "flatten", "linear",       "global_pool"};

struct InitRng {
  std::mt19937_64 eng;
  explicit InitRng(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo, double hi) { return lo + to_unit(eng()) * (hi - lo); }
};

Tensor kaiming_uniform(Shape shape, int fan_in, InitRng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = float(rng.uniform(-bound, bound));
  return t;
}

// Builders append layers and their parameters in lockstep; forward() walks
// the two sequences with a shared cursor.
struct NetBuilder {
  NetworkSpec spec;
  ParameterSet params;
  InitRng rng;

  NetBuilder(std::string name, std::uint64_t seed) : rng(seed) { spec.name = std::move(name); }

  std::string lp() const { return "L" + std::to_string(spec.layers.size()); }

  void conv(int in, int out, int k, int s, int p) {
    LayerSpec l{LayerKind::conv};
    l.in_ch = in, l.out_ch = out, l.kernel = k, l.stride = s, l.padding = p;
    params.add(lp() + ".w", kaiming_uniform({out, in, k, k}, in * k * k, rng));
    params.add(lp() + ".b", Tensor({out}));
    spec.layers.push_back(l);
  }
  void conv_t(int in, int out, int k, int s, int p, int op) {
    LayerSpec l{LayerKind::conv_transpose};
    l.in_ch = in, l.out_ch = out, l.kernel = k, l.stride = s, l.padding = p, l.output_padding = op;
    params.add(lp() + ".w", kaiming_uniform({in, out, k, k}, in * k * k, rng));
    params.add(lp() + ".b", Tensor({out}));
    spec.layers.push_back(l);
  }
  void res(int ch) {
    LayerSpec l{LayerKind::residual_block};
    l.in_ch = ch, l.out_ch = ch, l.kernel = 3, l.padding = 1;
    params.add(lp() + ".c1.w", kaiming_uniform({ch, ch, 3, 3}, ch * 9, rng));
    params.add(lp() + ".c1.b", Tensor({ch}));
    params.add(lp() + ".c2.w", kaiming_uniform({ch, ch, 3, 3}, ch * 9, rng));
    params.add(lp() + ".c2.b", Tensor({ch}));
    spec.layers.push_back(l);
  }
  void bnorm(int ch) {
    LayerSpec l{LayerKind::batch_norm};
    l.out_ch = ch;
    params.add(lp() + ".g", Tensor::full({ch}, 1.0f));
    params.add(lp() + ".bt", Tensor({ch}));
    params.add(lp() + ".rm", Tensor({ch}), /*trainable=*/false);
    params.add(lp() + ".rv", Tensor::full({ch}, 1.0f), /*trainable=*/false);
    spec.layers.push_back(l);
  }
  void lin(int in, int out) {
    LayerSpec l{LayerKind::linear};
    l.in_features = in, l.out_features = out;
    params.add(lp() + ".w", kaiming_uniform({out, in}, in, rng));
    params.add(lp() + ".b", Tensor({out}));
    spec.layers.push_back(l);
  }
  void simple(LayerKind k) { spec.layers.push_back(LayerSpec{k}); }
  void lrelu(double slope) {
    LayerSpec l{LayerKind::leaky_relu};
    l.slope = slope;
    spec.layers.push_back(l);
  }
};

int halve(int s) { return (s - 1) / 2 + 1; }  // 3x3 conv, stride 2, pad 1

// Terminal convolution taking a small square map to 3x3.
void add_terminal_conv(NetBuilder& b, int in_ch, int size) {
  switch (size) {
    case 6: b.conv(in_ch, 1, 3, 2, 1); break;
    case 5: b.conv(in_ch, 1, 3, 1, 0); break;
    case 4: b.conv(in_ch, 1, 2, 1, 0); break;
    case 3: b.conv(in_ch, 1, 3, 1, 1); break;
    default:
      throw ContractError("discriminator: cannot reduce " + std::to_string(size) + "x" +
                          std::to_string(size) + " map to 3x3");
  }
}

}  // namespace

const char* layer_kind_name(LayerKind k) { return kKindNames[int(k)]; }

LayerKind layer_kind_from_name(const std::string& s) {
  for (int i = 0; i < int(std::size(kKindNames)); ++i)
    if (s == kKindNames[i]) return LayerKind(i);
  throw ContractError("network spec: unknown layer kind '" + s + "'");
}

int NetworkSpec::conv_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == LayerKind::conv ? 1 : 0;
  return n;
}

int NetworkSpec::tap_prefix_length() const {
  if (tap_indices.empty()) return 0;
  const int last = tap_indices.back();
  int ordinal = 0;
  for (int j = 0; j < int(layers.size()); ++j) {
    if (layers[std::size_t(j)].kind != LayerKind::conv) continue;
    if (++ordinal == last) {
      int end = j + 1;
      if (end < int(layers.size()) && (layers[std::size_t(end)].kind == LayerKind::relu ||
                                       layers[std::size_t(end)].kind == LayerKind::leaky_relu))
        ++end;
      return end;
    }
  }
  return int(layers.size());
}

void NetworkSpec::validate() const {
  check(!layers.empty(), "network spec: no layers");
  const int nconv = conv_count();
  int prev = 0;
  for (int t : tap_indices) {
    check(t >= 1 && t <= nconv, "network spec: tap ordinal " + std::to_string(t) +
                                    " exceeds conv count " + std::to_string(nconv));
    check(t > prev, "network spec: tap ordinals must be strictly increasing");
    prev = t;
  }
  int prev_off = -1;
  for (int o : pathway_offsets) {
    check(o >= 0 && o < int(layers.size()), "network spec: pathway offset out of range");
    check(o > prev_off, "network spec: pathway offsets must be increasing");
    prev_off = o;
  }
  if (!pathway_offsets.empty())
    check(pathway_offsets[0] == 0, "network spec: first pathway must start at layer 0");
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::conv_transpose:
        check(l.in_ch > 0 && l.out_ch > 0 && l.kernel >= 1 && l.stride >= 1 && l.padding >= 0,
              "network spec: invalid conv hyperparameters");
        check(l.kind != LayerKind::conv_transpose ||
                  (l.output_padding >= 0 && l.output_padding < l.stride),
              "network spec: invalid output_padding");
        break;
      case LayerKind::residual_block:
        check(l.in_ch == l.out_ch && l.in_ch > 0 && l.kernel >= 1,
              "network spec: residual block needs matching channels");
        break;
      case LayerKind::linear:
        check(l.in_features > 0 && l.out_features > 0, "network spec: invalid linear dims");
        break;
      case LayerKind::leaky_relu:
        check(l.slope >= 0 && l.slope < 1, "network spec: leaky slope must be in [0,1)");
        break;
      default: break;
    }
  }
}

std::string network_spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["tap_indices"] = spec.tap_indices;
  j["pathway_offsets"] = spec.pathway_offsets;
  j["normalize_output"] = spec.normalize_output;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json lj;
    lj["kind"] = layer_kind_name(l.kind);
    lj["in_ch"] = l.in_ch;
    lj["out_ch"] = l.out_ch;
    lj["kernel"] = l.kernel;
    lj["stride"] = l.stride;
    lj["padding"] = l.padding;
    lj["output_padding"] = l.output_padding;
    lj["in_features"] = l.in_features;
    lj["out_features"] = l.out_features;
    lj["slope"] = l.slope;
    lj["eps"] = l.eps;
    lj["momentum"] = l.momentum;
    j["layers"].push_back(lj);
  }
  return j.dump();
}

NetworkSpec network_spec_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  check(!j.is_discarded(), "network spec: malformed JSON");
  NetworkSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.tap_indices = j.at("tap_indices").get<std::vector<int>>();
    spec.pathway_offsets = j.at("pathway_offsets").get<std::vector<int>>();
    spec.normalize_output = j.at("normalize_output").get<bool>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l{layer_kind_from_name(lj.at("kind").get<std::string>())};
      l.in_ch = lj.at("in_ch").get<int>();
      l.out_ch = lj.at("out_ch").get<int>();
      l.kernel = lj.at("kernel").get<int>();
      l.stride = lj.at("stride").get<int>();
      l.padding = lj.at("padding").get<int>();
      l.output_padding = lj.at("output_padding").get<int>();
      l.in_features = lj.at("in_features").get<int>();
      l.out_features = lj.at("out_features").get<int>();
      l.slope = lj.at("slope").get<double>();
      l.eps = lj.at("eps").get<double>();
      l.momentum = lj.at("momentum").get<double>();
      spec.layers.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("network spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

void ScaleConfig::validate() const {
  check(image_size % 8 == 0, "scale config: image_size must be divisible by 8");
  check(image_size >= 24, "scale config: image_size must be at least 24");
  check(base_channels >= 4, "scale config: base_channels must be at least 4");
  check(channel_multiplier >= 1, "scale config: channel_multiplier must be at least 1");
  check(identity_embedding_dim >= 2, "scale config: identity_embedding_dim too small");
  check(n_age_labels >= 2, "scale config: n_age_labels too small");
}

std::vector<int> ScaleConfig::tap_channels() const {
  const int b = base_channels, m = channel_multiplier;
  return {b, m * b, m * m * b, m * m * m * b};
}

std::vector<int> ScaleConfig::tap_sizes() const {
  return {image_size, image_size / 2, image_size / 4, image_size / 8};
}

BuiltNetwork build_generator(const ScaleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int b = cfg.base_channels, m = cfg.channel_multiplier;
  NetBuilder nb("generator", mix64(seed, 0xa6e1));
  // encoder: three stride-2 convs
  nb.conv(3, b, 3, 2, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  nb.conv(b, m * b, 3, 2, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  nb.conv(m * b, m * m * b, 3, 2, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  for (int i = 0; i < 4; ++i) nb.res(m * m * b);
  // decoder mirrors the encoder; final conv head maps back to image space
  nb.conv_t(m * m * b, m * b, 3, 2, 1, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  nb.conv_t(m * b, b, 3, 2, 1, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  nb.conv_t(b, b, 3, 2, 1, 1);
  nb.simple(LayerKind::instance_norm);
  nb.simple(LayerKind::relu);
  nb.conv(b, 3, 3, 1, 1);
  nb.simple(LayerKind::tanh_);
  nb.spec.validate();
  return {std::move(nb.spec), std::move(nb.params)};
}

BuiltNetwork build_age_extractor(const ScaleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int b = cfg.base_channels, m = cfg.channel_multiplier;
  NetBuilder nb("age_extractor", mix64(seed, 0xa9e2));
  const int ch[10] = {b, b, m * b, m * b, m * m * b, m * m * b, m * m * b,
                      m * m * m * b, m * m * m * b, m * m * m * b};
  int in = 3;
  for (int i = 0; i < 10; ++i) {
    const bool down = (i == 2 || i == 4 || i == 7);  // stride-2 at convs 3, 5, 8
    nb.conv(in, ch[i], 3, down ? 2 : 1, 1);
    nb.simple(LayerKind::relu);
    in = ch[i];
  }
  nb.simple(LayerKind::global_pool);
  nb.lin(in, cfg.n_age_labels);
  nb.simple(LayerKind::sigmoid_);
  nb.spec.tap_indices = {2, 4, 7, 10};
  nb.spec.validate();
  return {std::move(nb.spec), std::move(nb.params)};
}

BuiltNetwork build_pyramid_discriminator(const ScaleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetBuilder nb("discriminator", mix64(seed, 0xd15c));
  const auto tch = cfg.tap_channels();
  const auto tsz = cfg.tap_sizes();
  const int pw = cfg.channel_multiplier * cfg.base_channels;
  for (int p = 0; p < 4; ++p) {
    nb.spec.pathway_offsets.push_back(int(nb.spec.layers.size()));
    int in = tch[std::size_t(p)], s = tsz[std::size_t(p)];
    while (s > 6) {
      nb.conv(in, pw, 3, 2, 1);
      nb.bnorm(pw);
      nb.lrelu(0.2);
      in = pw;
      s = halve(s);
    }
    add_terminal_conv(nb, in, s);  // bare: no norm/activation on the pathway's last conv
  }
  nb.spec.validate();
  return {std::move(nb.spec), std::move(nb.params)};
}

BuiltNetwork build_one_pathway_discriminator(const ScaleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetBuilder nb("discriminator_one_pathway", mix64(seed, 0xd15d));
  const int pw = cfg.channel_multiplier * cfg.base_channels;
  int in = cfg.tap_channels()[3];
  int s = cfg.tap_sizes()[3];
  nb.spec.pathway_offsets.push_back(0);
  for (int i = 0; i < 3; ++i) {
    nb.conv(in, pw, 3, 1, 1);
    nb.bnorm(pw);
    nb.lrelu(0.2);
    in = pw;
  }
  while (s > 6) {
    nb.conv(in, pw, 3, 2, 1);
    nb.bnorm(pw);
    nb.lrelu(0.2);
    s = halve(s);
  }
  add_terminal_conv(nb, in, s);
  nb.spec.validate();
  return {std::move(nb.spec), std::move(nb.params)};
}

BuiltNetwork build_identity_descriptor(const ScaleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int b = cfg.base_channels, m = cfg.channel_multiplier;
  NetBuilder nb("identity_descriptor", mix64(seed, 0x1de5));
  const int ch[10] = {b, b, m * b, m * b, m * m * b, m * m * b, m * m * b,
                      m * m * b, m * m * b, m * m * b};
  int in = 3;
  for (int i = 0; i < 10; ++i) {
    const bool down = (i % 2 == 0 && i < 8);  // stride-2 at convs 1, 3, 5, 7
    nb.conv(in, ch[i], 3, down ? 2 : 1, 1);
    nb.simple(LayerKind::relu);
    in = ch[i];
  }
  nb.simple(LayerKind::global_pool);
  nb.lin(in, cfg.identity_embedding_dim);
  nb.spec.normalize_output = true;
  nb.spec.validate();
  return {std::move(nb.spec), std::move(nb.params)};
}

template <typename T>
BoundNet<T> bind(TapeT<T>& tape, const NetworkSpec& spec, ParameterSetT<T>& params,
                 bool with_grads) {
  BoundNet<T> net{&spec, &params, {}};
  net.ids.reserve(std::size_t(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    // Running-stat buffers stay off the tape; the kernel reads and writes
    // them through the parameter set directly.
    const bool buffer = p.name.ends_with(".rm") || p.name.ends_with(".rv");
    net.ids.push_back(buffer ? -1 : tape.leaf(p.value, with_grads && p.trainable));
  }
  return net;
}

template <typename T>
void collect_grads(const TapeT<T>& tape, BoundNet<T>& net) {
  for (int i = 0; i < net.params->size(); ++i) {
    auto& p = (*net.params)[i];
    const auto id = net.ids[std::size_t(i)];
    if (id >= 0 && p.trainable && tape.requires_grad(id)) p.grad = tape.grad_of(id);
  }
}

namespace {

// Executes layers [from, to) starting from `cur`; `cursor` indexes parameters.
template <typename T>
typename TapeT<T>::Id run_layers(TapeT<T>& tape, const BoundNet<T>& net,
                                 typename TapeT<T>::Id cur, int from, int to, bool train,
                                 std::vector<typename TapeT<T>::Id>* taps, int* conv_ordinal,
                                 int* cursor) {
  const auto& layers = net.spec->layers;
  const auto& ids = net.ids;
  auto& params = *net.params;
  int c = *cursor;
  int tapped_layer = -2;  // layer index of the most recently tapped conv
  for (int j = from; j < to; ++j) {
    const LayerSpec& l = layers[std::size_t(j)];
    switch (l.kind) {
      case LayerKind::conv:
        cur = tape.conv2d(cur, ids[std::size_t(c)], ids[std::size_t(c) + 1], l.stride, l.padding);
        c += 2;
        if (conv_ordinal) {
          ++*conv_ordinal;
          for (int t : net.spec->tap_indices)
            if (t == *conv_ordinal) {
              if (taps) taps->push_back(cur);
              tapped_layer = j;
            }
        }
        break;
      case LayerKind::conv_transpose:
        cur = tape.conv_transpose2d(cur, ids[std::size_t(c)], ids[std::size_t(c) + 1], l.stride,
                                    l.padding, l.output_padding);
        c += 2;
        break;
      case LayerKind::instance_norm:
        cur = tape.instance_norm(cur, T(l.eps));
        break;
      case LayerKind::batch_norm:
        cur = tape.batch_norm(cur, ids[std::size_t(c)], ids[std::size_t(c) + 1],
                              &params[c + 2].value, &params[c + 3].value, train, T(l.eps),
                              T(l.momentum));
        c += 4;
        break;
      case LayerKind::relu:
        cur = tape.relu(cur);
        // taps export the activation of the tapped conv
        if (tapped_layer == j - 1 && taps && !taps->empty()) taps->back() = cur;
        break;
      case LayerKind::leaky_relu:
        cur = tape.leaky_relu(cur, T(l.slope));
        if (tapped_layer == j - 1 && taps && !taps->empty()) taps->back() = cur;
        break;
      case LayerKind::tanh_:
        cur = tape.tanh_(cur);
        break;
      case LayerKind::sigmoid_:
        cur = tape.sigmoid_(cur);
        break;
      case LayerKind::residual_block: {
        auto a = tape.conv2d(cur, ids[std::size_t(c)], ids[std::size_t(c) + 1], 1, l.padding);
        a = tape.instance_norm(a, T(l.eps));
        a = tape.relu(a);
        a = tape.conv2d(a, ids[std::size_t(c) + 2], ids[std::size_t(c) + 3], 1, l.padding);
        a = tape.instance_norm(a, T(l.eps));
        a = tape.relu(a);
        cur = tape.add(cur, a);
        c += 4;
        break;
      }
      case LayerKind::flatten:
        cur = tape.flatten(cur);
        break;
      case LayerKind::linear:
        cur = tape.linear(cur, ids[std::size_t(c)], ids[std::size_t(c) + 1]);
        c += 2;
        break;
      case LayerKind::global_pool:
        cur = tape.global_pool(cur);
        break;
    }
  }
  *cursor = c;
  return cur;
}

}  // namespace

template <typename T>
FwdOut<T> forward(TapeT<T>& tape, const BoundNet<T>& net, typename TapeT<T>::Id input, bool train,
                  int upto) {
  check(net.spec->pathway_offsets.empty(), "forward: use forward_pathways for score estimators");
  check(tape.val(input).rank() == 4, "forward: input must be [N,C,H,W]");
  const int n_layers = upto < 0 ? int(net.spec->layers.size()) : upto;
  check(n_layers <= int(net.spec->layers.size()), "forward: upto exceeds layer count");
  FwdOut<T> out;
  int ordinal = 0, cursor = 0;
  out.out = run_layers(tape, net, input, 0, n_layers, train, &out.taps, &ordinal, &cursor);
  if (net.spec->normalize_output && n_layers == int(net.spec->layers.size()))
    out.out = tape.l2_normalize_rows(out.out, T(1e-12));
  return out;
}

template <typename T>
typename TapeT<T>::Id forward_pathways(TapeT<T>& tape, const BoundNet<T>& net,
                                       const std::vector<typename TapeT<T>::Id>& taps,
                                       bool train) {
  const auto& offs = net.spec->pathway_offsets;
  check(!offs.empty(), "forward_pathways: network has no pathways");
  const std::size_t n_paths = offs.size();
  check(!taps.empty(), "forward_pathways: no tap maps supplied");
  check(n_paths == 1 || taps.size() == n_paths,
        "forward_pathways: expected " + std::to_string(n_paths) + " tap maps, got " +
            std::to_string(taps.size()));
  std::vector<typename TapeT<T>::Id> blocks;
  int cursor = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const int from = offs[p];
    const int to = p + 1 < n_paths ? offs[p + 1] : int(net.spec->layers.size());
    // A single-pathway estimator consumes only the deepest tap.
    const auto input = n_paths == 1 ? taps.back() : taps[p];
    blocks.push_back(run_layers(tape, net, input, from, to, train, nullptr, nullptr, &cursor));
  }
  return blocks.size() == 1 ? blocks[0] : tape.concat(blocks, 2);
}

namespace {
Tensor unsqueeze0(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape.begin(), t.shape.end());
  Tensor out(s);
  out.data = t.data;
  return out;
}
Tensor squeeze0(const Tensor& t) {
  Shape s(t.shape.begin() + 1, t.shape.end());
  Tensor out(s);
  out.data = t.data;
  return out;
}
}  // namespace

Tensor forward_eval(const NetworkSpec& spec, ParameterSet& params, const Tensor& input,
                    std::vector<Tensor>* taps, int upto) {
  const bool single = input.rank() == 3;
  Tape tape;
  auto net = bind(tape, spec, params, /*with_grads=*/false);
  const auto in_id = tape.leaf(single ? unsqueeze0(input) : input);
  auto out = forward(tape, net, in_id, /*train=*/false, upto);
  if (taps) {
    taps->clear();
    for (auto t : out.taps) taps->push_back(single ? squeeze0(tape.val(t)) : tape.val(t));
  }
  return single ? squeeze0(tape.val(out.out)) : tape.val(out.out);
}

Tensor forward_pathways_eval(const NetworkSpec& spec, ParameterSet& params,
                             const std::vector<Tensor>& taps) {
  const bool single = !taps.empty() && taps[0].rank() == 3;
  Tape tape;
  auto net = bind(tape, spec, params, /*with_grads=*/false);
  std::vector<Tape::Id> tap_ids;
  for (const auto& t : taps) tap_ids.push_back(tape.leaf(single ? unsqueeze0(t) : t));
  const auto out = forward_pathways(tape, net, tap_ids, /*train=*/false);
  return single ? squeeze0(tape.val(out)) : tape.val(out);
}

template BoundNet<float> bind<float>(TapeT<float>&, const NetworkSpec&, ParameterSetT<float>&,
                                     bool);
template BoundNet<double> bind<double>(TapeT<double>&, const NetworkSpec&, ParameterSetT<double>&,
                                       bool);
template void collect_grads<float>(const TapeT<float>&, BoundNet<float>&);
template void collect_grads<double>(const TapeT<double>&, BoundNet<double>&);
template FwdOut<float> forward<float>(TapeT<float>&, const BoundNet<float>&, TapeT<float>::Id,
                                      bool, int);
template FwdOut<double> forward<double>(TapeT<double>&, const BoundNet<double>&,
                                        TapeT<double>::Id, bool, int);
template TapeT<float>::Id forward_pathways<float>(TapeT<float>&, const BoundNet<float>&,
                                                  const std::vector<TapeT<float>::Id>&, bool);
template TapeT<double>::Id forward_pathways<double>(TapeT<double>&, const BoundNet<double>&,
                                                    const std::vector<TapeT<double>::Id>&, bool);

}  // namespace pagn
