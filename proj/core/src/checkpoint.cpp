#include "pagn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pagn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'A', 'G', 'N', '0', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::ofstream os;
  explicit Writer(const std::filesystem::path& p) : os(p, std::ios::binary) {
    if (!os) throw IOError("checkpoint: cannot open '" + p.string() + "' for writing");
  }
  void bytes(const void* p, std::size_t n) { os.write(static_cast<const char*>(p), std::streamsize(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    u32(std::uint32_t(t.rank()));
    for (int d : t.shape) u32(std::uint32_t(d));
    bytes(t.data.data(), t.data.size() * sizeof(float));
  }
};

struct Reader {
  std::ifstream is;
  std::string path;
  explicit Reader(const std::filesystem::path& p) : is(p, std::ios::binary), path(p.string()) {
    if (!is) throw IOError("checkpoint: cannot open '" + path + "'");
  }
  void bytes(void* p, std::size_t n, const char* field) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(is.gcount()) != n)
      throw IOError("checkpoint: '" + path + "' truncated while reading " + field);
  }
  std::uint8_t u8(const char* f) { std::uint8_t v; bytes(&v, 1, f); return v; }
  std::uint32_t u32(const char* f) { std::uint32_t v; bytes(&v, 4, f); return v; }
  std::uint64_t u64(const char* f) { std::uint64_t v; bytes(&v, 8, f); return v; }
  double f64(const char* f) { double v; bytes(&v, 8, f); return v; }
  std::string str(const char* f) {
    const std::uint32_t n = u32(f);
    if (n > (1u << 26)) throw IOError("checkpoint: '" + path + "' has oversized field " + f);
    std::string s(n, '\0');
    bytes(s.data(), n, f);
    return s;
  }
  Tensor tensor(const char* f) {
    const std::uint32_t rank = u32(f);
    if (rank == 0 || rank > 8) throw IOError("checkpoint: '" + path + "' has bad rank in " + f);
    Shape shape(rank);
    for (auto& d : shape) {
      d = int(u32(f));
      if (d <= 0) throw IOError("checkpoint: '" + path + "' has bad dims in " + f);
    }
    Tensor t(shape);
    bytes(t.data.data(), t.data.size() * sizeof(float), f);
    return t;
  }
};

}  // namespace

CheckpointNetwork* Checkpoint::find(const std::string& name) {
  for (auto& n : networks)
    if (n.name == name) return &n;
  return nullptr;
}
const CheckpointNetwork* Checkpoint::find(const std::string& name) const {
  for (const auto& n : networks)
    if (n.name == name) return &n;
  return nullptr;
}
const AdamSnapshot* Checkpoint::find_adam(const std::string& network) const {
  for (const auto& a : adam)
    if (a.network == network) return &a;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.str(ck.config_json);
  w.u64(ck.iteration);
  w.str(ck.rng_state);
  w.u32(std::uint32_t(ck.networks.size()));
  for (const auto& net : ck.networks) {
    w.str(net.name);
    w.str(network_spec_to_json(net.spec));
    w.u32(std::uint32_t(net.params.size()));
    for (int i = 0; i < net.params.size(); ++i) {
      const auto& p = net.params[i];
      w.str(p.name);
      w.u8(p.trainable ? 1 : 0);
      w.tensor(p.value);
    }
  }
  w.u32(std::uint32_t(ck.adam.size()));
  for (const auto& a : ck.adam) {
    w.str(a.network);
    w.u64(std::uint64_t(a.state.step));
    w.f64(a.state.beta1);
    w.f64(a.state.beta2);
    w.f64(a.state.eps);
    w.u32(std::uint32_t(a.state.m.size()));
    for (std::size_t i = 0; i < a.state.m.size(); ++i) {
      w.tensor(a.state.m[i]);
      w.tensor(a.state.v[i]);
    }
  }
  if (!w.os) throw IOError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IOError("checkpoint: '" + path.string() + "' has bad magic (not a PAGN0001 file)");
  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != kVersion)
    throw IOError("checkpoint: '" + path.string() + "' has unsupported version " +
                  std::to_string(ck.version));
  ck.config_json = r.str("config_json");
  ck.iteration = r.u64("iteration");
  ck.rng_state = r.str("rng_state");
  const std::uint32_t n_nets = r.u32("network_count");
  if (n_nets > 64) throw IOError("checkpoint: '" + path.string() + "' has bad network_count");
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    CheckpointNetwork net;
    net.name = r.str("network_name");
    net.spec = network_spec_from_json(r.str("network_spec"));
    const std::uint32_t n_params = r.u32("param_count");
    if (n_params > (1u << 20))
      throw IOError("checkpoint: '" + path.string() + "' has bad param_count");
    for (std::uint32_t p = 0; p < n_params; ++p) {
      const std::string name = r.str("param_name");
      const bool trainable = r.u8("param_trainable") != 0;
      net.params.add(name, r.tensor("param_data"), trainable);
    }
    ck.networks.push_back(std::move(net));
  }
  const std::uint32_t n_adam = r.u32("adam_count");
  if (n_adam > 64) throw IOError("checkpoint: '" + path.string() + "' has bad adam_count");
  for (std::uint32_t i = 0; i < n_adam; ++i) {
    AdamSnapshot a;
    a.network = r.str("adam_network");
    a.state.step = (long long)(r.u64("adam_step"));
    a.state.beta1 = float(r.f64("adam_beta1"));
    a.state.beta2 = float(r.f64("adam_beta2"));
    a.state.eps = float(r.f64("adam_eps"));
    const std::uint32_t n_slots = r.u32("adam_slot_count");
    if (n_slots > (1u << 20))
      throw IOError("checkpoint: '" + path.string() + "' has bad adam_slot_count");
    for (std::uint32_t s = 0; s < n_slots; ++s) {
      a.state.m.push_back(r.tensor("adam_m"));
      a.state.v.push_back(r.tensor("adam_v"));
    }
    ck.adam.push_back(std::move(a));
  }
  return ck;
}

}  // namespace pagn
