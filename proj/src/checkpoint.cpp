#include "flowmap/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace flowmap {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  put_u64(os, std::bit_cast<std::uint64_t>(d));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_vec(std::ostream& os, const Vec& v) {
  put_u64(os, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v(i));
}

Vec get_vec(std::istream& is) {
  std::uint64_t n = get_u64(is);
  if (n > (std::uint64_t(1) << 32))
    throw ConfigError("checkpoint vector length implausible");
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(is);
  return v;
}

std::size_t param_count_for(const std::vector<int>& widths) {
  std::size_t n = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k)
    n += static_cast<std::size_t>(widths[k]) * widths[k + 1] + widths[k + 1];
  return n;
}

void validate(const Checkpoint& ck) {
  if (ck.dim < 1) throw ConfigError("checkpoint dim must be positive");
  if (ck.widths.size() < 2) throw ConfigError("checkpoint needs >= 1 layer");
  for (int w : ck.widths)
    if (w < 1) throw ConfigError("checkpoint layer width must be positive");
  if (ck.emb_freqs < 1) throw ConfigError("checkpoint needs >= 1 frequency");
  if (ck.num_classes < 0) throw ConfigError("checkpoint label count negative");
  int times = ck.kind == ModelKind::velocity ? 1 : 2;
  int want_in = times * 2 * ck.emb_freqs + ck.dim + ck.num_classes;
  if (ck.widths.front() != want_in || ck.widths.back() != ck.dim)
    throw ConfigError("checkpoint widths inconsistent with header");
  if (static_cast<std::size_t>(ck.params.size()) != param_count_for(ck.widths))
    throw ConfigError("checkpoint parameter count mismatch");
  if (ck.has_adam && (ck.adam.m.size() != ck.params.size() ||
                      ck.adam.v.size() != ck.params.size()))
    throw ConfigError("checkpoint optimizer state length mismatch");
}

}  // namespace

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "velocity") return ModelKind::velocity;
  if (name == "flow-map") return ModelKind::flow_map;
  throw ConfigError("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::velocity ? "velocity" : "flow-map";
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  validate(ck);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open checkpoint '" + path + "' to write");
  os.write(kMagic, 4);
  put_u32(os, kFormatVersion);
  put_u32(os, ck.kind == ModelKind::velocity ? 0 : 1);
  put_u32(os, static_cast<std::uint32_t>(ck.dim));
  put_u32(os, static_cast<std::uint32_t>(activation_id(ck.act)));
  put_u32(os, static_cast<std::uint32_t>(ck.emb_freqs));
  put_u32(os, static_cast<std::uint32_t>(ck.num_classes));
  put_u32(os, static_cast<std::uint32_t>(ck.widths.size()));
  for (int w : ck.widths) put_u32(os, static_cast<std::uint32_t>(w));
  put_u32(os, ck.has_adam ? 1 : 0);
  put_vec(os, ck.params);
  if (ck.has_adam) {
    put_u64(os, static_cast<std::uint64_t>(ck.adam.step));
    put_vec(os, ck.adam.m);
    put_vec(os, ck.adam.v);
  }
  if (!os) throw ConfigError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kMagic, 4))
    throw ConfigError("'" + path + "' is not a checkpoint file");
  if (get_u32(is) != kFormatVersion)
    throw ConfigError("unsupported checkpoint format version in '" + path +
                      "'");
  Checkpoint ck;
  ck.kind = get_u32(is) == 0 ? ModelKind::velocity : ModelKind::flow_map;
  ck.dim = static_cast<int>(get_u32(is));
  ck.act = activation_from_id(static_cast<int>(get_u32(is)));
  ck.emb_freqs = static_cast<int>(get_u32(is));
  ck.num_classes = static_cast<int>(get_u32(is));
  std::uint32_t nw = get_u32(is);
  if (nw < 2 || nw > 64) throw ConfigError("checkpoint width list corrupt");
  ck.widths.resize(nw);
  for (auto& w : ck.widths) w = static_cast<int>(get_u32(is));
  ck.has_adam = get_u32(is) != 0;
  ck.params = get_vec(is);
  if (ck.has_adam) {
    ck.adam.step = static_cast<long long>(get_u64(is));
    ck.adam.m = get_vec(is);
    ck.adam.v = get_vec(is);
  }
  if (!is) throw ConfigError("checkpoint '" + path + "' truncated");
  validate(ck);
  return ck;
}

namespace {

Checkpoint snapshot_common(ModelKind kind, int d, int num_classes,
                           const ad::EmbedSpec& emb, const MlpParams& mlp,
                           const AdamState* adam) {
  Checkpoint ck;
  ck.kind = kind;
  ck.dim = d;
  ck.widths = mlp.widths();
  ck.act = mlp.act;
  ck.emb_freqs = emb.freqs;
  ck.num_classes = num_classes;
  ck.params = mlp.flatten();
  if (adam) {
    ck.has_adam = true;
    ck.adam = *adam;
  }
  validate(ck);
  return ck;
}

}  // namespace

Checkpoint snapshot(const VelocityModel& m, const AdamState* adam) {
  return snapshot_common(ModelKind::velocity, m.d, m.num_classes, m.emb, m.mlp,
                         adam);
}

Checkpoint snapshot(const FlowMapModel& m, const AdamState* adam) {
  return snapshot_common(ModelKind::flow_map, m.d, m.num_classes, m.emb, m.mlp,
                         adam);
}

VelocityModel restore_velocity(const Checkpoint& ck) {
  if (ck.kind != ModelKind::velocity)
    throw ConfigError("checkpoint holds a " + to_string(ck.kind) +
                      " model, expected velocity");
  validate(ck);
  Rng rng(0);  // init values are overwritten below
  ad::EmbedSpec emb;
  emb.freqs = ck.emb_freqs;
  VelocityModel m = VelocityModel::init(ck.dim, ck.hidden(), ck.act, emb,
                                        ck.num_classes, rng);
  m.mlp.unflatten(ck.params);
  return m;
}

FlowMapModel restore_flow_map(const Checkpoint& ck) {
  if (ck.kind != ModelKind::flow_map)
    throw ConfigError("checkpoint holds a " + to_string(ck.kind) +
                      " model, expected flow-map");
  validate(ck);
  Rng rng(0);
  ad::EmbedSpec emb;
  emb.freqs = ck.emb_freqs;
  FlowMapModel m = FlowMapModel::init(ck.dim, ck.hidden(), ck.act, emb,
                                      ck.num_classes, rng);
  m.mlp.unflatten(ck.params);
  return m;
}

}  // namespace flowmap
