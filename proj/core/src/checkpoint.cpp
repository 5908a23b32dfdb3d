#include "adbcr/checkpoint.hpp"

#include <type_traits>
#include <vector>

#include "adbcr/binary_io.hpp"
#include "adbcr/errors.hpp"

namespace adbcr {

namespace {

template <class M>
auto ordered_sets(M& model) {
  using Set = std::conditional_t<std::is_const_v<M>, const ParamSet, ParamSet>;
  std::vector<Set*> sets{&model.phi()};
  for (int t = 0; t < kNumArms; ++t) {
    for (int r = 0; r < model.architecture().heads_per_arm; ++r) sets.push_back(&model.head(t, r));
  }
  if (model.has_discriminator()) sets.push_back(&model.discriminator());
  return sets;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointMeta& meta) {
  const Architecture& arch = model.architecture();
  ByteWriter w;
  w.u64(arch.input_dim);
  w.f64(arch.dropout_p);
  w.u64(static_cast<std::uint64_t>(arch.heads_per_arm));
  w.u64(arch.discriminator_outputs);
  w.u64(arch.shared_layers.size());
  for (auto v : arch.shared_layers) w.u64(v);
  w.u64(arch.head_layers.size());
  for (auto v : arch.head_layers) w.u64(v);
  w.str(meta.config_fingerprint);
  w.str(meta.criterion);
  w.f64(meta.criterion_value);
  w.f64s(model.x_scaler.mean);
  w.f64s(model.x_scaler.scale);
  w.f64(model.y_scaler.mean);
  w.f64(model.y_scaler.scale);

  const auto sets = ordered_sets(model);
  std::uint64_t count = 0;
  for (const auto* set : sets) count += set->size();
  w.u64(count);
  for (const auto* set : sets) {
    for (const auto& p : *set) {
      w.str(p.name);
      w.tensor(p.value);
    }
  }
  write_container(path, CheckpointKind::network, w.bytes());
}

NetworkCheckpoint load_checkpoint(const std::filesystem::path& path) {
  ByteReader r = open_container(path, CheckpointKind::network);
  Architecture arch;
  arch.input_dim = r.u64();
  arch.dropout_p = r.f64();
  arch.heads_per_arm = static_cast<int>(r.u64());
  arch.discriminator_outputs = r.u64();
  const auto read_sizes = [&r] {
    const std::uint64_t n = r.u64();
    if (n > 1024) throw LoadError("checkpoint: implausible layer count");
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = r.u64();
    return v;
  };
  arch.shared_layers = read_sizes();
  arch.head_layers = read_sizes();

  NetworkCheckpoint ckpt;
  ckpt.meta.config_fingerprint = r.str();
  ckpt.meta.criterion = r.str();
  ckpt.meta.criterion_value = r.f64();

  try {
    ckpt.model = make_empty_model(arch);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint: invalid architecture: ") + e.what());
  }
  ckpt.model.x_scaler.mean = r.f64s();
  ckpt.model.x_scaler.scale = r.f64s();
  if (ckpt.model.x_scaler.mean.size() != arch.input_dim ||
      ckpt.model.x_scaler.scale.size() != arch.input_dim) {
    throw LoadError("checkpoint: scaler width does not match input_dim");
  }
  ckpt.model.y_scaler.mean = r.f64();
  ckpt.model.y_scaler.scale = r.f64();

  const std::uint64_t count = r.u64();
  auto sets = ordered_sets(ckpt.model);
  std::uint64_t expected = 0;
  for (auto* set : sets) expected += set->size();
  if (count != expected) throw LoadError("checkpoint: tensor count mismatch");
  for (auto* set : sets) {
    for (auto& p : *set) {
      const std::string name = r.str();
      Tensor value = r.tensor();
      if (name != p.name || !value.same_shape(p.value)) {
        throw LoadError("checkpoint: unexpected tensor " + name);
      }
      p.value = std::move(value);
    }
  }
  if (!r.at_end()) throw LoadError("checkpoint: trailing bytes");
  return ckpt;
}

}  // namespace adbcr
