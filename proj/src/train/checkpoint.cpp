// SPDX-License-Identifier: Apache-2.0
#include "train/checkpoint.hpp"

#include <cstdio>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "octree/octree.hpp"

namespace ockm::train {

namespace {

void put_tensor(ByteWriter& w, const Tensor& t) {
  w.put<std::uint64_t>(t.rows);
  w.put<std::uint64_t>(t.cols);
  w.put_doubles(t.data);
}

Tensor get_tensor(ByteReader& r) {
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  std::vector<double> data = r.get_doubles();
  if (rows * cols != data.size()) throw FormatError("tensor block size does not match its shape");
  return Tensor(rows, cols, std::move(data));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const config::RunConfig& cfg, const model::Model& m,
                                            const TrainState& s) {
  const std::string text = config::dump_config(cfg);
  ByteWriter w;
  w.put_bytes("OCKM");
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint64_t>(config::fnv1a(text));
  w.put_string(text);
  w.put_string(octree::export_snapshot(m.tree()));
  w.put<std::int32_t>(m.active_depth());
  w.put<std::int32_t>(m.active_order());

  w.put<std::uint64_t>(s.step);
  w.put_doubles(s.ebar);
  w.put<double>(s.loss_ema);
  w.put<std::uint8_t>(s.ema_started ? 1 : 0);
  w.put_doubles(std::vector<double>(s.ema_history.begin(), s.ema_history.end()));
  w.put<std::uint64_t>(s.last_unlock);
  w.put<std::uint8_t>(s.next_unlock_depth ? 1 : 0);
  w.put_doubles(s.grad_accum);
  w.put<std::uint64_t>(s.grad_count);

  const auto& params = m.params().all();
  w.put<std::uint64_t>(params.size());
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>((p.trainable ? 1 : 0) | (p.per_gaussian ? 2 : 0)));
    put_tensor(w, p.value);
    put_tensor(w, p.adam_m);
    put_tensor(w, p.adam_v);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4) != "OCKM") throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto hash = r.get<std::uint64_t>();
  const std::string text = r.get_string();
  if (config::fnv1a(text) != hash) throw FormatError("checkpoint config hash mismatch");

  Checkpoint ck;
  try {
    ck.config = config::parse_config(text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  const model::ModelConfig mc = config::model_config(ck.config);
  octree::OctreeIndex tree = octree::parse_snapshot(r.get_string(), mc.bounds, mc.max_depth);
  const int depth = r.get<std::int32_t>();
  const int order = r.get<std::int32_t>();

  TrainState& s = ck.state;
  s.step = r.get<std::uint64_t>();
  s.ebar = r.get_doubles();
  s.loss_ema = r.get<double>();
  s.ema_started = r.get<std::uint8_t>() != 0;
  const auto hist = r.get_doubles();
  s.ema_history.assign(hist.begin(), hist.end());
  s.last_unlock = r.get<std::uint64_t>();
  s.next_unlock_depth = r.get<std::uint8_t>() != 0;
  s.grad_accum = r.get_doubles();
  s.grad_count = r.get<std::uint64_t>();

  model::ParamStore store;
  const std::size_t n = r.get_count(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = r.get_string();
    const auto flags = r.get<std::uint8_t>();
    Tensor value = get_tensor(r);
    Tensor am = get_tensor(r);
    Tensor av = get_tensor(r);
    if (!am.same_shape(value) || !av.same_shape(value)) throw FormatError("moment shape differs for " + name);
    const int idx = store.add(std::move(name), std::move(value), (flags & 1) != 0, (flags & 2) != 0);
    store[idx].adam_m = std::move(am);
    store[idx].adam_v = std::move(av);
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");

  ck.model = std::make_unique<model::Model>(mc, std::move(tree), std::move(store), depth, order);
  if (s.ebar.size() != static_cast<std::size_t>(mc.max_order) || s.grad_accum.size() != ck.model->gaussian_count())
    throw FormatError("training state does not match the model");
  return ck;
}

void save_checkpoint(const std::string& path, const config::RunConfig& cfg, const model::Model& m,
                     const TrainState& state) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, encode_checkpoint(cfg, m, state));
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place: " + path);
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace ockm::train
