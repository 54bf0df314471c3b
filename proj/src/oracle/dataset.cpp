// SPDX-License-Identifier: Apache-2.0
#include "oracle/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "render/array.hpp"

namespace ockm::oracle {

namespace {

constexpr char kMagic[] = "OCKD";
constexpr std::uint16_t kVersion = 1;

bool same_frequency(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

Vec3 draw_point(Rng& rng, const Vec3& extent) {
  return {rng.uniform() * extent.x, rng.uniform() * extent.y, rng.uniform() * extent.z};
}

void put_vec(ByteWriter& w, const Vec3& v) {
  w.put(v.x);
  w.put(v.y);
  w.put(v.z);
}

Vec3 get_vec(ByteReader& r) {
  const double x = r.get<double>();
  const double y = r.get<double>();
  const double z = r.get<double>();
  return {x, y, z};
}

}  // namespace

bool Dataset::operator==(const Dataset& o) const {
  return V == o.V && Z == o.Z && array_rows == o.array_rows && array_cols == o.array_cols &&
         room.extent == o.room.extent && room.reflection == o.room.reflection && room.max_order == o.room.max_order &&
         samples == o.samples;
}

QuerySample make_sample(const Vec3& tx, const Vec3& rx, double frequency, const RoomSpec& room, int V, int Z,
                        int rows, int cols) {
  const TracedChannel ch = trace_channel(tx, rx, frequency, room, rows, cols);
  const double lambda = render::wavelength(frequency);
  QuerySample s;
  s.tx = tx;
  s.rx = rx;
  s.frequency = frequency;
  s.gain_db = render::gain_db(ch.total);
  for (const auto& h : ch.orders) s.order_gain_db.push_back(render::gain_db(h));
  const auto I = render::spectrum(ch.total, render::half_wave_array(rows, cols, lambda), lambda, V, Z);
  s.spectrum.assign(I.begin(), I.end());
  return s;
}

Dataset generate_dataset(const RoomSpec& room, const GenerateOptions& options) {
  room.validate();
  if (options.train_count < 0 || options.test_count < 0 || options.train_count + options.test_count < 1) {
    throw ConfigError("dataset needs at least one sample");
  }
  if (options.frequencies.empty()) throw ConfigError("dataset needs at least one frequency");
  Dataset ds;
  ds.V = options.V;
  ds.Z = options.Z;
  ds.array_rows = options.array_rows;
  ds.array_cols = options.array_cols;
  ds.room = room;
  const auto total = static_cast<std::size_t>(options.train_count + options.test_count);
  ds.samples.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const double f = options.frequencies[i % options.frequencies.size()];
    const double lambda = render::wavelength(f);
    Rng rng(mix_seed(options.seed, i));
    for (std::size_t draw = 0;; ++draw) {
      if (draw >= options.max_draws) {
        throw ConfigError("could not place transmitter and receiver one wavelength apart and from the walls");
      }
      const Vec3 tx = draw_point(rng, room.extent);
      const Vec3 rx = draw_point(rng, room.extent);
      if (room.wall_clearance(tx) < lambda || room.wall_clearance(rx) < lambda || norm(tx - rx) < lambda) continue;
      ds.samples[i] = make_sample(tx, rx, f, room, options.V, options.Z, options.array_rows, options.array_cols);
      break;
    }
    ds.samples[i].split = i < static_cast<std::size_t>(options.train_count) ? Split::Train : Split::Test;
  });
  return ds;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.V));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.Z));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.antennas()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.array_rows));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.array_cols));
  w.put<std::uint64_t>(ds.samples.size());
  put_vec(w, ds.room.extent);
  for (double g : ds.room.reflection) w.put(g);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.room.max_order));
  const std::size_t cells = static_cast<std::size_t>(ds.V) * static_cast<std::size_t>(ds.Z);
  const std::size_t orders = static_cast<std::size_t>(ds.room.max_order) + 1;
  for (const QuerySample& s : ds.samples) {
    if (s.spectrum.size() != cells || s.order_gain_db.size() != orders) {
      throw DimensionError("sample does not match the dataset grid or order count");
    }
    w.put(static_cast<std::uint8_t>(s.split));
    put_vec(w, s.tx);
    put_vec(w, s.rx);
    w.put(s.frequency);
    w.put(s.gain_db);
    for (double g : s.order_gain_db) w.put(g);
    for (float v : s.spectrum) w.put(v);
  }
  return w.bytes();
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.get_bytes(4) != std::string_view(kMagic, 4)) throw FormatError("not a dataset file");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.V = static_cast<int>(r.get<std::uint32_t>());
  ds.Z = static_cast<int>(r.get<std::uint32_t>());
  const auto na = r.get<std::uint32_t>();
  ds.array_rows = static_cast<int>(r.get<std::uint32_t>());
  ds.array_cols = static_cast<int>(r.get<std::uint32_t>());
  if (ds.V < 1 || ds.Z < 1 || static_cast<int>(na) != ds.antennas() || na == 0) {
    throw FormatError("corrupt dataset header");
  }
  const auto count = r.get<std::uint64_t>();
  ds.room.extent = get_vec(r);
  for (double& g : ds.room.reflection) g = r.get<double>();
  ds.room.max_order = static_cast<int>(r.get<std::uint32_t>());
  if (ds.room.max_order < 0 || ds.room.max_order > 64) throw FormatError("corrupt dataset header");
  const std::size_t cells = static_cast<std::size_t>(ds.V) * static_cast<std::size_t>(ds.Z);
  const std::size_t orders = static_cast<std::size_t>(ds.room.max_order) + 1;
  const std::size_t record = 1 + 8 * (8 + orders) + 4 * cells;
  if (count > r.remaining() / record || count * record != r.remaining()) {
    throw FormatError("dataset record count does not match the file size");
  }
  ds.samples.resize(static_cast<std::size_t>(count));
  for (QuerySample& s : ds.samples) {
    const auto split = r.get<std::uint8_t>();
    if (split > 1) throw FormatError("invalid split tag");
    s.split = static_cast<Split>(split);
    s.tx = get_vec(r);
    s.rx = get_vec(r);
    s.frequency = r.get<double>();
    s.gain_db = r.get<double>();
    s.order_gain_db.resize(orders);
    for (double& g : s.order_gain_db) g = r.get<double>();
    s.spectrum.resize(cells);
    for (float& v : s.spectrum) v = r.get<float>();
  }
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) { write_file(path, encode_dataset(ds)); }

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

void check_dimensions(const Dataset& ds, int V, int Z, int antennas) {
  if (ds.V != V || ds.Z != Z) {
    throw DimensionError("dataset grid " + std::to_string(ds.V) + "x" + std::to_string(ds.Z) +
                         " does not match configured " + std::to_string(V) + "x" + std::to_string(Z));
  }
  if (ds.antennas() != antennas) {
    throw DimensionError("dataset array has " + std::to_string(ds.antennas()) + " elements, configured " +
                         std::to_string(antennas));
  }
}

std::vector<const QuerySample*> select(const Dataset& ds, Split split) {
  std::vector<const QuerySample*> out;
  for (const auto& s : ds.samples)
    if (s.split == split) out.push_back(&s);
  return out;
}

FrequencySplit leave_one_frequency_out(const Dataset& ds, double holdout_hz) {
  FrequencySplit out;
  for (const auto& s : ds.samples) {
    if (same_frequency(s.frequency, holdout_hz))
      out.eval.push_back(&s);
    else if (s.split == Split::Train)
      out.train.push_back(&s);
  }
  if (out.eval.empty()) throw ConfigError("no samples at the held-out frequency");
  return out;
}

std::vector<double> distinct_frequencies(const Dataset& ds) {
  std::vector<double> out;
  for (const auto& s : ds.samples) {
    if (std::none_of(out.begin(), out.end(), [&](double f) { return same_frequency(f, s.frequency); }))
      out.push_back(s.frequency);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string metadata_csv(const Dataset& ds) {
  std::ostringstream os;
  os << "id,split,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,f_ghz,g_db\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    os << i << ',' << (s.split == Split::Train ? "train" : "test") << ',' << s.tx.x << ',' << s.tx.y << ',' << s.tx.z
       << ',' << s.rx.x << ',' << s.rx.y << ',' << s.rx.z << ',' << s.frequency / 1e9 << ',' << s.gain_db << '\n';
  }
  return os.str();
}

}  // namespace ockm::oracle
