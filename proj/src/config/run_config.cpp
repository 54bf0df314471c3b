// SPDX-License-Identifier: Apache-2.0
#include "config/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace ockm::config {

using nlohmann::json;

namespace {

// Reads one JSON object; keys not consumed by finish() are rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>)
          if (it->is_number_integer() && !it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  template <class T, std::size_t N>
  void get_array(const char* key, std::array<T, N>& out) {
    std::vector<T> v(out.begin(), out.end());
    get(key, v);
    if (v.size() != N) throw ConfigError(path_ + "." + key + " needs " + std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), out.begin());
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + path_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_room(Section s, oracle::RoomSpec& r) {
  std::array<double, 3> e{r.extent.x, r.extent.y, r.extent.z};
  s.get_array("extent", e);
  r.extent = {e[0], e[1], e[2]};
  s.get_array("reflection", r.reflection);
  s.get("max_order", r.max_order);
  s.finish();
}

void read_data(Section s, DataSection& d) {
  s.get("frequencies_ghz", d.frequencies_ghz);
  s.get("train", d.train);
  s.get("test", d.test);
  s.get("grid_v", d.grid_v);
  s.get("grid_z", d.grid_z);
  s.get("array_rows", d.array_rows);
  s.get("array_cols", d.array_cols);
  s.get("max_draws", d.max_draws);
  s.finish();
}

void read_model(Section s, ModelSection& m) {
  s.get("start_depth", m.start_depth);
  s.get("max_depth", m.max_depth);
  s.get("start_order", m.start_order);
  s.get("max_order", m.max_order);
  s.get("feature_dim", m.feature_dim);
  s.get("heads", m.heads);
  s.get("hidden", m.hidden);
  s.get("mlp_width", m.mlp_width);
  s.get("mlp_blocks", m.mlp_blocks);
  s.get("directions", m.directions);
  s.get("init_opacity_raw", m.init_opacity_raw);
  s.get("init_scale_fraction", m.init_scale_fraction);
  s.get("feature_init_std", m.feature_init_std);
  s.get("output_gain", m.output_gain);
  s.finish();
}

void read_loss(Section s, train::LossWeights& w) {
  s.get("spectrum", w.spectrum);
  s.get("mae", w.mae);
  s.get("ssim", w.ssim);
  s.get("causal", w.causal);
  s.get("decay", w.decay);
  s.get("huber_delta_db", w.huber_delta);
  s.get("delta_d", w.delta_d);
  s.get("xi", w.xi);
  s.get("epsilon", w.epsilon);
  s.get("rho", w.rho);
  s.get("energy_ema", w.energy_ema);
  s.finish();
}

void read_optimizer(Section s, train::AdamOptions& a) {
  s.get("lr", a.lr);
  s.get("beta1", a.beta1);
  s.get("beta2", a.beta2);
  s.get("epsilon", a.epsilon);
  s.finish();
}

void read_schedule(Section s, ScheduleSection& c) {
  s.get("steps", c.steps);
  s.get("batch", c.batch);
  s.get("plateau_window", c.plateau_window);
  s.get("plateau_rel", c.plateau_rel);
  s.get("min_gap", c.min_gap);
  s.get("loss_ema", c.loss_ema);
  s.get("maintenance_every", c.maintenance_every);
  s.get("prune_threshold", c.prune_threshold);
  s.get("grad_percentile", c.grad_percentile);
  s.get("max_gaussians", c.max_gaussians);
  s.get("eval_every", c.eval_every);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  room.validate();
  if (data.frequencies_ghz.empty()) throw ConfigError("data.frequencies_ghz is empty");
  for (double f : data.frequencies_ghz)
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("frequencies must be positive");
  if (data.train < 1 || data.test < 0) throw ConfigError("data.train must be positive, data.test nonnegative");
  if (data.max_draws < 1) throw ConfigError("data.max_draws must be positive");
  if (schedule.eval_every < 0) throw ConfigError("schedule.eval_every must be nonnegative");
  model_config(*this).validate();
  train_options(*this).validate();
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section root(j, "config");
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  read_room(root.child("room"), c.room);
  read_data(root.child("data"), c.data);
  read_model(root.child("model"), c.model);
  read_loss(root.child("loss"), c.loss);
  read_optimizer(root.child("optimizer"), c.optimizer);
  read_schedule(root.child("schedule"), c.schedule);
  root.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["room"] = {{"extent", {c.room.extent.x, c.room.extent.y, c.room.extent.z}},
               {"reflection", c.room.reflection},
               {"max_order", c.room.max_order}};
  const auto& d = c.data;
  j["data"] = {{"frequencies_ghz", d.frequencies_ghz},
               {"train", d.train},
               {"test", d.test},
               {"grid_v", d.grid_v},
               {"grid_z", d.grid_z},
               {"array_rows", d.array_rows},
               {"array_cols", d.array_cols},
               {"max_draws", d.max_draws}};
  const auto& m = c.model;
  j["model"] = {{"start_depth", m.start_depth},
                {"max_depth", m.max_depth},
                {"start_order", m.start_order},
                {"max_order", m.max_order},
                {"feature_dim", m.feature_dim},
                {"heads", m.heads},
                {"hidden", m.hidden},
                {"mlp_width", m.mlp_width},
                {"mlp_blocks", m.mlp_blocks},
                {"directions", m.directions},
                {"init_opacity_raw", m.init_opacity_raw},
                {"init_scale_fraction", m.init_scale_fraction},
                {"feature_init_std", m.feature_init_std},
                {"output_gain", m.output_gain}};
  const auto& w = c.loss;
  j["loss"] = {{"spectrum", w.spectrum}, {"mae", w.mae},     {"ssim", w.ssim},
               {"causal", w.causal},     {"decay", w.decay}, {"huber_delta_db", w.huber_delta},
               {"delta_d", w.delta_d},   {"xi", w.xi},       {"epsilon", w.epsilon},
               {"rho", w.rho},           {"energy_ema", w.energy_ema}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  const auto& s = c.schedule;
  j["schedule"] = {{"steps", s.steps},
                   {"batch", s.batch},
                   {"plateau_window", s.plateau_window},
                   {"plateau_rel", s.plateau_rel},
                   {"min_gap", s.min_gap},
                   {"loss_ema", s.loss_ema},
                   {"maintenance_every", s.maintenance_every},
                   {"prune_threshold", s.prune_threshold},
                   {"grad_percentile", s.grad_percentile},
                   {"max_gaussians", s.max_gaussians},
                   {"eval_every", s.eval_every}};
  return j;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

RunConfig load_config(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

model::ModelConfig model_config(const RunConfig& c) {
  model::ModelConfig m;
  const Vec3& e = c.room.extent;
  m.bounds = {{0.0, 0.0, 0.0}, std::max({e.x, e.y, e.z})};
  m.scene_extent = e;
  m.start_depth = c.model.start_depth;
  m.max_depth = c.model.max_depth;
  m.start_order = c.model.start_order;
  m.max_order = c.model.max_order;
  m.feature_dim = c.model.feature_dim;
  m.heads = c.model.heads;
  m.hidden = c.model.hidden;
  m.mlp_width = c.model.mlp_width;
  m.mlp_blocks = c.model.mlp_blocks;
  m.directions = c.model.directions;
  m.spectrum_v = c.data.grid_v;
  m.spectrum_z = c.data.grid_z;
  m.array_rows = c.data.array_rows;
  m.array_cols = c.data.array_cols;
  m.init_opacity_raw = c.model.init_opacity_raw;
  m.init_scale_fraction = c.model.init_scale_fraction;
  m.feature_init_std = c.model.feature_init_std;
  m.output_gain = c.model.output_gain;
  m.seed = c.seed;
  return m;
}

oracle::GenerateOptions generate_options(const RunConfig& c) {
  oracle::GenerateOptions g;
  g.train_count = c.data.train;
  g.test_count = c.data.test;
  g.frequencies.clear();
  for (double f : c.data.frequencies_ghz) g.frequencies.push_back(f * 1e9);
  g.seed = c.seed;
  g.V = c.data.grid_v;
  g.Z = c.data.grid_z;
  g.array_rows = c.data.array_rows;
  g.array_cols = c.data.array_cols;
  g.max_draws = c.data.max_draws;
  return g;
}

train::TrainOptions train_options(const RunConfig& c) {
  train::TrainOptions t;
  t.steps = c.schedule.steps;
  t.batch = c.schedule.batch;
  t.loss = c.loss;
  t.adam = c.optimizer;
  t.schedule.plateau_window = c.schedule.plateau_window;
  t.schedule.plateau_rel = c.schedule.plateau_rel;
  t.schedule.min_gap = c.schedule.min_gap;
  t.schedule.loss_ema = c.schedule.loss_ema;
  t.maintenance_every = c.schedule.maintenance_every;
  t.maintenance.prune_threshold = c.schedule.prune_threshold;
  t.maintenance.grad_percentile = c.schedule.grad_percentile;
  t.maintenance.max_gaussians = c.schedule.max_gaussians;
  t.seed = c.seed;
  return t;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ockm::config
