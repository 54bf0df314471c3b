// SPDX-License-Identifier: Apache-2.0
#include "ockm/ockm.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "config/run_config.hpp"
#include "octree/octree.hpp"
#include "train/checkpoint.hpp"
#include "train/evaluate.hpp"

using namespace ockm;

struct ockm_config {
  config::RunConfig cfg;
};

struct ockm_dataset {
  oracle::Dataset ds;
};

struct ockm_session {
  config::RunConfig cfg;
  std::unique_ptr<model::Model> model;
  train::TrainState state;
  std::unique_ptr<train::Trainer> trainer;
};

struct ockm_render {
  std::vector<train::Component> parts;
  std::size_t v = 0, z = 0;
  bool inside = true;
};

namespace {

thread_local std::string g_error;

ockm_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Range: return OCKM_ERR_RANGE;
    case ErrorKind::Domain: return OCKM_ERR_DOMAIN;
    case ErrorKind::Topology: return OCKM_ERR_TOPOLOGY;
    case ErrorKind::Config: return OCKM_ERR_CONFIG;
    case ErrorKind::Format: return OCKM_ERR_FORMAT;
    case ErrorKind::Dimension: return OCKM_ERR_DIMENSION;
    case ErrorKind::Numeric: return OCKM_ERR_NUMERIC;
    case ErrorKind::Io: return OCKM_ERR_IO;
  }
  return OCKM_ERR_INTERNAL;
}

template <class Fn>
ockm_status guarded(Fn&& fn) {
  g_error.clear();
  try {
    fn();
    return OCKM_OK;
  } catch (const Error& e) {
    g_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown failure";
  }
  return OCKM_ERR_INTERNAL;
}

ockm_status invalid(const char* what) {
  g_error = what;
  return OCKM_ERR_INVALID_ARGUMENT;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::vector<const oracle::QuerySample*> at_frequency(const oracle::Dataset& ds, double holdout_ghz, bool train) {
  const auto freqs = oracle::distinct_frequencies(ds);
  double best = -1.0;
  for (double f : freqs)
    if (std::abs(f - holdout_ghz * 1e9) < 1e3) best = f;
  if (best < 0.0) throw RangeError("dataset has no samples at " + std::to_string(holdout_ghz) + " GHz");
  const auto split = oracle::leave_one_frequency_out(ds, best);
  return train ? split.train : split.eval;
}

void check_dims(const ockm_session& s, const oracle::Dataset& ds) {
  const auto& m = s.model->config();
  oracle::check_dimensions(ds, m.spectrum_v, m.spectrum_z, m.array_rows * m.array_cols);
}

}  // namespace

extern "C" {

const char* ockm_last_error(void) { return g_error.c_str(); }

const char* ockm_status_name(ockm_status s) {
  switch (s) {
    case OCKM_OK: return "ok";
    case OCKM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case OCKM_ERR_RANGE: return "range error";
    case OCKM_ERR_DOMAIN: return "domain error";
    case OCKM_ERR_TOPOLOGY: return "topology error";
    case OCKM_ERR_CONFIG: return "config error";
    case OCKM_ERR_FORMAT: return "format error";
    case OCKM_ERR_DIMENSION: return "dimension error";
    case OCKM_ERR_NUMERIC: return "numeric error";
    case OCKM_ERR_IO: return "io error";
    case OCKM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ockm_version(void) { return "0.1.0"; }

ockm_status ockm_set_threads(unsigned threads) {
  return guarded([&] { set_thread_cap(threads); });
}

void ockm_string_free(char* s) { std::free(s); }

ockm_status ockm_config_default(ockm_config** out) {
  if (!out) return invalid("null output");
  return guarded([&] { *out = new ockm_config{}; });
}

ockm_status ockm_config_load(const char* path, ockm_config** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] { *out = new ockm_config{config::load_config(path)}; });
}

ockm_status ockm_config_parse(const char* json_text, ockm_config** out) {
  if (!json_text || !out) return invalid("null argument");
  return guarded([&] { *out = new ockm_config{config::parse_config(json_text)}; });
}

ockm_status ockm_config_patch(ockm_config* cfg, const char* json_patch) {
  if (!cfg || !json_patch) return invalid("null argument");
  return guarded([&] {
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(json_patch);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("patch is not valid JSON: ") + e.what());
    }
    nlohmann::json j = config::to_json(cfg->cfg);
    j.merge_patch(patch);
    cfg->cfg = config::from_json(j);
  });
}

ockm_status ockm_config_dump(const ockm_config* cfg, char** json_out) {
  if (!cfg || !json_out) return invalid("null argument");
  return guarded([&] { *json_out = dup(config::dump_config(cfg->cfg)); });
}

ockm_status ockm_config_get_number(const ockm_config* cfg, const char* key, double* out) {
  if (!cfg || !key || !out) return invalid("null argument");
  return guarded([&] {
    const nlohmann::json j = config::to_json(cfg->cfg);
    const nlohmann::json* node = &j;
    std::string k(key);
    std::size_t start = 0;
    while (true) {
      const auto dot = k.find('.', start);
      const std::string part = k.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) throw ConfigError("no config key " + k);
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (!node->is_number()) throw ConfigError("config key " + k + " is not a number");
    *out = node->get<double>();
  });
}

void ockm_config_free(ockm_config* cfg) { delete cfg; }

ockm_status ockm_dataset_generate(const ockm_config* cfg, ockm_dataset** out) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] {
    *out = new ockm_dataset{oracle::generate_dataset(cfg->cfg.room, config::generate_options(cfg->cfg))};
  });
}

ockm_status ockm_dataset_read(const char* path, ockm_dataset** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] { *out = new ockm_dataset{oracle::read_dataset(path)}; });
}

ockm_status ockm_dataset_write(const ockm_dataset* ds, const char* path) {
  if (!ds || !path) return invalid("null argument");
  return guarded([&] { oracle::write_dataset(path, ds->ds); });
}

ockm_status ockm_dataset_summary(const ockm_dataset* ds, char** json_out) {
  if (!ds || !json_out) return invalid("null argument");
  return guarded([&] {
    nlohmann::json j;
    j["samples"] = ds->ds.samples.size();
    j["train"] = oracle::select(ds->ds, oracle::Split::Train).size();
    j["test"] = oracle::select(ds->ds, oracle::Split::Test).size();
    j["grid"] = {ds->ds.V, ds->ds.Z};
    j["antennas"] = ds->ds.antennas();
    std::vector<double> ghz;
    for (double f : oracle::distinct_frequencies(ds->ds)) ghz.push_back(f / 1e9);
    j["frequencies_ghz"] = ghz;
    *json_out = dup(j.dump());
  });
}

void ockm_dataset_free(ockm_dataset* ds) { delete ds; }

ockm_status ockm_session_create(const ockm_config* cfg, ockm_session** out) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] {
    auto s = std::make_unique<ockm_session>();
    s->cfg = cfg->cfg;
    s->model = std::make_unique<model::Model>(config::model_config(s->cfg));
    s->state = train::initial_state(*s->model);
    *out = s.release();
  });
}

ockm_status ockm_session_load(const char* checkpoint_path, ockm_session** out) {
  if (!checkpoint_path || !out) return invalid("null argument");
  return guarded([&] {
    train::Checkpoint ck = train::load_checkpoint(checkpoint_path);
    auto s = std::make_unique<ockm_session>();
    s->cfg = ck.config;
    s->model = std::move(ck.model);
    s->state = std::move(ck.state);
    *out = s.release();
  });
}

ockm_status ockm_session_save(const ockm_session* s, const char* checkpoint_path) {
  if (!s || !checkpoint_path) return invalid("null argument");
  return guarded([&] { train::save_checkpoint(checkpoint_path, s->cfg, *s->model, s->state); });
}

ockm_status ockm_session_config(const ockm_session* s, ockm_config** out) {
  if (!s || !out) return invalid("null argument");
  return guarded([&] { *out = new ockm_config{s->cfg}; });
}

ockm_status ockm_session_set_steps(ockm_session* s, int steps) {
  if (!s) return invalid("null session");
  return guarded([&] {
    config::RunConfig c = s->cfg;
    c.schedule.steps = steps;
    c.validate();
    s->cfg = c;
  });
}

void ockm_session_free(ockm_session* s) { delete s; }

ockm_status ockm_session_bind(ockm_session* s, const ockm_dataset* ds, double holdout_ghz) {
  if (!s || !ds) return invalid("null argument");
  return guarded([&] {
    check_dims(*s, ds->ds);
    auto train = holdout_ghz > 0.0 ? at_frequency(ds->ds, holdout_ghz, true)
                                   : oracle::select(ds->ds, oracle::Split::Train);
    s->trainer.reset();
    s->trainer = std::make_unique<train::Trainer>(*s->model, std::move(train), config::train_options(s->cfg), s->state);
  });
}

ockm_status ockm_session_step(ockm_session* s, char** record_json, int* done) {
  if (!s) return invalid("null session");
  if (!s->trainer) return invalid("no training data bound");
  return guarded([&] {
    const auto target = static_cast<std::uint64_t>(s->cfg.schedule.steps);
    if (s->state.step < target) {
      const train::StepRecord rec = s->trainer->step();
      s->state = s->trainer->state();
      if (record_json) *record_json = dup(train::to_json_line(rec));
    } else if (record_json) {
      *record_json = nullptr;
    }
    if (done) *done = s->state.step >= target ? 1 : 0;
  });
}

ockm_status ockm_session_step_count(const ockm_session* s, uint64_t* step) {
  if (!s || !step) return invalid("null argument");
  *step = s->state.step;
  return OCKM_OK;
}

ockm_status ockm_session_evaluate(const ockm_session* s, const ockm_dataset* ds, ockm_split split, double holdout_ghz,
                                  char** report_json) {
  if (!s || !ds || !report_json) return invalid("null argument");
  if (split != OCKM_SPLIT_TRAIN && split != OCKM_SPLIT_TEST && split != OCKM_SPLIT_ALL) return invalid("bad split");
  return guarded([&] {
    check_dims(*s, ds->ds);
    std::vector<const oracle::QuerySample*> samples;
    if (holdout_ghz > 0.0) {
      samples = at_frequency(ds->ds, holdout_ghz, false);
    } else if (split == OCKM_SPLIT_ALL) {
      for (const auto& q : ds->ds.samples) samples.push_back(&q);
    } else {
      samples = oracle::select(ds->ds, split == OCKM_SPLIT_TRAIN ? oracle::Split::Train : oracle::Split::Test);
    }
    if (samples.empty()) throw RangeError("no samples selected for evaluation");
    *report_json = dup(train::report_json(train::evaluate(*s->model, samples, s->cfg.loss.delta_d)));
  });
}

ockm_status ockm_session_info(const ockm_session* s, char** json_out) {
  if (!s || !json_out) return invalid("null argument");
  return guarded([&] {
    const auto& tree = s->model->tree();
    std::vector<std::size_t> per_depth(static_cast<std::size_t>(tree.max_depth()) + 1, 0);
    for (const auto& [key, gid] : tree.occupied()) ++per_depth[static_cast<std::size_t>(key.depth)];
    nlohmann::json j;
    j["gaussians"] = s->model->gaussian_count();
    j["occupied_leaves"] = tree.occupied().size();
    j["active_depth"] = s->model->active_depth();
    j["active_order"] = s->model->active_order();
    j["max_depth"] = tree.max_depth();
    j["step"] = s->state.step;
    j["leaves_per_depth"] = per_depth;
    *json_out = dup(j.dump());
  });
}

ockm_status ockm_session_snapshot(const ockm_session* s, char** text_out) {
  if (!s || !text_out) return invalid("null argument");
  return guarded([&] { *text_out = dup(octree::export_snapshot(s->model->tree())); });
}

ockm_status ockm_session_render(const ockm_session* s, const double tx[3], const double rx[3], double freq_ghz,
                                int orders, ockm_render** out) {
  if (!s || !tx || !rx || !out) return invalid("null argument");
  return guarded([&] {
    if (!(freq_ghz > 0.0) || !std::isfinite(freq_ghz)) throw DomainError("frequency must be positive");
    const render::Query q{{tx[0], tx[1], tx[2]}, {rx[0], rx[1], rx[2]}, freq_ghz * 1e9};
    const int n = orders < 0 ? s->model->active_order() : orders;
    auto r = std::make_unique<ockm_render>();
    r->parts = train::render_components(*s->model, q, n);
    r->v = static_cast<std::size_t>(s->model->config().spectrum_v);
    r->z = static_cast<std::size_t>(s->model->config().spectrum_z);
    const auto& room = s->cfg.room;
    r->inside = room.contains(q.tx) && room.contains(q.rx);
    *out = r.release();
  });
}

size_t ockm_render_count(const ockm_render* r) { return r ? r->parts.size() : 0; }

const char* ockm_render_name(const ockm_render* r, size_t i) {
  return r && i < r->parts.size() ? r->parts[i].name.c_str() : nullptr;
}

double ockm_render_gain_db(const ockm_render* r, size_t i) {
  return r && i < r->parts.size() ? r->parts[i].gain_db : std::nan("");
}

const double* ockm_render_spectrum(const ockm_render* r, size_t i, size_t* v, size_t* z) {
  if (!r || i >= r->parts.size()) return nullptr;
  if (v) *v = r->v;
  if (z) *z = r->z;
  return r->parts[i].spectrum.data();
}

int ockm_render_inside(const ockm_render* r) { return r && r->inside ? 1 : 0; }

void ockm_render_free(ockm_render* r) { delete r; }

}  // extern "C"
