// SPDX-License-Identifier: Apache-2.0
// Command-line driver over the C API.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ockm/ockm.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Failure {
  int code;
  std::string message;
};

int exit_code(ockm_status s) {
  switch (s) {
    case OCKM_OK: return kExitOk;
    case OCKM_ERR_INVALID_ARGUMENT:
    case OCKM_ERR_CONFIG: return kExitUsage;
    case OCKM_ERR_NUMERIC: return kExitNumeric;
    case OCKM_ERR_INTERNAL: return 1;
    default: return kExitData;
  }
}

void check(ockm_status s, const std::string& context) {
  if (s != OCKM_OK) throw Failure{exit_code(s), context + ": " + ockm_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { ockm_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

using Config = std::unique_ptr<ockm_config, decltype(&ockm_config_free)>;
using Dataset = std::unique_ptr<ockm_dataset, decltype(&ockm_dataset_free)>;
using Session = std::unique_ptr<ockm_session, decltype(&ockm_session_free)>;
using Render = std::unique_ptr<ockm_render, decltype(&ockm_render_free)>;

Config load_config(const std::string& path) {
  ockm_config* c = nullptr;
  if (path.empty())
    check(ockm_config_default(&c), "default config");
  else
    check(ockm_config_load(path.c_str(), &c), "config " + path);
  return Config(c, ockm_config_free);
}

Dataset read_dataset(const std::string& path) {
  ockm_dataset* d = nullptr;
  check(ockm_dataset_read(path.c_str(), &d), "dataset " + path);
  return Dataset(d, ockm_dataset_free);
}

Session load_session(const std::string& path) {
  ockm_session* s = nullptr;
  check(ockm_session_load(path.c_str(), &s), "checkpoint " + path);
  return Session(s, ockm_session_free);
}

// Flag overrides as a merge patch over the config.
struct Overrides {
  std::uint64_t seed = 0;
  int steps = -1;
  bool has_seed = false;

  void apply(ockm_config* cfg) const {
    std::ostringstream patch;
    patch << "{";
    bool first = true;
    if (has_seed) {
      patch << "\"seed\":" << seed;
      first = false;
    }
    if (steps >= 0) patch << (first ? "" : ",") << "\"schedule\":{\"steps\":" << steps << "}";
    patch << "}";
    check(ockm_config_patch(cfg, patch.str().c_str()), "config override");
  }
};

void apply_threads(int flag, const ockm_config* cfg) {
  int threads = flag;
  if (threads < 0) {
    double v = 1.0;
    if (cfg) check(ockm_config_get_number(cfg, "threads", &v), "threads");
    threads = static_cast<int>(v);
  }
  if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  check(ockm_set_threads(static_cast<unsigned>(threads)), "threads");
}

std::string config_of(const ockm_session* s) {
  ockm_config* c = nullptr;
  check(ockm_session_config(s, &c), "session config");
  Config cfg(c, ockm_config_free);
  CString text;
  check(ockm_config_dump(cfg.get(), &text.p), "config dump");
  return text.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Failure{kExitData, "cannot write " + path};
}

std::vector<double> parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kExitUsage, "bad coordinate list '" + s + "'"};
    }
  }
  if (v.size() != 3) throw Failure{kExitUsage, "expected x,y,z but got '" + s + "'"};
  return v;
}

int cmd_gen_data(const std::string& config_path, const std::string& out, const Overrides& ov, int threads) {
  Config cfg = load_config(config_path);
  ov.apply(cfg.get());
  apply_threads(threads, cfg.get());
  ockm_dataset* d = nullptr;
  check(ockm_dataset_generate(cfg.get(), &d), "generate");
  Dataset ds(d, ockm_dataset_free);
  check(ockm_dataset_write(ds.get(), out.c_str()), "write " + out);
  CString summary;
  check(ockm_dataset_summary(ds.get(), &summary.p), "summary");
  std::cout << summary.str() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config, data, out_ckpt, log, resume;
  double holdout_ghz = 0.0;
};

int cmd_train(const TrainArgs& a, const Overrides& ov, int threads) {
  Session session(nullptr, ockm_session_free);
  if (!a.resume.empty()) {
    if (ov.has_seed) throw Failure{kExitUsage, "--seed cannot change a resumed run"};
    session = load_session(a.resume);
    if (ov.steps >= 0) check(ockm_session_set_steps(session.get(), ov.steps), "steps");
    ockm_config* c = nullptr;
    check(ockm_session_config(session.get(), &c), "session config");
    Config cfg(c, ockm_config_free);
    apply_threads(threads, cfg.get());
  } else {
    if (a.config.empty()) throw Failure{kExitUsage, "train needs --config or --resume"};
    Config cfg = load_config(a.config);
    ov.apply(cfg.get());
    apply_threads(threads, cfg.get());
    ockm_session* s = nullptr;
    check(ockm_session_create(cfg.get(), &s), "create model");
    session.reset(s);
  }
  Dataset ds = read_dataset(a.data);
  check(ockm_session_bind(session.get(), ds.get(), a.holdout_ghz), "bind data");

  int eval_every = 0;
  {
    ockm_config* c = nullptr;
    check(ockm_session_config(session.get(), &c), "session config");
    Config cfg(c, ockm_config_free);
    double v = 0.0;
    check(ockm_config_get_number(cfg.get(), "schedule.eval_every", &v), "eval_every");
    eval_every = static_cast<int>(v);
  }

  std::ofstream log(a.log, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw Failure{kExitData, "cannot open log " + a.log};
  std::size_t unlocks = 0;
  std::string last;
  for (;;) {
    CString rec;
    int done = 0;
    const ockm_status st = ockm_session_step(session.get(), &rec.p, &done);
    if (st != OCKM_OK) {
      const std::string msg = ockm_last_error();
      // The session still holds the last good state.
      check(ockm_session_save(session.get(), a.out_ckpt.c_str()), "save " + a.out_ckpt);
      log.flush();
      throw Failure{exit_code(st), "training aborted: " + msg + " (last good checkpoint written to " + a.out_ckpt + ")"};
    }
    if (rec.p) {
      last = rec.str();
      log << last << "\n";
      if (last.find("\"unlock ") != std::string::npos) ++unlocks;
      std::uint64_t step = 0;
      check(ockm_session_step_count(session.get(), &step), "step");
      if (eval_every > 0 && step % static_cast<std::uint64_t>(eval_every) == 0) {
        CString report;
        const ockm_split split = a.holdout_ghz > 0.0 ? OCKM_SPLIT_ALL : OCKM_SPLIT_TEST;
        if (ockm_session_evaluate(session.get(), ds.get(), split, a.holdout_ghz, &report.p) == OCKM_OK) {
          std::string compact = report.str();
          compact.erase(std::remove(compact.begin(), compact.end(), '\n'), compact.end());
          log << "{\"step\":" << step << ",\"eval\":" << compact << "}\n";
        }
      }
    }
    if (done) break;
  }
  check(ockm_session_save(session.get(), a.out_ckpt.c_str()), "save " + a.out_ckpt);
  std::uint64_t step = 0;
  check(ockm_session_step_count(session.get(), &step), "step");
  std::cout << "step " << step << ", unlock events " << unlocks << ", checkpoint " << a.out_ckpt << "\n";
  if (!last.empty()) std::cout << last << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& report_path,
             const std::string& split, double holdout_ghz, int threads) {
  Session s = load_session(ckpt);
  apply_threads(threads, nullptr);
  Dataset ds = read_dataset(data);
  const ockm_split sp = split == "train" ? OCKM_SPLIT_TRAIN : split == "all" ? OCKM_SPLIT_ALL : OCKM_SPLIT_TEST;
  CString report;
  check(ockm_session_evaluate(s.get(), ds.get(), sp, holdout_ghz, &report.p), "evaluate");
  if (!report_path.empty()) write_text(report_path, report.str() + "\n");
  std::cout << report.str() << "\n";
  return kExitOk;
}

int cmd_render(const std::string& ckpt, const std::string& tx_s, const std::string& rx_s, double freq_ghz,
               const std::string& orders_s, const std::string& prefix, int threads) {
  Session s = load_session(ckpt);
  apply_threads(threads, nullptr);
  const auto tx = parse_point(tx_s), rx = parse_point(rx_s);
  int orders = -1;
  if (orders_s == "los") {
    orders = 0;
  } else if (orders_s != "all") {
    try {
      std::size_t used = 0;
      orders = std::stoi(orders_s, &used);
      if (used != orders_s.size() || orders < 0) throw std::invalid_argument(orders_s);
    } catch (const std::exception&) {
      throw Failure{kExitUsage, "--orders takes los, all or a count"};
    }
  }
  ockm_render* r = nullptr;
  check(ockm_session_render(s.get(), tx.data(), rx.data(), freq_ghz, orders, &r), "render");
  Render out(r, ockm_render_free);
  if (!ockm_render_inside(out.get())) std::cerr << "warning: Tx or Rx lies outside the scene bounds\n";

  for (std::size_t i = 0; i < ockm_render_count(out.get()); ++i) {
    const std::string name = ockm_render_name(out.get(), i);
    std::size_t v = 0, z = 0;
    const double* spec = ockm_render_spectrum(out.get(), i, &v, &z);
    std::ostringstream csv, pgm;
    csv.precision(17);
    pgm << "P2\n" << z << " " << v << "\n255\n";
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = 0; b < z; ++b) {
        const double p = spec[a * z + b];
        const double db = std::clamp(10.0 * std::log10(p + 1e-12), -150.0, 0.0);
        csv << (b ? "," : "") << p;
        pgm << (b ? " " : "") << static_cast<int>(std::lround((db + 150.0) / 150.0 * 255.0));
      }
      csv << "\n";
      pgm << "\n";
    }
    write_text(prefix + "_" + name + ".csv", csv.str());
    write_text(prefix + "_" + name + ".pgm", pgm.str());
    std::printf("%-8s g_dB = %.12f\n", name.c_str(), ockm_render_gain_db(out.get(), i));
  }
  return kExitOk;
}

int cmd_inspect(const std::string& ckpt, const std::string& out_path) {
  Session s = load_session(ckpt);
  CString snap, info;
  check(ockm_session_snapshot(s.get(), &snap.p), "snapshot");
  check(ockm_session_info(s.get(), &info.p), "info");
  if (!out_path.empty()) write_text(out_path, snap.str());
  else std::cout << snap.str();
  std::cout << "# " << info.str() << "\n";
  return kExitOk;
}

int cmd_print_config(const std::string& config_path, const std::string& ckpt, const Overrides& ov) {
  std::string text;
  if (!ckpt.empty()) {
    Session s = load_session(ckpt);
    text = config_of(s.get());
  } else {
    Config cfg = load_config(config_path);
    ov.apply(cfg.get());
    CString t;
    check(ockm_config_dump(cfg.get(), &t.p), "config dump");
    text = t.str();
  }
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"channel-knowledge maps from octree-anchored Gaussians"};
  app.require_subcommand(1);
  int threads = -1;
  Overrides ov;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--threads", threads, "worker thread cap (1 = bitwise reproducible, 0 = all cores)")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { ov.seed = v; ov.has_seed = true; },
                                          "override the config seed");
  };

  std::string config_path, out, data, ckpt, report, split = "test", tx, rx, orders = "all", prefix, dump_out;
  double freq = 0.0, holdout = 0.0;

  auto* gen = app.add_subcommand("gen-data", "generate an oracle dataset");
  gen->add_option("--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "dataset file")->required();
  add_seed(gen);
  add_common(gen);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", ta.config, "run config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--data", ta.data, "dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--out-ckpt", ta.out_ckpt, "checkpoint to write")->required();
  tr->add_option("--log", ta.log, "metrics log (one JSON record per line)")->required();
  tr->add_option("--resume", ta.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--steps", ov.steps, "total step target")->check(CLI::NonNegativeNumber);
  tr->add_option("--holdout-ghz", ta.holdout_ghz, "exclude this carrier from training");
  add_seed(tr);
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", report, "report file (JSON)");
  ev->add_option("--split", split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  ev->add_option("--holdout-ghz", holdout, "evaluate every sample at this carrier");
  add_common(ev);

  auto* rd = app.add_subcommand("render", "render one query");
  rd->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  rd->add_option("--tx", tx, "x,y,z")->required();
  rd->add_option("--rx", rx, "x,y,z")->required();
  rd->add_option("--freq", freq, "carrier in GHz")->required()->check(CLI::PositiveNumber);
  rd->add_option("--orders", orders, "los, all or an order count");
  rd->add_option("--out-prefix", prefix, "output file prefix")->required();
  add_common(rd);

  auto* io = app.add_subcommand("inspect-octree", "dump the octree of a checkpoint");
  io->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  io->add_option("--out", dump_out, "write the node dump here instead of stdout");

  auto* pc = app.add_subcommand("print-config", "print the effective config");
  pc->add_option("--config", config_path, "run config (JSON); defaults when absent")->check(CLI::ExistingFile);
  pc->add_option("--ckpt", ckpt, "config stored in a checkpoint")->check(CLI::ExistingFile);
  pc->add_option("--steps", ov.steps, "override schedule.steps")->check(CLI::NonNegativeNumber);
  add_seed(pc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(config_path, out, ov, threads);
    if (*tr) return cmd_train(ta, ov, threads);
    if (*ev) return cmd_eval(ckpt, data, report, split, holdout, threads);
    if (*rd) return cmd_render(ckpt, tx, rx, freq, orders, prefix, threads);
    if (*io) return cmd_inspect(ckpt, dump_out);
    if (*pc) return cmd_print_config(config_path, ckpt, ov);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
