// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "autodiff/grad_check.hpp"
#include "common/error.hpp"
#include "config/run_config.hpp"
#include "support/reference.hpp"
#include "train/checkpoint.hpp"
#include "train/evaluate.hpp"
#include "train/trainer.hpp"

using namespace ockm;
using namespace ockm::train;
using ad::Tensor;

namespace {

Tensor random_image(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (auto& x : t.data) x = rng.uniform(0.0, 1.0);
  return t;
}

config::RunConfig small_run_config() {
  config::RunConfig c;
  c.room.extent = {2.0, 2.0, 1.0};
  c.room.max_order = 2;
  c.data.train = 8;
  c.data.test = 3;
  c.data.grid_v = 4;
  c.data.grid_z = 6;
  c.data.array_rows = 2;
  c.data.array_cols = 2;
  c.model.start_depth = 1;
  c.model.max_depth = 2;
  c.model.feature_dim = 8;
  c.model.hidden = 6;
  c.model.mlp_width = 8;
  c.model.mlp_blocks = 1;
  c.model.directions = 8;
  c.schedule.batch = 2;
  c.schedule.maintenance_every = 3;
  c.schedule.plateau_window = 2;
  c.schedule.min_gap = 2;
  c.schedule.plateau_rel = 0.5;
  c.validate();
  return c;
}

const oracle::Dataset& small_dataset() {
  static const oracle::Dataset ds = [] {
    const auto c = small_run_config();
    return oracle::generate_dataset(c.room, config::generate_options(c));
  }();
  return ds;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) && std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("huber on dB differences") {
  ad::Tape tape;
  const Tensor target(2, 1, 1.0);
  for (auto [db, expect] : {std::pair{1.0, 0.5}, std::pair{3.0, 2.5}}) {
    const double p = std::pow(10.0, db / 10.0);
    CHECK(spectrum_huber(tape.constant(Tensor(2, 1, p)), target, 1.0).item() == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("mae and nmae") {
  CHECK(mean_abs_error({-50, -60}, {-51, -63}) == 2.0);
  const std::vector<double> t{-40, -60};
  CHECK(std::abs(nmae(2.0, t) - 2.0 / 50.0) < 1e-15);
  CHECK_THROWS_AS(mean_abs_error({}, {}), DimensionError);
}

TEST_CASE("ssim of identical images is exactly one") {
  Rng rng(3);
  for (auto [r, c] : {std::pair{32, 32}, std::pair{18, 36}, std::pair{4, 6}}) {
    const Tensor x = random_image(rng, r, c);
    CHECK(ssim(x, x) == 1.0);
  }
}

TEST_CASE("ssim matches a direct windowed reference") {
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto [r, c] = i % 2 == 0 ? std::pair{32, 32} : std::pair{18, 36};
    const Tensor x = random_image(rng, r, c);
    Tensor y = x;
    for (auto& v : y.data) v = std::clamp(v + rng.normal(0.0, 0.2), 0.0, 1.0);
    worst = std::max(worst, std::abs(ssim(x, y) - testref::ssim(x, y)));
  }
  CHECK(worst < 1e-9);
  const Tensor a = random_image(rng, 4, 6), b = random_image(rng, 4, 6);
  CHECK(std::abs(ssim(a, b) - testref::ssim(a, b)) < 1e-12);
}

TEST_CASE("spectrum image clips to the dB range") {
  const Tensor p(1, 3, std::vector<double>{1e-20, 1e-5, 10.0});
  const Tensor img = spectrum_image(p, 1, 3);
  CHECK(img[0] == doctest::Approx(30.0 / 150.0).epsilon(1e-9));  // the 1e-12 floor is -120 dB
  CHECK(img[1] == doctest::Approx(100.0 / 150.0).epsilon(1e-6));
  CHECK(spectrum_image(Tensor(1, 1, 0.0), 1, 1)[0] >= 0.0);
  CHECK(img[2] == 1.0);
}

TEST_CASE("causal and decay hand cases") {
  ad::Tape tape;
  const Var causal = causal_loss({tape.constant(1.0), tape.constant(1.1)}, 0.3);
  CHECK(std::abs(causal.item() - 0.2) < 1e-12);
  CHECK(causal_loss({tape.constant(1.0), tape.constant(1.5)}, 0.3).item() == 0.0);

  const std::vector<double> ebar{0.0, 0.0};
  const Var decay = decay_loss({tape.constant(1.0), tape.constant(1.0)}, ebar, 0.1, LossWeights{}.epsilon, 0.8);
  CHECK(std::abs(decay.item() - 0.2) < 1e-9);
  CHECK(decay_loss({tape.constant(1.0), tape.constant(0.5)}, ebar, 0.1, 1e-15, 0.9).item() == 0.0);
  // Reference floor: xi * ebar replaces a vanishing previous energy.
  const Var floored = decay_loss({tape.constant(0.0), tape.constant(1.0)}, {10.0, 0.0}, 0.1, 1e-15, 0.5);
  CHECK(std::abs(floored.item() - 0.5) < 1e-12);
}

TEST_CASE("adam steps") {
  model::ParamStore store;
  const int i = store.add("w", Tensor(1, 2, std::vector<double>{1.0, -2.0}));
  auto& p = store[i];
  p.adam_m = Tensor(1, 2, 0.5);
  p.grad = Tensor(1, 2, 0.0);
  AdamOptions o;
  REQUIRE(adam_step(store, 3, o));
  CHECK(p.adam_m[0] == 0.45);
  CHECK(p.value[1] != -2.0);  // leftover momentum still moves it

  model::ParamStore fresh;
  const int j = fresh.add("w", Tensor(1, 2, std::vector<double>{1.0, -2.0}));
  fresh[j].grad = Tensor(1, 2, std::vector<double>{3.0, -0.01});
  REQUIRE(adam_step(fresh, 1, o));
  CHECK(fresh[j].value[0] == doctest::Approx(1.0 - o.lr).epsilon(1e-9));
  CHECK(fresh[j].value[1] == doctest::Approx(-2.0 + o.lr).epsilon(1e-5));

  fresh[j].grad[0] = std::nan("");
  const Tensor before = fresh[j].value;
  CHECK_FALSE(adam_step(fresh, 2, o));
  CHECK(same_bits(before, fresh[j].value));
  CHECK_THROWS_AS(adam_step(fresh, 0, o), RangeError);
}

TEST_CASE("plateau detection and unlock alternation") {
  ScheduleOptions o;
  std::deque<double> flat(201, 5.0), falling;
  for (int i = 0; i <= 200; ++i) falling.push_back(5.0 - 0.01 * i);
  CHECK(plateaued(flat, o));
  CHECK_FALSE(plateaued(falling, o));
  CHECK_FALSE(plateaued(std::deque<double>(200, 5.0), o));

  model::Model m(config::model_config(small_run_config()));
  REQUIRE(m.active_order() == 1);
  REQUIRE(m.active_depth() == 1);
  TrainState s = initial_state(m);
  s.step = 250;
  s.ema_history = flat;
  CHECK(unlock_schedule(s, m, o) == "unlock order 2");
  CHECK(s.ema_history.empty());
  s.ema_history = flat;
  s.step = 300;
  CHECK(unlock_schedule(s, m, o).empty());  // min gap
  s.step = 450;
  CHECK(unlock_schedule(s, m, o) == "unlock depth 2");
  s.ema_history = flat;
  s.step = 650;
  CHECK(unlock_schedule(s, m, o) == "unlock order 3");
  for (int k = 0; k < 5; ++k) {
    s.ema_history = flat;
    s.step += 1000;
    CHECK(unlock_schedule(s, m, o).empty());
  }
  CHECK(m.active_order() == 3);
  CHECK(m.active_depth() == 2);
}

TEST_CASE("batch loss breakdown sums to the total") {
  const auto& ds = small_dataset();
  model::Model m(config::model_config(small_run_config()));
  m.set_active_order(3);
  Rng rng(5);
  for (int n = 1; n <= 3; ++n) {
    auto& w = m.params()[m.signal_params(n).w_out].value;
    for (auto& x : w.data) x = rng.normal(0.0, 0.5);
  }
  LossWeights w;
  w.delta_d = 1.0;
  w.rho = 1e-3;
  ad::Tape tape;
  const auto bound = model::bind(tape, m.params());
  const auto prep = m.prepare(tape, bound, 3);
  const auto batch = oracle::select(ds, oracle::Split::Train);
  const BatchResult r = batch_loss(m, bound, prep, batch, w, std::vector<double>(3, 0.0));
  const auto& p = r.parts;
  for (double t : {p.huber, p.mae, p.ssim, p.causal, p.decay}) CHECK(t >= 0.0);
  CHECK(p.causal > 0.0);
  CHECK(p.decay > 0.0);
  const double sum = w.spectrum * p.huber + w.mae * p.mae + w.ssim * (1.0 - p.ssim) + w.causal * p.causal +
                     w.decay * p.decay;
  CHECK(std::abs(sum - p.total) < 1e-12);
}

TEST_CASE("full loss gradients") {
  const auto& ds = small_dataset();
  model::Model m(config::model_config(small_run_config()));
  m.set_active_order(3);
  Rng rng(9);
  for (int n = 1; n <= 3; ++n) {
    auto& w = m.params()[m.signal_params(n).w_out].value;
    for (auto& x : w.data) x = rng.normal(0.0, 0.5);
  }
  for (auto& x : m.params().at(model::kOffset).value.data) x = rng.normal(0.0, 0.05);
  LossWeights w;
  w.delta_d = 1.0;
  w.rho = 1e-3;
  const auto train = oracle::select(ds, oracle::Split::Train);
  const std::vector<const oracle::QuerySample*> batch(train.begin(), train.begin() + 3);
  double parts_causal = 0.0, parts_decay = 0.0;
  auto fn = [&](bool with_grad) {
    ad::Tape tape;
    const auto b = model::bind(tape, m.params());
    const auto prep = m.prepare(tape, b, 3);
    const BatchResult r = batch_loss(m, b, prep, batch, w, {1e-9, 1e-9, 1e-9});
    if (with_grad) {
      parts_causal = r.parts.causal;
      parts_decay = r.parts.decay;
      tape.backward(r.total);
      model::collect_grads(tape, b, m.params());
    }
    return r.parts.total;
  };
  std::vector<ad::GradParam> params;
  for (auto& p : m.params().all())
    if (p.trainable) params.push_back({p.name, &p.value, &p.grad});
  ad::GradCheckOptions opts;
  opts.max_coords = 12;
  const auto report = ad::grad_check(fn, params, opts);
  INFO(report.summary());
  CHECK(parts_causal > 0.0);
  CHECK(parts_decay > 0.0);
  CHECK(report.passed(1e-4));
}

TEST_CASE("training is reproducible and resumable") {
  const auto cfg = small_run_config();
  const auto train = oracle::select(small_dataset(), oracle::Split::Train);
  auto run = [&](int steps) {
    model::Model m(config::model_config(cfg));
    Trainer t(m, train, config::train_options(cfg));
    std::vector<double> losses;
    for (int i = 0; i < steps; ++i) losses.push_back(t.step().loss.total);
    return std::pair{losses, encode_checkpoint(cfg, m, t.state())};
  };
  const auto [la, ca] = run(7);
  const auto [lb, cb] = run(7);
  CHECK(la == lb);
  CHECK(ca == cb);
  CHECK(la.back() != la.front());

  // Interrupted after 4 steps, restored from bytes, continued for 3.
  const auto [lc, cc] = run(4);
  Checkpoint ck = decode_checkpoint(cc);
  CHECK(encode_checkpoint(ck.config, *ck.model, ck.state) == cc);
  CHECK(ck.state.step == 4);
  Trainer t(*ck.model, train, config::train_options(ck.config), ck.state);
  std::vector<double> tail;
  for (int i = 0; i < 3; ++i) tail.push_back(t.step().loss.total);
  CHECK(std::vector<double>(la.begin() + 4, la.end()) == tail);
  CHECK(encode_checkpoint(ck.config, *ck.model, t.state()) == ca);
}

TEST_CASE("checkpoint rejects corruption") {
  const auto cfg = small_run_config();
  model::Model m(config::model_config(cfg));
  auto bytes = encode_checkpoint(cfg, m, initial_state(m));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[20] ^= 1;  // inside the config text
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
}

TEST_CASE("non-finite loss aborts before any update") {
  const auto cfg = small_run_config();
  const auto train = oracle::select(small_dataset(), oracle::Split::Train);
  model::Model m(config::model_config(cfg));
  m.params().at(model::kOpacity).value[0] = std::nan("");
  const auto before = encode_checkpoint(cfg, m, initial_state(m));
  Trainer t(m, train, config::train_options(cfg));
  CHECK_THROWS_AS(t.step(), NumericError);
  CHECK(t.state().step == 0);
  CHECK(encode_checkpoint(cfg, m, t.state()) == before);
}

TEST_CASE("evaluation report identities") {
  const auto& ds = small_dataset();
  std::vector<double> f, g, pred;
  std::vector<std::vector<double>> spec;
  Rng rng(4);
  for (const auto& s : ds.samples) {
    f.push_back(s.frequency);
    g.push_back(s.gain_db);
    pred.push_back(s.gain_db + rng.normal(0.0, 3.0));
    spec.emplace_back(s.spectrum.begin(), s.spectrum.end());
  }
  const EvalReport self = metric_report(f, g, g, spec, spec, ds.V, ds.Z);
  CHECK(self.mae == 0.0);
  CHECK(self.ssim_mean == 1.0);
  CHECK(self.ssim_median == 1.0);

  const EvalReport r = metric_report(f, pred, g, spec, spec, ds.V, ds.Z);
  double mean_abs = 0.0;
  for (double x : g) mean_abs += std::abs(x);
  mean_abs /= static_cast<double>(g.size());
  CHECK(std::abs(r.nmae - r.mae / mean_abs) < 1e-12);
  REQUIRE(r.per_frequency.size() == 3);
  double weighted = 0.0;
  for (const auto& row : r.per_frequency) weighted += row.mae * static_cast<double>(row.count);
  CHECK(std::abs(weighted / static_cast<double>(r.count) - r.mae) < 1e-12);
  CHECK_THROWS_AS(metric_report(f, pred, g, spec, spec, ds.V + 1, ds.Z), DimensionError);
}

TEST_CASE("model evaluation before and after a save-load cycle") {
  const auto cfg = small_run_config();
  const auto& ds = small_dataset();
  const auto train = oracle::select(ds, oracle::Split::Train);
  model::Model m(config::model_config(cfg));
  Trainer t(m, train, config::train_options(cfg));
  for (int i = 0; i < 3; ++i) t.step();
  const auto test = oracle::select(ds, oracle::Split::Test);
  const std::string a = report_json(evaluate(m, test, cfg.loss.delta_d));
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(cfg, m, t.state()));
  CHECK(report_json(evaluate(*ck.model, test, cfg.loss.delta_d)) == a);
}

TEST_CASE("run config is strict and round-trips") {
  const config::RunConfig d;
  CHECK(d.optimizer.lr == 2e-3);
  CHECK(d.loss.mae == 0.5);
  CHECK(d.loss.ssim == 0.2);
  CHECK(d.loss.rho == 0.9);
  CHECK(d.schedule.plateau_window == 200);
  const std::string text = config::dump_config(d);
  CHECK(config::dump_config(config::parse_config(text)) == text);
  const auto small = config::dump_config(small_run_config());
  CHECK(config::dump_config(config::parse_config(small)) == small);

  CHECK(config::parse_config("{}").seed == 1);
  CHECK_THROWS_AS(config::parse_config(R"({"sed": 2})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config(R"({"loss": {"mae": 0.5, "maee": 1}})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config(R"({"loss": {"mae": "high"}})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config(R"({"model": {"max_depth": 2.5}})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config(R"({"room": {"extent": [1, 2]}})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config(R"({"model": {"start_depth": 5}})"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("{"), ConfigError);

  const auto mc = config::model_config(d);
  CHECK(mc.bounds.edge == 4.0);
  CHECK(mc.scene_extent == Vec3{4.0, 4.0, 3.0});
}
