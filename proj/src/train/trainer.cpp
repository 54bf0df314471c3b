// SPDX-License-Identifier: Apache-2.0
#include "train/trainer.hpp"

#include <cmath>

#include <json.hpp>

#include "common/error.hpp"

namespace ockm::train {

void ScheduleOptions::validate() const {
  if (plateau_window < 1 || min_gap < 0) throw ConfigError("plateau window must be positive");
  if (!(plateau_rel >= 0.0)) throw ConfigError("plateau_rel must be nonnegative");
  if (!(loss_ema >= 0.0 && loss_ema < 1.0)) throw ConfigError("loss_ema must be in [0, 1)");
}

void TrainOptions::validate() const {
  if (steps < 0) throw ConfigError("steps must be nonnegative");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (maintenance_every < 0) throw ConfigError("maintenance_every must be nonnegative");
  if (!(maintenance.grad_percentile >= 0.0 && maintenance.grad_percentile <= 1.0))
    throw ConfigError("grad_percentile must be in [0, 1]");
  if (maintenance.max_gaussians < 1) throw ConfigError("max_gaussians must be positive");
  loss.validate();
  adam.validate();
  schedule.validate();
}

TrainState initial_state(const model::Model& m) {
  TrainState s;
  s.ebar.assign(static_cast<std::size_t>(m.config().max_order), 0.0);
  s.grad_accum.assign(m.gaussian_count(), 0.0);
  return s;
}

BatchResult batch_loss(const model::Model& m, const model::Bound& bound, const model::Prepared& prep,
                       const std::vector<const oracle::QuerySample*>& batch, const LossWeights& w,
                       const std::vector<double>& ebar) {
  if (batch.empty()) throw DimensionError("empty batch");
  ad::Tape& tape = *prep.scene.mu.tape;
  const auto V = static_cast<std::size_t>(m.config().spectrum_v);
  const auto Z = static_cast<std::size_t>(m.config().spectrum_z);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const auto orders = static_cast<std::size_t>(prep.orders);

  Var huber = tape.constant(0.0), mae = tape.constant(0.0), ssim_sum = tape.constant(0.0),
      causal = tape.constant(0.0);
  std::vector<Var> energy(orders, tape.constant(0.0));
  std::vector<double> targets;
  for (const auto* s : batch) {
    targets.push_back(s->gain_db);
    if (s->spectrum.size() != V * Z) throw DimensionError("sample spectrum does not match the model grid");
    const model::SampleRender r = m.render(bound, prep, {s->tx, s->rx, s->frequency});
    Tensor target(V * Z, 1);
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<double>(s->spectrum[i]);
    huber = ad::add(huber, spectrum_huber(r.spectrum, target, w.huber_delta));
    mae = ad::add(mae, ad::abs(ad::add(r.gain_db, -s->gain_db)));
    const Var img = spectrum_image(r.spectrum, V, Z);
    ssim_sum = ad::add(ssim_sum, ssim(img, tape.constant(spectrum_image(target, V, Z))));
    if (orders > 0) {
      std::vector<Var> d;
      for (const auto& g : r.geometry) d.push_back(g.d_hat);
      causal = ad::add(causal, causal_loss(d, w.delta_d));
    }
    for (std::size_t n = 0; n < orders; ++n) energy[n] = ad::add(energy[n], ad::sum(ad::cabs2(r.orders[n])));
  }
  huber = huber * inv_b;
  mae = mae * inv_b;
  const Var ssim_mean = ssim_sum * inv_b;
  causal = causal * inv_b;
  for (auto& e : energy) e = e * inv_b;
  const Var decay = orders > 0 ? decay_loss(energy, ebar, w.xi, w.epsilon, w.rho) : tape.constant(0.0);

  BatchResult out;
  out.total = ad::add(ad::add(ad::add(huber * w.spectrum, mae * w.mae), ad::rsub(1.0, ssim_mean) * w.ssim),
                      ad::add(causal * w.causal, decay * w.decay));
  out.parts.huber = huber.item();
  out.parts.mae = mae.item();
  out.parts.nmae = nmae(out.parts.mae, targets);
  out.parts.ssim = ssim_mean.item();
  out.parts.causal = causal.item();
  out.parts.decay = decay.item();
  out.parts.total = out.total.item();
  for (const auto& e : energy) out.energies.push_back(e.item());
  return out;
}

bool plateaued(const std::deque<double>& history, const ScheduleOptions& o) {
  if (history.size() < static_cast<std::size_t>(o.plateau_window) + 1) return false;
  const double before = history.front();
  const double now = history.back();
  if (before == 0.0) return true;
  return (before - now) / std::abs(before) < o.plateau_rel;
}

std::string unlock_schedule(TrainState& s, model::Model& m, const ScheduleOptions& o) {
  if (s.step < s.last_unlock + static_cast<std::uint64_t>(o.min_gap)) return {};
  if (!plateaued(s.ema_history, o)) return {};
  const bool can_order = m.active_order() < m.config().max_order;
  const bool can_depth = m.active_depth() < m.config().max_depth;
  if (!can_order && !can_depth) return {};
  const bool depth = s.next_unlock_depth ? can_depth : !can_order;
  std::string what;
  if (depth) {
    m.set_active_depth(m.active_depth() + 1);
    what = "unlock depth " + std::to_string(m.active_depth());
  } else {
    m.set_active_order(m.active_order() + 1);
    what = "unlock order " + std::to_string(m.active_order());
  }
  s.next_unlock_depth = !depth;
  s.last_unlock = s.step;
  s.ema_history.clear();
  return what;
}

std::string to_json_line(const StepRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["loss"] = r.loss.total;
  j["huber"] = r.loss.huber;
  j["mae_db"] = r.loss.mae;
  j["nmae"] = r.loss.nmae;
  j["ssim"] = r.loss.ssim;
  j["causal"] = r.loss.causal;
  j["decay"] = r.loss.decay;
  j["skipped"] = r.skipped;
  j["active_order"] = r.active_order;
  j["active_depth"] = r.active_depth;
  j["gaussians"] = r.gaussians;
  if (!r.events.empty()) j["events"] = r.events;
  return j.dump();
}

Trainer::Trainer(model::Model& m, std::vector<const oracle::QuerySample*> train_set, TrainOptions options,
                 TrainState state)
    : model_(m), train_(std::move(train_set)), opt_(std::move(options)), state_(std::move(state)) {
  opt_.validate();
  if (train_.empty()) throw ConfigError("no training samples");
  if (state_.ebar.empty()) state_ = initial_state(model_);
  if (state_.ebar.size() != static_cast<std::size_t>(model_.config().max_order) ||
      state_.grad_accum.size() != model_.gaussian_count())
    throw FormatError("training state does not match the model");
}

StepRecord Trainer::step() {
  StepRecord rec;
  Rng rng(mix_seed(opt_.seed, state_.step));
  std::vector<const oracle::QuerySample*> batch;
  for (int b = 0; b < opt_.batch; ++b) batch.push_back(train_[rng.below(train_.size())]);

  model::ParamStore& store = model_.params();
  {
    ad::Tape tape;
    const model::Bound bound = model::bind(tape, store);
    const model::Prepared prep = model_.prepare(tape, bound, model_.active_order());
    BatchResult res = batch_loss(model_, bound, prep, batch, opt_.loss, state_.ebar);
    rec.loss = res.parts;
    if (!std::isfinite(res.parts.total))
      throw NumericError("non-finite loss at step " + std::to_string(state_.step));
    tape.backward(res.total);
    model::collect_grads(tape, bound, store);

    const Tensor& g = store.at(model::kOffset).grad;
    for (std::size_t i = 0; i < g.rows; ++i)
      state_.grad_accum[i] += std::sqrt(g(i, 0) * g(i, 0) + g(i, 1) * g(i, 1) + g(i, 2) * g(i, 2));
    ++state_.grad_count;

    for (std::size_t n = 0; n < res.energies.size(); ++n)
      state_.ebar[n] = opt_.loss.energy_ema * state_.ebar[n] + (1.0 - opt_.loss.energy_ema) * res.energies[n];
  }

  ++state_.step;
  rec.step = state_.step;
  if (adam_step(store, state_.step, opt_.adam)) {
    model_.renormalize_quaternions();
  } else {
    rec.skipped = true;
    rec.events.push_back("skipped step: non-finite gradient");
  }

  if (!state_.ema_started) {
    state_.loss_ema = rec.loss.total;
    state_.ema_started = true;
  } else {
    state_.loss_ema = opt_.schedule.loss_ema * state_.loss_ema + (1.0 - opt_.schedule.loss_ema) * rec.loss.total;
  }
  state_.ema_history.push_back(state_.loss_ema);
  while (state_.ema_history.size() > static_cast<std::size_t>(opt_.schedule.plateau_window) + 1)
    state_.ema_history.pop_front();
  if (auto u = unlock_schedule(state_, model_, opt_.schedule); !u.empty()) rec.events.push_back(u);

  if (opt_.maintenance_every > 0 && state_.step % static_cast<std::uint64_t>(opt_.maintenance_every) == 0) {
    std::vector<double> norms(state_.grad_accum.size());
    for (std::size_t i = 0; i < norms.size(); ++i)
      norms[i] = state_.grad_accum[i] / static_cast<double>(std::max<std::uint64_t>(state_.grad_count, 1));
    Rng mrng(mix_seed(opt_.seed ^ 0x6d61696e74ULL, state_.step));
    const auto plan = model_.maintain(norms, opt_.maintenance, mrng);
    for (const auto& e : plan.edits) {
      std::string s = std::string(octree::edit_kind_name(e.kind)) + " gaussian " + std::to_string(e.gaussian);
      if (!e.note.empty()) s += " (" + e.note + ")";
      rec.events.push_back(s);
    }
    state_.grad_accum.assign(model_.gaussian_count(), 0.0);
    state_.grad_count = 0;
  }

  rec.active_order = model_.active_order();
  rec.active_depth = model_.active_depth();
  rec.gaussians = model_.gaussian_count();
  return rec;
}

}  // namespace ockm::train
