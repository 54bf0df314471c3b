// SPDX-License-Identifier: Apache-2.0
#include "train/evaluate.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "common/error.hpp"
#include "train/losses.hpp"

namespace ockm::train {

EvalReport metric_report(const std::vector<double>& freqs, const std::vector<double>& pred_db,
                         const std::vector<double>& target_db, const std::vector<std::vector<double>>& pred_spec,
                         const std::vector<std::vector<double>>& target_spec, int V, int Z) {
  const std::size_t n = freqs.size();
  if (n == 0) throw DimensionError("nothing to evaluate");
  if (pred_db.size() != n || target_db.size() != n || pred_spec.size() != n || target_spec.size() != n)
    throw DimensionError("evaluation inputs differ in length");
  const auto v = static_cast<std::size_t>(V), z = static_cast<std::size_t>(Z);
  EvalReport r;
  r.count = n;
  std::map<double, std::vector<std::size_t>> by_freq;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred_spec[i].size() != v * z || target_spec[i].size() != v * z)
      throw DimensionError("spectrum size does not match the grid");
    SampleEval s;
    s.frequency = freqs[i];
    s.pred_db = pred_db[i];
    s.target_db = target_db[i];
    const Tensor p(v * z, 1, pred_spec[i]), t(v * z, 1, target_spec[i]);
    s.ssim = ssim(spectrum_image(p, v, z), spectrum_image(t, v, z));
    r.samples.push_back(s);
    by_freq[freqs[i]].push_back(i);
  }
  r.mae = mean_abs_error(pred_db, target_db);
  r.nmae = nmae(r.mae, target_db);
  std::vector<double> ss;
  for (const auto& s : r.samples) ss.push_back(s.ssim);
  double sum = 0.0;
  for (double x : ss) sum += x;
  r.ssim_mean = sum / static_cast<double>(n);
  std::sort(ss.begin(), ss.end());
  r.ssim_median = n % 2 == 1 ? ss[n / 2] : 0.5 * (ss[n / 2 - 1] + ss[n / 2]);

  for (const auto& [f, idx] : by_freq) {
    FrequencyRow row;
    row.frequency = f;
    row.count = idx.size();
    std::vector<double> p, t;
    double s = 0.0;
    for (std::size_t i : idx) {
      p.push_back(pred_db[i]);
      t.push_back(target_db[i]);
      s += r.samples[i].ssim;
    }
    row.mae = mean_abs_error(p, t);
    row.nmae = nmae(row.mae, t);
    row.ssim_mean = s / static_cast<double>(idx.size());
    r.per_frequency.push_back(row);
  }
  return r;
}

EvalReport evaluate(const model::Model& m, const std::vector<const oracle::QuerySample*>& samples, double delta_d) {
  if (samples.empty()) throw DimensionError("nothing to evaluate");
  const int orders = m.active_order();
  std::vector<double> freqs, pred, target;
  std::vector<std::vector<double>> pspec, tspec;
  std::vector<double> energy(static_cast<std::size_t>(orders), 0.0);
  std::size_t ok = 0, total = 0;

  ad::Tape tape;
  const model::Bound bound = model::bind(tape, m.params());
  const model::Prepared prep = m.prepare(tape, bound, orders);
  for (const auto* s : samples) {
    const model::SampleRender r = m.render(bound, prep, {s->tx, s->rx, s->frequency});
    freqs.push_back(s->frequency);
    pred.push_back(r.gain_db.item());
    target.push_back(s->gain_db);
    pspec.push_back(r.spectrum.value().data);
    tspec.emplace_back(s->spectrum.begin(), s->spectrum.end());
    for (std::size_t n = 0; n < r.orders.size(); ++n) {
      const Tensor e = ad::cabs2(r.orders[n]).value();
      double acc = 0.0;
      for (double x : e.data) acc += x;
      energy[n] += acc;
    }
    for (std::size_t g = 0; g < m.gaussian_count(); ++g) {
      bool good = true;
      for (std::size_t n = 1; n < r.geometry.size(); ++n)
        good = good && r.geometry[n].d_hat.value()[g] - r.geometry[n - 1].d_hat.value()[g] >= delta_d;
      ok += good ? 1 : 0;
      ++total;
    }
  }
  EvalReport rep = metric_report(freqs, pred, target, pspec, tspec, m.config().spectrum_v, m.config().spectrum_z);
  for (double& e : energy) e /= static_cast<double>(samples.size());
  rep.order_energy = std::move(energy);
  rep.causal_fraction = static_cast<double>(ok) / static_cast<double>(total);
  return rep;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["count"] = r.count;
  j["mae_db"] = r.mae;
  j["nmae"] = r.nmae;
  j["ssim_mean"] = r.ssim_mean;
  j["ssim_median"] = r.ssim_median;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& f : r.per_frequency)
    rows.push_back({{"f_ghz", f.frequency / 1e9}, {"count", f.count}, {"mae_db", f.mae}, {"nmae", f.nmae},
                    {"ssim_mean", f.ssim_mean}});
  j["per_frequency"] = rows;
  if (!r.order_energy.empty()) {
    j["order_energy"] = r.order_energy;
    j["causal_fraction"] = r.causal_fraction;
  }
  return j.dump(2);
}

std::vector<Component> render_components(const model::Model& m, const render::Query& q, int orders) {
  if (orders < 0 || orders > m.active_order()) throw RangeError("orders must be in [0, active order]");
  ad::Tape tape;
  const model::Bound bound = model::bind(tape, m.params());
  const model::Prepared prep = m.prepare(tape, bound, orders);
  const model::SampleRender r = m.render(bound, prep, q);
  std::vector<Component> out;
  auto add = [&](std::string name, const ad::CVar& h) {
    out.push_back({std::move(name), render::gain_db_var(h).item(), render::spectrum_var(h, m.tables()).value().data});
  };
  add("los", r.los);
  for (std::size_t n = 0; n < r.orders.size(); ++n) add("order" + std::to_string(n + 1), r.orders[n]);
  add("total", r.total);
  return out;
}

}  // namespace ockm::train
