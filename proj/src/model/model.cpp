// SPDX-License-Identifier: Apache-2.0
#include "model/model.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ockm::model {

using octree::NodeKey;

void ModelConfig::validate() const {
  if (!(bounds.edge > 0.0)) throw ConfigError("octree bounds edge must be positive");
  if (max_depth < 1 || max_depth > octree::kMaxSupportedDepth) throw ConfigError("max_depth out of range");
  if (start_depth < 1 || start_depth > max_depth) throw ConfigError("start_depth must be in [1, max_depth]");
  if (max_order < 1 || start_order < 1 || start_order > max_order) throw ConfigError("order range invalid");
  if (feature_dim < 1 || heads < 1 || feature_dim % heads != 0) throw ConfigError("feature_dim must divide by heads");
  if (hidden < 1 || mlp_width < 1 || mlp_blocks < 0) throw ConfigError("head sizes must be positive");
  if (directions < 1) throw ConfigError("directions must be positive");
  if (spectrum_v < 1 || spectrum_z < 1 || array_rows < 1 || array_cols < 1) throw ConfigError("grid sizes must be positive");
  if (!(init_scale_fraction > 0.0)) throw ConfigError("init_scale_fraction must be positive");
  for (int i = 0; i < 3; ++i)
    if (!(scene_extent[i] > 0.0)) throw ConfigError("scene extent must be positive");
}

double ModelConfig::d_scale() const { return norm(scene_extent); }

namespace {

octree::OctreeIndex initial_tree(const ModelConfig& c) {
  octree::OctreeIndex tree(c.bounds, c.max_depth);
  const std::uint64_t cells = std::uint64_t{1} << (3 * c.start_depth);
  int gid = 0;
  for (std::uint64_t code = 0; code < cells; ++code) {
    const NodeKey key{c.start_depth, code};
    const Vec3 center = octree::cell_geometry(key, c.bounds).center;
    bool inside = true;
    for (int i = 0; i < 3; ++i) inside = inside && center[i] > 0.0 && center[i] < c.scene_extent[i];
    if (inside) tree.insert_leaf(key, gid++);
  }
  if (gid == 0) throw ConfigError("no start-depth cell center lies inside the scene");
  return tree;
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config), tree_(octree::Bounds{}, 1) {
  config_.validate();
  tree_ = initial_tree(config_);
  active_depth_ = config_.start_depth;
  active_order_ = config_.start_order;
  Rng rng(mix_seed(config_.seed, 0x6d6f64656cULL));
  register_parameters(rng);
}

Model::Model(const ModelConfig& config, octree::OctreeIndex tree, int active_depth, int active_order)
    : config_(config), tree_(std::move(tree)) {
  config_.validate();
  if (tree_.max_depth() != config_.max_depth) throw TopologyError("topology depth does not match the config");
  if (tree_.gaussian_count() == 0) throw TopologyError("topology holds no Gaussians");
  for (std::size_t g = 0; g < tree_.gaussian_count(); ++g)
    if (!tree_.leaf_of(static_cast<int>(g))) throw TopologyError("Gaussian ids are not contiguous");
  if (tree_.deepest_leaf_depth() > active_depth) throw TopologyError("leaves below the active depth");
  set_active_depth(active_depth);
  set_active_order(active_order);
  Rng rng(mix_seed(config_.seed, 0x6d6f64656cULL));
  register_parameters(rng);
}

Model::Model(const ModelConfig& config, octree::OctreeIndex tree, ParamStore store, int active_depth,
             int active_order)
    : config_(config), tree_(std::move(tree)) {
  config_.validate();
  if (tree_.max_depth() != config_.max_depth) throw FormatError("topology depth does not match the config");
  if (tree_.gaussian_count() == 0) throw FormatError("topology holds no Gaussians");
  for (std::size_t g = 0; g < tree_.gaussian_count(); ++g)
    if (!tree_.leaf_of(static_cast<int>(g))) throw FormatError("Gaussian ids are not contiguous");
  set_active_depth(active_depth);
  set_active_order(active_order);
  Rng rng(0);
  register_parameters(rng);
  if (store.size() != store_.size()) throw FormatError("parameter set does not match the architecture");
  for (auto& p : store_.all()) {
    if (!store.contains(p.name)) throw FormatError("missing parameter " + p.name);
    Parameter& src = store.at(p.name);
    if (!src.value.same_shape(p.value)) throw FormatError("parameter " + p.name + " has shape " + src.value.shape_string());
    p.value = std::move(src.value);
    if (src.adam_m.same_shape(p.value)) p.adam_m = std::move(src.adam_m);
    if (src.adam_v.same_shape(p.value)) p.adam_v = std::move(src.adam_v);
  }
}

void Model::register_parameters(Rng& rng) {
  const std::size_t M = tree_.gaussian_count();
  const auto D = static_cast<std::size_t>(config_.feature_dim);

  Tensor offset(M, 3), quat(M, 4), log_scale(M, 3), opacity(M, 1, config_.init_opacity_raw), gamma(M, 1);
  Tensor feature(M, D);
  for (std::size_t g = 0; g < M; ++g) {
    const double edge = octree::cell_geometry(*tree_.leaf_of(static_cast<int>(g)), config_.bounds).edge;
    quat(g, 0) = 1.0;
    for (std::size_t k = 0; k < 3; ++k) log_scale(g, k) = std::log(config_.init_scale_fraction * edge);
  }
  for (auto& x : feature.data) x = rng.normal(0.0, config_.feature_init_std);
  offset_ = store_.add(kOffset, offset, true, true);
  quat_ = store_.add(kQuat, quat, true, true);
  log_scale_ = store_.add(kLogScale, log_scale, true, true);
  opacity_ = store_.add(kOpacity, opacity, true, true);
  gamma_ = store_.add(kGamma, gamma, true, true);
  feature_ = store_.add(kFeature, feature, true, true);

  struct_w_ = store_.add(kStructW, xavier(rng, octree::descriptor_size(config_.max_depth), D));
  Tensor frozen(1, D);
  for (auto& x : frozen.data) x = rng.normal(0.0, config_.feature_init_std);
  frozen_ = store_.add(kFrozen, frozen, false);

  attn_ = add_attention_params(store_, config_.feature_dim, config_.heads, config_.output_gain, rng);
  geo_ = add_geometry_params(store_, config_.feature_dim, config_.hidden, rng);
  sig_.clear();
  for (int n = 1; n <= config_.max_order; ++n)
    sig_.push_back(add_signal_params(store_, n, config_.feature_dim, config_.mlp_width, config_.mlp_blocks, rng));

  tables_ = std::make_shared<const render::SteeringTables>(render::make_tables(
      config_.array_rows, config_.array_cols, config_.directions, config_.spectrum_v, config_.spectrum_z));
}

const SignalParams& Model::signal_params(int order) const {
  if (order < 1 || order > static_cast<int>(sig_.size()))
    throw ConfigError("order " + std::to_string(order) + " exceeds max_order");
  return sig_[static_cast<std::size_t>(order - 1)];
}

void Model::set_active_depth(int d) {
  if (d < 1 || d > config_.max_depth) throw ConfigError("active depth out of range");
  if (d != active_depth_) invalidate();
  active_depth_ = d;
}

void Model::set_active_order(int n) {
  if (n < 1 || n > config_.max_order) throw ConfigError("active order out of range");
  active_order_ = n;
}

const TreeLayout& Model::layout() const {
  if (!layout_) layout_ = std::make_shared<const TreeLayout>(build_layout(tree_, active_depth_));
  return *layout_;
}

Prepared Model::prepare(ad::Tape& tape, const Bound& bound, int orders, AttentionTrace* trace) const {
  if (orders < 0 || orders > config_.max_order) throw ConfigError("order count exceeds max_order");
  const TreeLayout& L = layout();
  const std::size_t M = gaussian_count();

  Tensor centers(M, 3), lo(M, 3), hi(M, 3);
  for (std::size_t g = 0; g < M; ++g) {
    const auto cell = octree::cell_geometry(L.nodes[static_cast<std::size_t>(L.gaussian_node[g])], config_.bounds);
    for (int k = 0; k < 3; ++k) {
      centers(g, static_cast<std::size_t>(k)) = cell.center[k];
      lo(g, static_cast<std::size_t>(k)) = -0.5 * cell.edge;
      hi(g, static_cast<std::size_t>(k)) = 0.5 * cell.edge;
    }
  }

  Prepared p;
  p.orders = orders;
  p.scene.mu = ad::add(tape.constant(std::move(centers)), ad::clamp(bound[offset_], lo, hi));
  p.scene.quat = bound[quat_];
  p.scene.log_scale = bound[log_scale_];
  p.scene.alpha = ad::sigmoid(bound[opacity_]);
  p.scene.gamma_sigmoid = ad::sigmoid(bound[gamma_]);
  if (orders == 0) return p;

  const Var node_struct = ad::matmul(tape.constant(L.descriptors), bound[struct_w_]);
  const Var frozen = bound[frozen_];
  const Var base = ad::add(bound[feature_], ad::gather_rows(node_struct, L.gaussian_node));
  p.features.push_back(base);
  for (int n = 2; n <= orders; ++n) {
    const std::size_t k = p.features.size();
    const Var in = n == 2 ? p.features[0] : ad::sub(p.features[k - 1], p.features[k - 2]);
    p.features.push_back(tree_attention(bound, attn_, L, in, node_struct, frozen, trace));
  }
  return p;
}

SampleRender Model::render(const Bound& bound, const Prepared& prep, const render::Query& q) const {
  ad::Tape& tape = *prep.scene.mu.tape;
  const render::SteeringTables& tables = *tables_;
  SampleRender out;
  out.los = render::render_los(prep.scene, q, tables);
  out.total = out.los;
  if (prep.orders > 0) {
    const ad::CVar theta_tx = render::tx_transmittance(prep.scene, q.tx);
    const ad::CVar theta_rx = render::rx_transmittance(prep.scene, q.rx);
    const auto ef = frequency_embedding(q.frequency);
    const double d_scale = config_.d_scale();
    Var hidden = tape.constant(Tensor(gaussian_count(), static_cast<std::size_t>(config_.hidden)));
    OrderGeometry g = bypass_geometry(prep.scene.mu, q.tx);
    for (int n = 1; n <= prep.orders; ++n) {
      const Var x = prep.features[static_cast<std::size_t>(n - 1)];
      if (n >= 2) g = geometry_step(bound, geo_, x, g, hidden, d_scale);
      const Var cond =
          signal_conditioning(prep.scene.mu, g, ef, q.rx, config_.bounds.min, config_.bounds.edge, d_scale);
      render::OrderInputs in;
      in.d_hat = g.d_hat;
      in.eta = g.eta;
      in.signal = signal_head(bound, signal_params(n), x, cond);
      in.has_tx_factor = n == 1;
      in.theta_tx = theta_tx;
      in.theta_rx = theta_rx;
      out.orders.push_back(render::render_order(prep.scene, in, q, tables));
      out.geometry.push_back(g);
      out.total = ad::cadd(out.total, out.orders.back());
    }
  }
  out.spectrum = render::spectrum_var(out.total, tables);
  out.gain_db = render::gain_db_var(out.total);
  return out;
}

std::vector<Vec3> Model::positions() const {
  const Tensor& off = store_[offset_].value;
  std::vector<Vec3> out(gaussian_count());
  for (std::size_t g = 0; g < out.size(); ++g) {
    const NodeKey key = *tree_.leaf_of(static_cast<int>(g));
    out[g] = octree::gaussian_position(key, {off(g, 0), off(g, 1), off(g, 2)}, tree_);
  }
  return out;
}

void Model::renormalize_quaternions() {
  Tensor& q = store_[quat_].value;
  for (std::size_t g = 0; g < q.rows; ++g) {
    double n = 0.0;
    for (std::size_t k = 0; k < 4; ++k) n += q(g, k) * q(g, k);
    n = std::sqrt(n);
    if (!(n > 0.0) || !std::isfinite(n)) {
      q(g, 0) = 1.0;
      q(g, 1) = q(g, 2) = q(g, 3) = 0.0;
      continue;
    }
    for (std::size_t k = 0; k < 4; ++k) q(g, k) /= n;
  }
}

void Model::clamp_to_cells() {
  Tensor& off = store_[offset_].value;
  Tensor& ls = store_[log_scale_].value;
  for (std::size_t g = 0; g < off.rows; ++g) {
    const double edge = octree::cell_geometry(*tree_.leaf_of(static_cast<int>(g)), config_.bounds).edge;
    const Vec3 c = octree::clamp_offset({off(g, 0), off(g, 1), off(g, 2)}, edge);
    for (int k = 0; k < 3; ++k) {
      off(g, static_cast<std::size_t>(k)) = c[k];
      ls(g, static_cast<std::size_t>(k)) = std::min(ls(g, static_cast<std::size_t>(k)), std::log(edge));
    }
  }
}

octree::MaintenancePlan Model::maintain(const std::vector<double>& grad_norms,
                                        const octree::MaintenanceOptions& options, Rng& rng) {
  const std::size_t M = gaussian_count();
  if (grad_norms.size() != M) throw DimensionError("one gradient statistic per Gaussian required");
  const Tensor& off = store_[offset_].value;
  const Tensor& ls = store_[log_scale_].value;
  const Tensor& op = store_[opacity_].value;
  std::vector<octree::GaussianState> states(M);
  for (std::size_t g = 0; g < M; ++g) {
    states[g].opacity = 1.0 / (1.0 + std::exp(-op(g, 0)));
    states[g].offset = {off(g, 0), off(g, 1), off(g, 2)};
    states[g].log_scale = {ls(g, 0), ls(g, 1), ls(g, 2)};
    states[g].grad_norm = grad_norms[g];
  }
  octree::MaintenanceOptions opts = options;
  opts.active_depth = active_depth_;
  octree::MaintenancePlan plan = octree::plan_maintenance(tree_, states, opts, rng);

  const std::size_t total = plan.old_to_new.size();
  std::vector<int> source(total);
  for (std::size_t i = 0; i < total; ++i) source[i] = static_cast<int>(std::min(i, M - 1));
  for (const auto& e : plan.edits)
    if (e.kind == octree::EditKind::Clone) source[static_cast<std::size_t>(e.clone_id)] = e.gaussian;

  for (auto& p : store_.all()) {
    if (!p.per_gaussian) continue;
    Tensor v(total, p.value.cols), m(total, p.value.cols), s(total, p.value.cols);
    for (std::size_t i = 0; i < total; ++i) {
      const auto src = static_cast<std::size_t>(source[i]);
      std::copy_n(p.value.row_span(src).begin(), p.value.cols, v.row_span(i).begin());
      if (i < M) {
        std::copy_n(p.adam_m.row_span(src).begin(), p.value.cols, m.row_span(i).begin());
        std::copy_n(p.adam_v.row_span(src).begin(), p.value.cols, s.row_span(i).begin());
      }
    }
    p.value = std::move(v);
    p.adam_m = std::move(m);
    p.adam_v = std::move(s);
  }

  Tensor& offv = store_[offset_].value;
  Tensor& lsv = store_[log_scale_].value;
  auto set_offset = [&](int row, const Vec3& o) {
    for (int k = 0; k < 3; ++k) offv(static_cast<std::size_t>(row), static_cast<std::size_t>(k)) = o[k];
  };
  for (const auto& e : plan.edits) {
    switch (e.kind) {
      case octree::EditKind::Migrate:
        set_offset(e.gaussian, e.offset);
        break;
      case octree::EditKind::Split:
      case octree::EditKind::Clone:
        set_offset(e.gaussian, e.offset);
        for (std::size_t k = 0; k < 3; ++k) lsv(static_cast<std::size_t>(e.gaussian), k) += e.log_scale_shift;
        if (e.kind == octree::EditKind::Clone) {
          set_offset(e.clone_id, e.clone_offset);
          for (std::size_t k = 0; k < 3; ++k)
            lsv(static_cast<std::size_t>(e.clone_id), k) = lsv(static_cast<std::size_t>(e.gaussian), k);
        }
        break;
      default:
        break;
    }
  }

  const std::size_t after = plan.count_after;
  for (auto& p : store_.all()) {
    if (!p.per_gaussian) continue;
    Tensor v(after, p.value.cols), m(after, p.value.cols), s(after, p.value.cols);
    for (std::size_t i = 0; i < total; ++i) {
      const int to = plan.old_to_new[i];
      if (to < 0) continue;
      const auto t = static_cast<std::size_t>(to);
      std::copy_n(p.value.row_span(i).begin(), p.value.cols, v.row_span(t).begin());
      std::copy_n(p.adam_m.row_span(i).begin(), p.value.cols, m.row_span(t).begin());
      std::copy_n(p.adam_v.row_span(i).begin(), p.value.cols, s.row_span(t).begin());
    }
    p.value = std::move(v);
    p.adam_m = std::move(m);
    p.adam_v = std::move(s);
    p.grad = Tensor(after, p.value.cols);
  }

  tree_ = plan.tree;
  invalidate();
  clamp_to_cells();
  return plan;
}

}  // namespace ockm::model
