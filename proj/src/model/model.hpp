// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "model/attention.hpp"
#include "model/heads.hpp"
#include "octree/maintenance.hpp"
#include "render/diff_render.hpp"

namespace ockm::model {

struct ModelConfig {
  octree::Bounds bounds{{0.0, 0.0, 0.0}, 4.0};
  Vec3 scene_extent{4.0, 4.0, 3.0};  // initial Gaussians only in cells centered inside
  int start_depth = 2;
  int max_depth = 3;
  int start_order = 1;
  int max_order = 3;
  int feature_dim = 32;
  int heads = 2;
  int hidden = 32;
  int mlp_width = 64;
  int mlp_blocks = 3;
  int directions = 64;
  int spectrum_v = 18;
  int spectrum_z = 36;
  int array_rows = 4;
  int array_cols = 4;
  double init_opacity_raw = -3.0;
  double init_scale_fraction = 0.25;  // of the anchor cell edge
  double feature_init_std = 0.3;
  double output_gain = 0.1;           // attention output projections
  std::uint64_t seed = 1;

  void validate() const;
  double d_scale() const;  // scene diagonal
};

// Per-Gaussian parameter names, rows follow the Gaussian id.
inline constexpr const char* kOffset = "gauss.offset";
inline constexpr const char* kQuat = "gauss.quat";
inline constexpr const char* kLogScale = "gauss.log_scale";
inline constexpr const char* kOpacity = "gauss.opacity_raw";
inline constexpr const char* kGamma = "gauss.gamma_raw";
inline constexpr const char* kFeature = "gauss.feature";
inline constexpr const char* kStructW = "struct.w";
inline constexpr const char* kFrozen = "empty.frozen";

// Tape state shared by every sample of one forward pass.
struct Prepared {
  render::SceneVars scene;
  std::vector<Var> features;  // x^(n), n = 1..orders
  int orders = 0;
};

struct SampleRender {
  ad::CVar los;
  std::vector<ad::CVar> orders;  // h^(n), n = 1..
  std::vector<OrderGeometry> geometry;
  ad::CVar total;
  Var spectrum;  // VZ x 1, linear power
  Var gain_db;   // 1 x 1
};

class Model {
 public:
  // Fresh model: one Gaussian per start_depth cell centered inside the scene.
  explicit Model(const ModelConfig& config);
  // Fresh parameters on a given topology.
  Model(const ModelConfig& config, octree::OctreeIndex tree, int active_depth, int active_order);
  // Restored model; the parameter store must match the architecture.
  Model(const ModelConfig& config, octree::OctreeIndex tree, ParamStore store, int active_depth, int active_order);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const octree::OctreeIndex& tree() const { return tree_; }
  const TreeLayout& layout() const;
  const render::SteeringTables& tables() const { return *tables_; }
  std::size_t gaussian_count() const { return tree_.gaussian_count(); }

  int active_depth() const { return active_depth_; }
  int active_order() const { return active_order_; }
  void set_active_depth(int d);
  void set_active_order(int n);

  Prepared prepare(ad::Tape& tape, const Bound& bound, int orders, AttentionTrace* trace = nullptr) const;
  SampleRender render(const Bound& bound, const Prepared& prep, const render::Query& q) const;

  // Gaussian centers mu as plain values (offsets clamped).
  std::vector<Vec3> positions() const;

  // Applies one maintenance pass. grad_norms holds the window statistic per
  // Gaussian. Per-Gaussian rows (values and Adam moments) follow the edits.
  octree::MaintenancePlan maintain(const std::vector<double>& grad_norms, const octree::MaintenanceOptions& options,
                                   Rng& rng);

  // Unit quaternions, offsets inside their cell, scales at most the cell edge.
  void renormalize_quaternions();
  void clamp_to_cells();

  const AttentionParams& attention() const { return attn_; }
  const GeometryParams& geometry_params() const { return geo_; }
  const SignalParams& signal_params(int order) const;

 private:
  void register_parameters(Rng& rng);
  void invalidate() { layout_.reset(); }

  ModelConfig config_;
  octree::OctreeIndex tree_;
  ParamStore store_;
  int active_depth_ = 1;
  int active_order_ = 1;
  AttentionParams attn_;
  GeometryParams geo_;
  std::vector<SignalParams> sig_;
  std::shared_ptr<const render::SteeringTables> tables_;
  mutable std::shared_ptr<const TreeLayout> layout_;
  int offset_ = -1, quat_ = -1, log_scale_ = -1, opacity_ = -1, gamma_ = -1, feature_ = -1, struct_w_ = -1,
      frozen_ = -1;
};

}  // namespace ockm::model
