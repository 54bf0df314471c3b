// SPDX-License-Identifier: Apache-2.0
#include "model/attention.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ockm::model {

using octree::NodeKey;

namespace {

constexpr double kMasked = -1e30;

std::vector<NodeKey> siblings_of(const NodeKey& k) {
  std::vector<NodeKey> out;
  if (k.depth == 0) return out;
  const NodeKey parent = octree::parent_of(k);
  for (int o = 0; o < 8; ++o) {
    const NodeKey s = octree::child_of(parent, o);
    if (s != k) out.push_back(s);
  }
  return out;
}

}  // namespace

std::vector<ContextToken> expanded_context(const NodeKey& o, const octree::OctreeIndex& tree) {
  if (o.depth < 1) return {};
  std::vector<ContextToken> out;
  const int leaf_depth = o.depth + 1;
  for (const NodeKey& s : siblings_of(o))
    if (tree.is_active(s)) out.push_back({s, SourceType::Sibling, 1});
  for (const NodeKey& a : octree::ancestors(o)) {
    const int d = leaf_depth - a.depth;
    std::vector<ContextToken> level;
    if (tree.is_active(a)) level.push_back({a, SourceType::Ancestor, d});
    for (const NodeKey& s : siblings_of(a))
      if (tree.is_active(s)) level.push_back({s, SourceType::AncestorSibling, d});
    std::sort(level.begin(), level.end(), [](const ContextToken& x, const ContextToken& y) { return x.key < y.key; });
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

std::vector<QueryBlock> query_blocks(const octree::OctreeIndex& tree) {
  std::map<NodeKey, QueryBlock> blocks;
  for (const auto& [key, gid] : tree.occupied()) {
    const NodeKey parent = octree::parent_of(key);
    auto& b = blocks[parent];
    b.parent = parent;
    b.gaussians.push_back(gid);
  }
  std::vector<QueryBlock> out;
  for (auto& [_, b] : blocks) {
    std::sort(b.gaussians.begin(), b.gaussians.end(), [&](int x, int y) {
      return octree::octant_of(*tree.leaf_of(x)) < octree::octant_of(*tree.leaf_of(y));
    });
    out.push_back(std::move(b));
  }
  return out;
}

TreeLayout build_layout(const octree::OctreeIndex& tree, int active_depth) {
  TreeLayout L;
  const std::size_t M = tree.gaussian_count();
  if (M == 0) throw TopologyError("tree attention needs at least one Gaussian");
  L.gaussian_count = M;
  L.nodes = tree.active_nodes();
  for (std::size_t i = 0; i < L.nodes.size(); ++i) L.node_index.emplace(L.nodes[i], static_cast<int>(i));

  L.gaussian_node.assign(M, -1);
  std::vector<int> leaf_column(L.nodes.size(), -1);
  for (std::size_t i = 0; i < L.nodes.size(); ++i) {
    const NodeKey& k = L.nodes[i];
    if (auto gid = tree.gaussian_at(k)) {
      if (*gid < 0 || static_cast<std::size_t>(*gid) >= M) throw TopologyError("Gaussian ids are not contiguous");
      L.gaussian_node[static_cast<std::size_t>(*gid)] = static_cast<int>(i);
      leaf_column[i] = *gid;
    } else if (!tree.is_internal(k)) {
      leaf_column[i] = static_cast<int>(M + L.empty_leaf_nodes.size());
      L.empty_leaf_nodes.push_back(static_cast<int>(i));
    }
  }
  const std::size_t columns = M + L.empty_leaf_nodes.size();
  L.aggregate = Tensor(L.nodes.size(), columns);
  // Nodes are sorted by depth, so a reverse walk sees children first.
  for (std::size_t i = L.nodes.size(); i-- > 0;) {
    if (leaf_column[i] >= 0) {
      L.aggregate(i, static_cast<std::size_t>(leaf_column[i])) = 1.0;
      continue;
    }
    for (int o = 0; o < 8; ++o) {
      const auto c = static_cast<std::size_t>(L.node_index.at(octree::child_of(L.nodes[i], o)));
      for (std::size_t j = 0; j < columns; ++j) L.aggregate(i, j) += L.aggregate(c, j) / 8.0;
    }
  }

  const std::size_t desc = octree::descriptor_size(tree.max_depth());
  L.descriptors = Tensor(L.nodes.size(), desc);
  for (std::size_t i = 0; i < L.nodes.size(); ++i) {
    const auto d = octree::raw_descriptor(L.nodes[i], tree, active_depth);
    std::copy(d.begin(), d.end(), L.descriptors.row_span(i).begin());
  }

  // Local stage: the eight children of the parent, then the parent.
  L.local_tokens = 9;
  L.local_index.assign(M * 9, -1);
  L.local_mask = Tensor(M, 9);
  std::vector<std::vector<ContextToken>> contexts(M);
  for (std::size_t g = 0; g < M; ++g) {
    const NodeKey parent = octree::parent_of(L.nodes[static_cast<std::size_t>(L.gaussian_node[g])]);
    for (int o = 0; o < 8; ++o) L.local_index[g * 9 + static_cast<std::size_t>(o)] = L.node_index.at(octree::child_of(parent, o));
    L.local_index[g * 9 + 8] = L.node_index.at(parent);
    contexts[g] = expanded_context(parent, tree);
    L.ancestor_tokens = std::max(L.ancestor_tokens, contexts[g].size());
  }

  const std::size_t T = L.ancestor_tokens;
  L.ancestor_index.assign(M * T, -1);
  L.ancestor_mask = Tensor(M, T, kMasked);
  L.ancestor_distance = Tensor(M, T);
  for (auto& t : L.ancestor_type) t = Tensor(M, T);
  for (std::size_t g = 0; g < M; ++g) {
    for (std::size_t t = 0; t < contexts[g].size(); ++t) {
      const ContextToken& c = contexts[g][t];
      L.ancestor_index[g * T + t] = L.node_index.at(c.key);
      L.ancestor_mask(g, t) = 0.0;
      L.ancestor_distance(g, t) = c.distance;
      L.ancestor_type[static_cast<int>(c.type)](g, t) = 1.0;
    }
  }
  return L;
}

AttentionParams add_attention_params(ParamStore& store, int feature_dim, int heads, double output_gain, Rng& rng) {
  if (heads < 1 || feature_dim % heads != 0) throw ConfigError("feature dim must be divisible by the head count");
  AttentionParams p;
  p.feature_dim = feature_dim;
  p.heads = heads;
  const auto D = static_cast<std::size_t>(feature_dim);
  const char* stage[2] = {"attn.local", "attn.ancestor"};
  for (int s = 0; s < 2; ++s) {
    const std::string pre = stage[s];
    p.wq[s] = store.add(pre + ".wq", xavier(rng, D, D));
    p.wk[s] = store.add(pre + ".wk", xavier(rng, D, D));
    p.wv[s] = store.add(pre + ".wv", xavier(rng, D, D));
    p.wo[s] = store.add(pre + ".wo", xavier(rng, D, D, output_gain));
  }
  p.beta_raw = store.add("attn.beta_raw", Tensor::scalar(std::log(std::expm1(0.5))));
  p.gate_raw = store.add("attn.gate_raw", Tensor(1, 3, 0.0));
  return p;
}

Var aggregate_bottom_up(const TreeLayout& layout, Var leaf_features, Var node_struct, Var frozen) {
  ad::Tape& tape = *leaf_features.tape;
  if (leaf_features.rows() != layout.gaussian_count) throw DimensionError("leaf features do not cover every Gaussian");
  Var leaves = leaf_features;
  if (!layout.empty_leaf_nodes.empty()) {
    const Var empty = ad::add(ad::gather_rows(node_struct, layout.empty_leaf_nodes), frozen);
    leaves = ad::concat_rows({leaf_features, empty});
  }
  return ad::matmul(tape.constant(layout.aggregate), leaves);
}

namespace {

// Pre-norm multi-head attention over grouped tokens with a residual.
Var attend(const Bound& bound, const AttentionParams& p, int stage, Var queries, Var tokens,
           const std::vector<int>& index, std::size_t T, Var bias, Var weight_scale, std::vector<Tensor>* trace) {
  const Var qn = ad::layer_norm_rows(queries);
  const Var tn = ad::layer_norm_rows(tokens);
  const Var Q = ad::matmul(qn, bound[p.wq[stage]]);
  const Var K = ad::matmul(tn, bound[p.wk[stage]]);
  const Var V = ad::matmul(tn, bound[p.wv[stage]]);
  const auto dh = static_cast<std::size_t>(p.feature_dim / p.heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < static_cast<std::size_t>(p.heads); ++h) {
    const Var qh = ad::slice_cols(Q, h * dh, (h + 1) * dh);
    const Var kh = ad::slice_cols(K, h * dh, (h + 1) * dh);
    const Var vh = ad::slice_cols(V, h * dh, (h + 1) * dh);
    const Var scores = ad::add(ad::grouped_scores(qh, kh, index, T) * inv_sqrt, bias);
    Var w = ad::softmax_rows(scores);
    if (trace) trace->push_back(w.value());
    if (weight_scale.valid()) w = ad::mul(w, weight_scale);
    outs.push_back(ad::grouped_mix(w, vh, index, T));
  }
  const Var mixed = outs.size() == 1 ? outs[0] : ad::concat_cols(outs);
  return ad::add(queries, ad::matmul(mixed, bound[p.wo[stage]]));
}

}  // namespace

Var tree_attention(const Bound& bound, const AttentionParams& p, const TreeLayout& layout, Var leaf_features,
                   Var node_struct, Var frozen, AttentionTrace* trace) {
  ad::Tape& tape = *leaf_features.tape;
  if (static_cast<int>(leaf_features.cols()) != p.feature_dim) {
    throw ConfigError("leaf feature width " + std::to_string(leaf_features.cols()) + " does not match attention dim " +
                      std::to_string(p.feature_dim));
  }
  const Var nodes = aggregate_bottom_up(layout, leaf_features, node_struct, frozen);

  const Var local_bias = tape.constant(layout.local_mask);
  Var x = attend(bound, p, 0, leaf_features, nodes, layout.local_index, layout.local_tokens, local_bias, Var{},
                 trace ? &trace->local_weights : nullptr);

  if (layout.ancestor_tokens == 0) return x;
  const Var beta = ad::softplus(bound[p.beta_raw]);
  const Var bias = ad::add(ad::mul(tape.constant(layout.ancestor_distance), ad::neg(beta)),
                           tape.constant(layout.ancestor_mask));
  const Var gates = ad::sigmoid(bound[p.gate_raw]);
  Var scale;
  for (std::size_t t = 0; t < 3; ++t) {
    const Var term = ad::mul(tape.constant(layout.ancestor_type[t]), ad::slice_cols(gates, t, t + 1));
    scale = scale.valid() ? ad::add(scale, term) : term;
  }
  return attend(bound, p, 1, x, nodes, layout.ancestor_index, layout.ancestor_tokens, bias, scale,
                trace ? &trace->ancestor_weights : nullptr);
}

}  // namespace ockm::model
