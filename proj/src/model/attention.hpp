// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "model/params.hpp"
#include "octree/octree.hpp"

namespace ockm::model {

enum class SourceType { Sibling = 0, Ancestor = 1, AncestorSibling = 2 };

struct ContextToken {
  octree::NodeKey key;
  SourceType type;
  int distance;
};

// Context of the ancestor stage for the block under parent o (depth >= 1):
// siblings of o (d = 1), every proper ancestor a of o (d = depth(o) + 1 -
// depth(a)) and the siblings of each ancestor (same d). Ordered by depth
// descending, then Morton code.
std::vector<ContextToken> expanded_context(const octree::NodeKey& o, const octree::OctreeIndex& tree);

struct QueryBlock {
  octree::NodeKey parent;
  std::vector<int> gaussians;  // ordered by octant
};

// Occupied leaves grouped by parent, blocks ordered by parent key.
std::vector<QueryBlock> query_blocks(const octree::OctreeIndex& tree);

// Constant index structures of one topology.
struct TreeLayout {
  std::size_t gaussian_count = 0;
  std::vector<octree::NodeKey> nodes;  // active nodes, sorted
  std::map<octree::NodeKey, int> node_index;
  std::vector<int> gaussian_node;      // node of each Gaussian's leaf
  std::vector<int> empty_leaf_nodes;
  // node_features = aggregate * [leaf rows of Gaussians; empty leaf rows].
  Tensor aggregate;
  Tensor descriptors;  // raw structural descriptors, one row per node

  std::size_t local_tokens = 0;
  std::vector<int> local_index;  // gaussian_count x local_tokens
  Tensor local_mask;             // 0 or -1e30

  std::size_t ancestor_tokens = 0;
  std::vector<int> ancestor_index;
  Tensor ancestor_mask;
  Tensor ancestor_distance;
  Tensor ancestor_type[3];  // 0/1 indicator per source type
};

TreeLayout build_layout(const octree::OctreeIndex& tree, int active_depth);

struct AttentionParams {
  int feature_dim = 0;
  int heads = 1;
  int wq[2]{}, wk[2]{}, wv[2]{}, wo[2]{};  // stage 0 local, stage 1 ancestor
  int beta_raw = -1;                        // beta = softplus(beta_raw)
  int gate_raw = -1;                        // 1 x 3, gates = sigmoid(gate_raw)
};

AttentionParams add_attention_params(ParamStore& store, int feature_dim, int heads, double output_gain, Rng& rng);

// Attention weights per head and stage, for inspection.
struct AttentionTrace {
  std::vector<Tensor> local_weights;
  std::vector<Tensor> ancestor_weights;
};

// Internal-node features as the mean of their eight children, leaves taken
// from leaf_features (occupied) or frozen + e_struct (empty).
Var aggregate_bottom_up(const TreeLayout& layout, Var leaf_features, Var node_struct, Var frozen);

// Two-stage tree attention on the occupied-leaf features (one row per
// Gaussian). node_struct holds e_struct for every layout node.
Var tree_attention(const Bound& bound, const AttentionParams& p, const TreeLayout& layout, Var leaf_features,
                   Var node_struct, Var frozen, AttentionTrace* trace = nullptr);

}  // namespace ockm::model
