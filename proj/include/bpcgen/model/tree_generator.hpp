// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/nn/tensor.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

using nn::Mat;

inline constexpr int kLatentDim = 96;

enum class BranchMode {
  learned,    ///< children = reshape(parent * branch_map)
  replicate,  ///< children are copies of the parent (ablation)
};

/// Shape of the tree generator: layer l branches every point into degrees[l] children,
/// then convolves features from widths[l] to widths[l+1].
struct GeneratorConfig {
  std::vector<int> degrees{1, 2, 2, 2, 2, 2, 64};
  std::vector<int> widths{96, 256, 256, 256, 128, 128, 128, 3};
  int support_count = 10;
  double leaky_slope = 0.2;
  int point_count = 2048;
  BranchMode branch_mode = BranchMode::learned;

  int layer_count() const { return static_cast<int>(degrees.size()); }

  long long degree_product() const {
    return std::accumulate(degrees.begin(), degrees.end(), 1LL, std::multiplies<>());
  }

  void validate() const {
    if (degrees.empty()) throw ConfigError("generator: at least one layer is required");
    for (int d : degrees)
      if (d < 1) throw ConfigError("generator: branching degrees must be positive");
    if (widths.size() != degrees.size() + 1)
      throw ConfigError("generator: widths must have one more entry than degrees");
    for (int w : widths)
      if (w < 1) throw ConfigError("generator: widths must be positive");
    if (widths.front() != kLatentDim)
      throw ConfigError("generator: widths[0] must equal the latent size " + std::to_string(kLatentDim));
    if (widths.back() != 3) throw ConfigError("generator: last width must be 3");
    if (support_count < 1) throw ConfigError("generator: support_count must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("generator: leaky_slope must lie in (0,1)");
    if (degree_product() != point_count)
      throw ConfigError("generator: product of degrees (" + std::to_string(degree_product()) +
                        ") != point_count (" + std::to_string(point_count) + ")");
  }
};

/// Parameters of one generator layer (branching block + GCN block).
template <class T>
struct GcnLayerParams {
  Mat<T> loop_in;                    ///< w_l x K*w_l
  Mat<T> loop_out;                   ///< K*w_l x w_{l+1}
  std::vector<Mat<T>> ancestor_maps; ///< U_j: w_j x w_{l+1}, j = 0..l
  Mat<T> bias;                       ///< 1 x w_{l+1}
  Mat<T> branch_map;                 ///< w_l x d_l*w_l; 0 x 0 under BranchMode::replicate

  template <class F>
  void for_each(F&& f, const std::string& prefix = "") {
    visit(*this, f, prefix);
  }
  template <class F>
  void for_each(F&& f, const std::string& prefix = "") const {
    visit(*this, f, prefix);
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f, const std::string& prefix) {
    f(prefix + "loop_in", s.loop_in);
    f(prefix + "loop_out", s.loop_out);
    for (std::size_t j = 0; j < s.ancestor_maps.size(); ++j)
      f(prefix + "ancestor" + std::to_string(j), s.ancestor_maps[j]);
    f(prefix + "bias", s.bias);
    f(prefix + "branch_map", s.branch_map);
  }
};

template <class T>
struct GeneratorParams {
  std::vector<GcnLayerParams<T>> layers;

  template <class F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].for_each(f, "gen.layer" + std::to_string(l) + ".");
  }
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].for_each(f, "gen.layer" + std::to_string(l) + ".");
  }

  /// Uniform(+-1/sqrt(fan_in)) weights, zero biases.
  static GeneratorParams make(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    GeneratorParams p;
    const int k = cfg.support_count;
    for (int l = 0; l < cfg.layer_count(); ++l) {
      const int w_in = cfg.widths[static_cast<std::size_t>(l)];
      const int w_out = cfg.widths[static_cast<std::size_t>(l + 1)];
      const int d = cfg.degrees[static_cast<std::size_t>(l)];
      GcnLayerParams<T> lp;
      if (cfg.branch_mode == BranchMode::learned) {
        lp.branch_map.resize(w_in, d * w_in);
        nn::init_uniform(lp.branch_map, w_in, rng);
      }
      lp.loop_in.resize(w_in, k * w_in);
      nn::init_uniform(lp.loop_in, w_in, rng);
      lp.loop_out.resize(k * w_in, w_out);
      nn::init_uniform(lp.loop_out, k * w_in, rng);
      for (int j = 0; j <= l; ++j) {
        const int w_j = cfg.widths[static_cast<std::size_t>(j)];
        Mat<T> u(w_j, w_out);
        nn::init_uniform(u, w_j, rng);
        lp.ancestor_maps.push_back(std::move(u));
      }
      lp.bias = Mat<T>::Zero(1, w_out);
      p.layers.push_back(std::move(lp));
    }
    return p;
  }
};

/// Point features at one tree level. Row i is point i; the level holds
/// prod(degrees[0..layer_index)) points.
template <class T>
struct LayerState {
  Mat<T> features;
  int layer_index = 0;

  Index point_count() const { return features.rows(); }
};

/// Ancestor chains of every tree point. table(l) has one row per point at level l and
/// l columns; column j holds the index of that point's ancestor at level j.
class TreeTopology {
 public:
  using IndexTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TreeTopology() { sizes_.push_back(1); }

  int depth() const { return static_cast<int>(tables_.size()); }
  Index level_size(int level) const { return sizes_.at(static_cast<std::size_t>(level)); }

  const IndexTable& table(int level) const {
    if (level < 1 || level > depth()) throw ConfigError("topology: no ancestor table for level " + std::to_string(level));
    return tables_[static_cast<std::size_t>(level - 1)];
  }

  /// Adds a level where each point of the deepest level gets `degree` contiguous children.
  void extend(int degree) {
    const int level = depth();  // parents live here
    const Index parents = sizes_.back();
    IndexTable t(parents * degree, level + 1);
    for (Index i = 0; i < t.rows(); ++i) {
      const Index parent = i / degree;
      if (level > 0) t.row(i).head(level) = tables_.back().row(parent);
      t(i, level) = parent;
    }
    tables_.push_back(std::move(t));
    sizes_.push_back(parents * degree);
  }

 private:
  std::vector<IndexTable> tables_;
  std::vector<Index> sizes_;
};

/// Branching block: maps each of the M parents to `degree` children and extends `topology`.
template <class T>
LayerState<T> branch(const LayerState<T>& state, const GcnLayerParams<T>& params, int degree, BranchMode mode,
                     TreeTopology& topology) {
  const Index m = state.point_count();
  const Index w = state.features.cols();
  if (degree < 1) throw ConfigError("branch: degree must be positive");
  if (topology.level_size(topology.depth()) != m)
    throw ConfigError("branch: topology does not match the state's point count");
  LayerState<T> out;
  out.layer_index = state.layer_index + 1;
  if (mode == BranchMode::replicate) {
    out.features.resize(m * degree, w);
    for (Index i = 0; i < m; ++i)
      for (int c = 0; c < degree; ++c) out.features.row(i * degree + c) = state.features.row(i);
  } else {
    if (params.branch_map.rows() != w || params.branch_map.cols() != degree * w)
      throw ConfigError("branch: branch_map must be " + std::to_string(w) + "x" + std::to_string(degree * w));
    const Mat<T> expanded = state.features * params.branch_map;
    // Row-major reshape [M x d*w] -> [M*d x w] puts child c of parent i at row i*d + c.
    out.features = Eigen::Map<const Mat<T>>(expanded.data(), m * degree, w);
  }
  topology.extend(degree);
  return out;
}

enum class Activation { leaky, identity };

/// Intermediate values of one GCN block, kept for backpropagation.
template <class T>
struct GcnTrace {
  Mat<T> loop_pre;  ///< children * loop_in
  Mat<T> loop_act;  ///< leaky(loop_pre)
  Mat<T> pre;       ///< argument of the outer activation
};

/// GCN block: out_i = act(F_K(c_i) + sum_j U_j a_j(i) + b), where a_j(i) is the level-j
/// ancestor of point i and F_K(c) = leaky(c * loop_in) * loop_out.
/// `ancestors` holds the features of levels 0..l (l+1 entries).
template <class T>
LayerState<T> gcn_block(const LayerState<T>& children, std::span<const Mat<T>> ancestors,
                        const TreeTopology& topology, const GcnLayerParams<T>& params, Activation act,
                        T leaky_slope, GcnTrace<T>* trace = nullptr) {
  const int level = children.layer_index;
  const Index m = children.point_count();
  if (level < 1 || level > topology.depth() || topology.level_size(level) != m)
    throw ConfigError("gcn_block: state and topology are inconsistent");
  if (ancestors.size() != static_cast<std::size_t>(level))
    throw ConfigError("gcn_block: expected features for " + std::to_string(level) + " ancestor levels");
  if (params.ancestor_maps.size() != static_cast<std::size_t>(level))
    throw ConfigError("gcn_block: missing ancestor map (have " + std::to_string(params.ancestor_maps.size()) +
                      ", need " + std::to_string(level) + ")");
  if (params.loop_in.rows() != children.features.cols() || params.loop_out.rows() != params.loop_in.cols())
    throw ConfigError("gcn_block: loop map shapes do not match input width");
  const Index w_out = params.loop_out.cols();
  if (params.bias.cols() != w_out) throw ConfigError("gcn_block: bias width mismatch");

  GcnTrace<T> local;
  GcnTrace<T>& tr = trace ? *trace : local;
  tr.loop_pre.noalias() = children.features * params.loop_in;
  tr.loop_act = nn::leaky_relu(tr.loop_pre, leaky_slope);
  tr.pre.noalias() = tr.loop_act * params.loop_out;

  const auto& table = topology.table(level);
  for (int j = 0; j < level; ++j) {
    const Mat<T>& a = ancestors[static_cast<std::size_t>(j)];
    const Mat<T>& u = params.ancestor_maps[static_cast<std::size_t>(j)];
    if (a.rows() != topology.level_size(j) || u.rows() != a.cols() || u.cols() != w_out)
      throw ConfigError("gcn_block: ancestor map " + std::to_string(j) + " has the wrong shape");
    const Mat<T> mapped = a * u;
    for (Index i = 0; i < m; ++i) tr.pre.row(i) += mapped.row(table(i, j));
  }
  tr.pre.rowwise() += params.bias.row(0);

  LayerState<T> out;
  out.layer_index = level;
  out.features = act == Activation::leaky ? nn::leaky_relu(tr.pre, leaky_slope) : tr.pre;
  return out;
}

/// Everything the backward pass needs from one generator forward pass.
template <class T>
struct GeneratorTrace {
  std::vector<Mat<T>> levels;    ///< post-GCN features per level; levels[0] is the root z
  std::vector<Mat<T>> children;  ///< branched features entering each GCN block
  std::vector<GcnTrace<T>> gcn;
  TreeTopology topology;
};

/// The tree-structured generator: grows a single latent point into point_count points.
template <class T>
class TreeGenerator {
 public:
  TreeGenerator(GeneratorConfig cfg, GeneratorParams<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    check_shapes();
  }

  TreeGenerator(GeneratorConfig cfg, std::mt19937_64& rng)
      : TreeGenerator(cfg, GeneratorParams<T>::make(cfg, rng)) {}

  const GeneratorConfig& config() const { return cfg_; }
  GeneratorParams<T>& params() { return params_; }
  const GeneratorParams<T>& params() const { return params_; }

  /// N x 3 output for the 1 x 96 latent `z`.
  Mat<T> forward(const Mat<T>& z, GeneratorTrace<T>* trace = nullptr) const {
    if (z.rows() != 1 || z.cols() != kLatentDim)
      throw InvalidInput("generator: latent code must be 1x" + std::to_string(kLatentDim));
    if (!z.allFinite()) throw InvalidInput("generator: latent code is not finite");
    GeneratorTrace<T> local;
    GeneratorTrace<T>& tr = trace ? *trace : local;
    tr = GeneratorTrace<T>{};
    tr.levels.push_back(z);
    const T slope = static_cast<T>(cfg_.leaky_slope);
    const int n_layers = cfg_.layer_count();
    for (int l = 0; l < n_layers; ++l) {
      const auto& lp = params_.layers[static_cast<std::size_t>(l)];
      LayerState<T> state{tr.levels.back(), l};
      LayerState<T> kids = branch(state, lp, cfg_.degrees[static_cast<std::size_t>(l)], cfg_.branch_mode, tr.topology);
      tr.gcn.emplace_back();
      const Activation act = l + 1 == n_layers ? Activation::identity : Activation::leaky;
      LayerState<T> next = gcn_block(kids, std::span<const Mat<T>>(tr.levels), tr.topology, lp, act, slope, &tr.gcn.back());
      if (!next.features.allFinite())
        throw NumericFailure("generator: non-finite features at layer " + std::to_string(l));
      tr.children.push_back(std::move(kids.features));
      tr.levels.push_back(std::move(next.features));
    }
    return tr.levels.back();
  }

  PointCloud generate(const Eigen::RowVectorXd& z) const {
    const Mat<T> out = forward(Mat<T>(z.cast<T>()));
    return PointCloud(Points3(out.template cast<double>()));
  }

  /// Backpropagates d loss / d output (N x 3) through `trace`, accumulating parameter
  /// gradients into `grad`. Returns d loss / d z.
  Mat<T> backward(const GeneratorTrace<T>& tr, const Mat<T>& d_out, GeneratorParams<T>& grad) const {
    const int n_layers = cfg_.layer_count();
    const T slope = static_cast<T>(cfg_.leaky_slope);
    std::vector<Mat<T>> d_levels;
    for (const auto& lv : tr.levels) d_levels.push_back(Mat<T>::Zero(lv.rows(), lv.cols()));
    d_levels.back() += d_out;

    for (int l = n_layers - 1; l >= 0; --l) {
      const auto& lp = params_.layers[static_cast<std::size_t>(l)];
      auto& gp = grad.layers[static_cast<std::size_t>(l)];
      const auto& g = tr.gcn[static_cast<std::size_t>(l)];
      const Mat<T>& kids = tr.children[static_cast<std::size_t>(l)];
      const int level = l + 1;

      Mat<T> d_pre = d_levels[static_cast<std::size_t>(level)];
      if (l + 1 != n_layers) nn::leaky_relu_backward_inplace(d_pre, g.pre, slope);
      gp.bias += d_pre.colwise().sum();
      gp.loop_out.noalias() += g.loop_act.transpose() * d_pre;
      Mat<T> d_loop = d_pre * lp.loop_out.transpose();
      nn::leaky_relu_backward_inplace(d_loop, g.loop_pre, slope);
      gp.loop_in.noalias() += kids.transpose() * d_loop;
      const Mat<T> d_kids = d_loop * lp.loop_in.transpose();

      const auto& table = tr.topology.table(level);
      for (int j = 0; j < level; ++j) {
        const Mat<T>& a = tr.levels[static_cast<std::size_t>(j)];
        Mat<T> agg = Mat<T>::Zero(a.rows(), d_pre.cols());
        for (Index i = 0; i < d_pre.rows(); ++i) agg.row(table(i, j)) += d_pre.row(i);
        gp.ancestor_maps[static_cast<std::size_t>(j)].noalias() += a.transpose() * agg;
        d_levels[static_cast<std::size_t>(j)].noalias() += agg * lp.ancestor_maps[static_cast<std::size_t>(j)].transpose();
      }

      const Mat<T>& parent = tr.levels[static_cast<std::size_t>(l)];
      Mat<T>& d_parent = d_levels[static_cast<std::size_t>(l)];
      const int d = cfg_.degrees[static_cast<std::size_t>(l)];
      if (cfg_.branch_mode == BranchMode::replicate) {
        for (Index i = 0; i < parent.rows(); ++i)
          for (int c = 0; c < d; ++c) d_parent.row(i) += d_kids.row(i * d + c);
      } else {
        const Mat<T> d_expanded = Eigen::Map<const Mat<T>>(d_kids.data(), parent.rows(), d * parent.cols());
        gp.branch_map.noalias() += parent.transpose() * d_expanded;
        d_parent.noalias() += d_expanded * lp.branch_map.transpose();
      }
    }
    return d_levels.front();
  }

 private:
  void check_shapes() const {
    if (params_.layers.size() != static_cast<std::size_t>(cfg_.layer_count()))
      throw ConfigError("generator: parameter layer count does not match config");
    const auto k = static_cast<Index>(cfg_.support_count);
    for (int l = 0; l < cfg_.layer_count(); ++l) {
      const auto& lp = params_.layers[static_cast<std::size_t>(l)];
      const Index w_in = cfg_.widths[static_cast<std::size_t>(l)];
      const Index w_out = cfg_.widths[static_cast<std::size_t>(l + 1)];
      const Index d = cfg_.degrees[static_cast<std::size_t>(l)];
      const std::string where = "generator layer " + std::to_string(l) + ": ";
      if (lp.loop_in.rows() != w_in || lp.loop_in.cols() != k * w_in) throw ConfigError(where + "loop_in shape");
      if (lp.loop_out.rows() != k * w_in || lp.loop_out.cols() != w_out) throw ConfigError(where + "loop_out shape");
      if (lp.bias.rows() != 1 || lp.bias.cols() != w_out) throw ConfigError(where + "bias shape");
      if (lp.ancestor_maps.size() != static_cast<std::size_t>(l + 1)) throw ConfigError(where + "ancestor map count");
      for (int j = 0; j <= l; ++j) {
        const auto& u = lp.ancestor_maps[static_cast<std::size_t>(j)];
        if (u.rows() != cfg_.widths[static_cast<std::size_t>(j)] || u.cols() != w_out)
          throw ConfigError(where + "ancestor map " + std::to_string(j) + " shape");
      }
      if (cfg_.branch_mode == BranchMode::learned &&
          (lp.branch_map.rows() != w_in || lp.branch_map.cols() != d * w_in))
        throw ConfigError(where + "branch_map shape");
    }
  }

  GeneratorConfig cfg_;
  GeneratorParams<T> params_;
};

}  // namespace bpcgen
