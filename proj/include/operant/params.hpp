#pragma once

#include <Eigen/Core>
#include <vector>

#include "operant/rng.hpp"

namespace operant::net {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct LayerParams {
  Mat W;
  Vec b;
};

enum class NetKind {
  kMlp,          // affine-tanh stack, affine final layer
  kModifiedMlp,  // two input encoders U, V; gated blend recurrence; affine final
};

// One subnetwork's parameters.  Layout conventions shared by both kinds:
// layers[0] maps the input to the hidden width, layers.back() is the output
// map, interior layers are hidden maps (kMlp) or blend gates (kModifiedMlp).
// Modified networks additionally carry exactly two encoders (U and V), each
// mapping the input to the hidden width.
//
// flatten()/unflatten() use a fixed order — for each layer W (column-major)
// then b, layers first, encoders after — shared by optimizers and gradient
// collection.
struct ParameterSet {
  NetKind kind = NetKind::kMlp;
  std::vector<LayerParams> layers;
  std::vector<LayerParams> encoders;

  [[nodiscard]] std::vector<Eigen::Index> layer_sizes() const;
  [[nodiscard]] Eigen::Index parameter_count() const;
  [[nodiscard]] Vec flatten() const;
  void unflatten(const Vec& flat);
  void validate() const;
};

// Glorot-normal layer: W_ij ~ N(0, 2 / (fan_in + fan_out)), b = 0.  Entries
// are drawn in column-major storage order from the given stream.
LayerParams glorot_layer(Eigen::Index fan_out, Eigen::Index fan_in,
                         rng::Stream stream);

// Network factory.  layer_sizes = {input, hidden..., output}; all hidden
// entries must be equal for kModifiedMlp.  Layer l draws from
// stream.child(l); encoder e draws from stream.child(256 + e).
ParameterSet init_glorot(const std::vector<Eigen::Index>& layer_sizes,
                         NetKind kind, rng::Stream stream);

}  // namespace operant::net
