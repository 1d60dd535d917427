#pragma once

#include <functional>

#include "operant/jet.hpp"
#include "operant/params.hpp"

namespace operant::net {

struct BoundLayer {
  int w = -1;
  int b = -1;
};

// A ParameterSet registered on a tape.  Binding order is the flatten() order,
// so gradient collection can walk the two in lockstep.
struct BoundParams {
  NetKind kind = NetKind::kMlp;
  std::vector<BoundLayer> layers;
  std::vector<BoundLayer> encoders;
};

BoundParams bind(ad::Tape& t, const ParameterSet& p);

// Jet-graph builders.  The input jet's channel layout is inherited by the
// output; derivative channels cost ops only where they are structurally
// nonzero.
ad::Jet mlp_graph(ad::Tape& t, const BoundParams& bp, const ad::Jet& input);
ad::Jet modified_mlp_graph(ad::Tape& t, const BoundParams& bp, const ad::Jet& input);
ad::Jet net_graph(ad::Tape& t, const BoundParams& bp, const ad::Jet& input);

// Value-only single-point evaluation.
Vec mlp_forward(const ParameterSet& p, const Vec& input);
Vec modified_mlp_forward(const ParameterSet& p, const Vec& input);
Vec net_forward(const ParameterSet& p, const Vec& input);

// Reverse-mode gradient of an arbitrary scalar (a 1x1 node built by
// scalar_fn, which may use forward values and input-derivative channels)
// with respect to every parameter, in flatten() order.
Vec grad_params(const ParameterSet& p,
                const std::function<ad::Var(ad::Tape&, const BoundParams&)>& scalar_fn);

// d^order (scalar network output) / d input_coordinate^order, order in {1, 2}.
double input_derivative(const ParameterSet& p, const Vec& input,
                        Eigen::Index coordinate, int order);

// Parameter cotangents of a swept tape, in flatten() order; parameters the
// sweep never touched contribute exact zeros.
Vec collect_grad(const ad::Tape& t, const BoundParams& bp, const ParameterSet& p);

}  // namespace operant::net
