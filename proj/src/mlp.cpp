#include "operant/mlp.hpp"

#include <string>

#include "operant/errors.hpp"

namespace operant::net {

BoundParams bind(ad::Tape& t, const ParameterSet& p) {
  p.validate();
  BoundParams bp;
  bp.kind = p.kind;
  for (const auto& l : p.layers)
    bp.layers.push_back({t.add_weight(&l.W), t.add_bias(&l.b)});
  for (const auto& e : p.encoders)
    bp.encoders.push_back({t.add_weight(&e.W), t.add_bias(&e.b)});
  return bp;
}

ad::Jet mlp_graph(ad::Tape& t, const BoundParams& bp, const ad::Jet& input) {
  ad::Jet h = input;
  for (std::size_t l = 0; l + 1 < bp.layers.size(); ++l)
    h = jet_tanh(t, jet_affine(t, bp.layers[l].w, bp.layers[l].b, h,
                               bp.layers[l].w));
  const auto& out = bp.layers.back();
  return jet_affine(t, out.w, out.b, h, out.w);
}

ad::Jet modified_mlp_graph(ad::Tape& t, const BoundParams& bp,
                           const ad::Jet& input) {
  if (bp.encoders.size() != 2)
    throw ConfigError("modified network graph requires two bound encoders");
  const ad::Jet U = jet_tanh(
      t, jet_affine(t, bp.encoders[0].w, bp.encoders[0].b, input, bp.encoders[0].w));
  const ad::Jet V = jet_tanh(
      t, jet_affine(t, bp.encoders[1].w, bp.encoders[1].b, input, bp.encoders[1].w));

  ad::Jet h = jet_tanh(t, jet_affine(t, bp.layers[0].w, bp.layers[0].b, input,
                                     bp.layers[0].w));
  for (std::size_t l = 1; l + 1 < bp.layers.size(); ++l) {
    const ad::Jet z = jet_tanh(t, jet_affine(t, bp.layers[l].w, bp.layers[l].b,
                                             h, bp.layers[l].w));
    h = jet_add(t, jet_mul(t, jet_one_minus(t, z), U), jet_mul(t, z, V));
  }
  const auto& out = bp.layers.back();
  return jet_affine(t, out.w, out.b, h, out.w);
}

ad::Jet net_graph(ad::Tape& t, const BoundParams& bp, const ad::Jet& input) {
  switch (bp.kind) {
    case NetKind::kMlp:
      return mlp_graph(t, bp, input);
    case NetKind::kModifiedMlp:
      return modified_mlp_graph(t, bp, input);
  }
  throw ConfigError("unknown network kind");
}

namespace {

Vec forward_impl(const ParameterSet& p, const Vec& input) {
  if (p.layers.empty()) throw ConfigError("network has no layers");
  if (input.size() != p.layers.front().W.cols())
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " does not match network input width " +
                     std::to_string(p.layers.front().W.cols()));
  ad::Tape t(1);
  const BoundParams bp = bind(t, p);
  ad::Jet in = ad::jet_constant(t, input, 0);
  const ad::Jet out = net_graph(t, bp, in);
  return t.value(out.v).col(0);
}

}  // namespace

Vec mlp_forward(const ParameterSet& p, const Vec& input) {
  if (p.kind != NetKind::kMlp)
    throw ConfigError("mlp_forward called on a modified network");
  return forward_impl(p, input);
}

Vec modified_mlp_forward(const ParameterSet& p, const Vec& input) {
  if (p.kind != NetKind::kModifiedMlp)
    throw ConfigError("modified_mlp_forward called on a plain network");
  return forward_impl(p, input);
}

Vec net_forward(const ParameterSet& p, const Vec& input) {
  return forward_impl(p, input);
}

Vec grad_params(const ParameterSet& p,
                const std::function<ad::Var(ad::Tape&, const BoundParams&)>& scalar_fn) {
  ad::Tape t(1);
  const BoundParams bp = bind(t, p);
  const ad::Var out = scalar_fn(t, bp);
  if (t.value(out).rows() != 1)
    throw ShapeError("grad_params: scalar_fn must produce a scalar node");
  t.backward(out);
  return collect_grad(t, bp, p);
}

double input_derivative(const ParameterSet& p, const Vec& input,
                        Eigen::Index coordinate, int order) {
  if (order != 1 && order != 2)
    throw ConfigError("input_derivative supports orders 1 and 2, got " +
                      std::to_string(order));
  if (coordinate < 0 || coordinate >= input.size())
    throw ConfigError("input coordinate " + std::to_string(coordinate) +
                      " out of range for input of length " +
                      std::to_string(input.size()));
  ad::Tape t(1);
  const BoundParams bp = bind(t, p);

  ad::Jet in = ad::jet_constant(t, input, 1);
  Mat seed = Mat::Zero(input.size(), 1);
  seed(coordinate, 0) = 1.0;
  in.ch[0].d1 = t.constant(seed);
  in.ch[0].want_d2 = order == 2;
  // d2 of the input itself is identically zero: left structurally absent.

  const ad::Jet out = net_graph(t, bp, in);
  if (t.value(out.v).rows() != 1)
    throw ShapeError("input_derivative requires a scalar network output");
  const ad::Var d = order == 1 ? out.ch[0].d1 : out.ch[0].d2;
  if (!d.valid()) return 0.0;  // structurally zero derivative
  return t.value(d)(0, 0);
}

Vec collect_grad(const ad::Tape& t, const BoundParams& bp, const ParameterSet& p) {
  Vec flat(p.parameter_count());
  Eigen::Index at = 0;
  auto put = [&](const BoundLayer& slot, const LayerParams& l) {
    const Mat& gw = t.weight_grad(slot.w);
    if (gw.size() == 0)
      flat.segment(at, l.W.size()).setZero();
    else
      flat.segment(at, l.W.size()) = Eigen::Map<const Vec>(gw.data(), gw.size());
    at += l.W.size();
    const Vec& gb = t.bias_grad(slot.b);
    if (gb.size() == 0)
      flat.segment(at, l.b.size()).setZero();
    else
      flat.segment(at, l.b.size()) = gb;
    at += l.b.size();
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) put(bp.layers[l], p.layers[l]);
  for (std::size_t e = 0; e < p.encoders.size(); ++e) put(bp.encoders[e], p.encoders[e]);
  return flat;
}

}  // namespace operant::net
