#include "operant/params.hpp"

#include <cmath>
#include <string>

#include "operant/errors.hpp"

namespace operant::net {

std::vector<Eigen::Index> ParameterSet::layer_sizes() const {
  std::vector<Eigen::Index> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().W.cols());
  for (const auto& l : layers) sizes.push_back(l.W.rows());
  return sizes;
}

Eigen::Index ParameterSet::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  for (const auto& e : encoders) n += e.W.size() + e.b.size();
  return n;
}

Vec ParameterSet::flatten() const {
  Vec flat(parameter_count());
  Eigen::Index at = 0;
  auto put = [&](const LayerParams& l) {
    flat.segment(at, l.W.size()) = Eigen::Map<const Vec>(l.W.data(), l.W.size());
    at += l.W.size();
    flat.segment(at, l.b.size()) = l.b;
    at += l.b.size();
  };
  for (const auto& l : layers) put(l);
  for (const auto& e : encoders) put(e);
  return flat;
}

void ParameterSet::unflatten(const Vec& flat) {
  if (flat.size() != parameter_count())
    throw ShapeError("unflatten: got " + std::to_string(flat.size()) +
                     " values for " + std::to_string(parameter_count()) +
                     " parameters");
  Eigen::Index at = 0;
  auto take = [&](LayerParams& l) {
    Eigen::Map<Vec>(l.W.data(), l.W.size()) = flat.segment(at, l.W.size());
    at += l.W.size();
    l.b = flat.segment(at, l.b.size());
    at += l.b.size();
  };
  for (auto& l : layers) take(l);
  for (auto& e : encoders) take(e);
}

void ParameterSet::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].W.rows() != layers[l].b.size())
      throw ShapeError("layer " + std::to_string(l) +
                       ": bias length does not match weight rows");
    if (l + 1 < layers.size() && layers[l + 1].W.cols() != layers[l].W.rows())
      throw ShapeError("layer " + std::to_string(l + 1) +
                       ": input width does not match previous layer output");
  }
  if (kind == NetKind::kModifiedMlp) {
    if (encoders.size() != 2)
      throw ConfigError("modified network needs exactly two encoders, has " +
                        std::to_string(encoders.size()));
    const Eigen::Index width = layers.front().W.rows();
    for (std::size_t l = 1; l + 1 < layers.size(); ++l)
      if (layers[l].W.rows() != width || layers[l].W.cols() != width)
        throw ConfigError("modified network requires equal hidden widths");
    if (layers.size() >= 2 && layers.back().W.cols() != width)
      throw ShapeError("output layer input width does not match hidden width");
    for (const auto& e : encoders) {
      if (e.W.rows() != width)
        throw ConfigError("encoder width " + std::to_string(e.W.rows()) +
                          " does not equal hidden width " + std::to_string(width));
      if (e.W.cols() != layers.front().W.cols())
        throw ShapeError("encoder input width does not match network input");
      if (e.b.size() != e.W.rows())
        throw ShapeError("encoder bias length does not match encoder width");
    }
  } else if (!encoders.empty()) {
    throw ConfigError("plain network must not carry encoders");
  }
}

LayerParams glorot_layer(Eigen::Index fan_out, Eigen::Index fan_in,
                         rng::Stream stream) {
  if (fan_out <= 0 || fan_in <= 0)
    throw ConfigError("layer dimensions must be positive");
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  LayerParams l;
  l.W.resize(fan_out, fan_in);
  for (Eigen::Index j = 0; j < fan_in; ++j)
    for (Eigen::Index i = 0; i < fan_out; ++i) l.W(i, j) = sigma * stream.normal();
  l.b = Vec::Zero(fan_out);
  return l;
}

ParameterSet init_glorot(const std::vector<Eigen::Index>& layer_sizes,
                         NetKind kind, rng::Stream stream) {
  if (layer_sizes.size() < 2)
    throw ConfigError("layer_sizes needs at least input and output entries");
  for (Eigen::Index s : layer_sizes)
    if (s <= 0) throw ConfigError("layer sizes must be positive");

  ParameterSet p;
  p.kind = kind;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    p.layers.push_back(glorot_layer(layer_sizes[l + 1], layer_sizes[l],
                                    stream.child(static_cast<std::uint64_t>(l))));
  if (kind == NetKind::kModifiedMlp) {
    const Eigen::Index width = layer_sizes[1];
    for (std::uint64_t e = 0; e < 2; ++e)
      p.encoders.push_back(glorot_layer(width, layer_sizes[0], stream.child(256 + e)));
  }
  p.validate();
  return p;
}

}  // namespace operant::net
