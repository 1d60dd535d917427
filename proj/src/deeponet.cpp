#include "operant/deeponet.hpp"

#include <nlohmann/json.hpp>

#include "operant/errors.hpp"
#include "operant/io.hpp"

namespace operant::net {

using nlohmann::json;

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kMlp: return "mlp";
    case Architecture::kModifiedMlp: return "modified-mlp";
    case Architecture::kModifiedDeepOnet: return "modified-deeponet";
  }
  throw ConfigError("unknown architecture enum value");
}

Architecture architecture_from_name(const std::string& name) {
  if (name == "mlp") return Architecture::kMlp;
  if (name == "modified-mlp") return Architecture::kModifiedMlp;
  if (name == "modified-deeponet") return Architecture::kModifiedDeepOnet;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected mlp, modified-mlp or modified-deeponet)");
}

Eigen::Index DeepOnetParams::latent() const {
  return branch.layers.empty() ? 0 : branch.layers.back().W.rows();
}

Eigen::Index DeepOnetParams::n_outputs() const {
  return static_cast<Eigen::Index>(output_splits.size()) - 1;
}

Eigen::Index DeepOnetParams::parameter_count() const {
  Eigen::Index n = branch.parameter_count() + trunk.parameter_count();
  for (const auto& e : encoders) n += e.W.size() + e.b.size();
  return n;
}

Vec DeepOnetParams::flatten() const {
  Vec flat(parameter_count());
  Eigen::Index at = 0;
  auto put_set = [&](const ParameterSet& p) {
    const Vec v = p.flatten();
    flat.segment(at, v.size()) = v;
    at += v.size();
  };
  put_set(branch);
  put_set(trunk);
  for (const auto& e : encoders) {
    flat.segment(at, e.W.size()) = Eigen::Map<const Vec>(e.W.data(), e.W.size());
    at += e.W.size();
    flat.segment(at, e.b.size()) = e.b;
    at += e.b.size();
  }
  return flat;
}

void DeepOnetParams::unflatten(const Vec& flat) {
  if (flat.size() != parameter_count())
    throw ShapeError("deeponet unflatten: got " + std::to_string(flat.size()) +
                     " values for " + std::to_string(parameter_count()) +
                     " parameters");
  Eigen::Index at = 0;
  auto take_set = [&](ParameterSet& p) {
    const Eigen::Index n = p.parameter_count();
    p.unflatten(flat.segment(at, n));
    at += n;
  };
  take_set(branch);
  take_set(trunk);
  for (auto& e : encoders) {
    Eigen::Map<Vec>(e.W.data(), e.W.size()) = flat.segment(at, e.W.size());
    at += e.W.size();
    e.b = flat.segment(at, e.b.size());
    at += e.b.size();
  }
}

void DeepOnetParams::validate() const {
  branch.validate();
  trunk.validate();
  if (branch.layers.back().W.rows() != trunk.layers.back().W.rows())
    throw ShapeError("branch and trunk latent widths differ (" +
                     std::to_string(branch.layers.back().W.rows()) + " vs " +
                     std::to_string(trunk.layers.back().W.rows()) + ")");
  const Eigen::Index q = latent();
  if (output_splits.size() < 2 || output_splits.front() != 0 ||
      output_splits.back() != q)
    throw ConfigError("output splits must run from 0 to the latent width");
  for (std::size_t i = 0; i + 1 < output_splits.size(); ++i)
    if (output_splits[i] >= output_splits[i + 1])
      throw ConfigError("output splits must be strictly increasing");

  if (architecture == Architecture::kModifiedDeepOnet) {
    if (encoders.size() != 2)
      throw ConfigError("modified operator network needs exactly two encoders");
    if (branch.kind != NetKind::kMlp || trunk.kind != NetKind::kMlp)
      throw ConfigError("modified operator paths must not carry their own encoders");
    const Eigen::Index width = branch.layers.front().W.rows();
    if (trunk.layers.front().W.rows() != width)
      throw ConfigError("modified operator requires equal branch/trunk widths");
    if (branch.layers.size() != trunk.layers.size())
      throw ConfigError("modified operator requires equal branch/trunk depths");
    if (encoders[0].W.rows() != width || encoders[1].W.rows() != width)
      throw ConfigError("encoder widths must equal the hidden width");
    if (encoders[0].W.cols() != branch.layers.front().W.cols())
      throw ShapeError("u-encoder input width does not match branch input");
    if (encoders[1].W.cols() != trunk.layers.front().W.cols())
      throw ShapeError("y-encoder input width does not match trunk input");
  } else if (!encoders.empty()) {
    throw ConfigError("only the modified operator network carries shared encoders");
  }
  if (architecture == Architecture::kModifiedMlp &&
      (branch.kind != NetKind::kModifiedMlp || trunk.kind != NetKind::kModifiedMlp))
    throw ConfigError("modified-mlp architecture requires modified subnetworks");
  if (architecture == Architecture::kMlp &&
      (branch.kind != NetKind::kMlp || trunk.kind != NetKind::kMlp))
    throw ConfigError("mlp architecture requires plain subnetworks");
}

BoundDeepOnet bind(ad::Tape& t, const DeepOnetParams& p) {
  p.validate();
  BoundDeepOnet bp;
  bp.architecture = p.architecture;
  bp.branch = bind(t, p.branch);
  bp.trunk = bind(t, p.trunk);
  for (const auto& e : p.encoders)
    bp.encoders.push_back({t.add_weight(&e.W), t.add_bias(&e.b)});
  bp.splits = p.output_splits;
  return bp;
}

namespace {

std::vector<ad::Jet> block_dots(ad::Tape& t, const ad::Jet& b, const ad::Jet& tr,
                                const std::vector<Eigen::Index>& splits) {
  std::vector<ad::Jet> outs;
  outs.reserve(splits.size() - 1);
  for (std::size_t i = 0; i + 1 < splits.size(); ++i)
    outs.push_back(ad::jet_dot_rows(t, b, tr, splits[i], splits[i + 1]));
  return outs;
}

std::vector<ad::Jet> modified_graph(ad::Tape& t, const BoundDeepOnet& bp,
                                    const ad::Jet& u, const ad::Jet& y) {
  const ad::Jet U = jet_tanh(
      t, jet_affine(t, bp.encoders[0].w, bp.encoders[0].b, u, bp.encoders[0].w));
  const ad::Jet V = jet_tanh(
      t, jet_affine(t, bp.encoders[1].w, bp.encoders[1].b, y, bp.encoders[1].w));

  auto blend = [&](const ad::Jet& z) {
    return jet_add(t, jet_mul(t, jet_one_minus(t, z), U), jet_mul(t, z, V));
  };
  auto path = [&](const BoundParams& side, const ad::Jet& input) {
    ad::Jet h = jet_tanh(t, jet_affine(t, side.layers[0].w, side.layers[0].b,
                                       input, side.layers[0].w));
    for (std::size_t l = 1; l + 1 < side.layers.size(); ++l) {
      const ad::Jet z = jet_tanh(t, jet_affine(t, side.layers[l].w,
                                               side.layers[l].b, h,
                                               side.layers[l].w));
      h = blend(z);
    }
    const auto& fin = side.layers.back();
    return jet_tanh(t, jet_affine(t, fin.w, fin.b, h, fin.w));
  };

  const ad::Jet b = path(bp.branch, u);
  const ad::Jet tr = path(bp.trunk, y);
  return {b, tr};
}

}  // namespace

std::vector<ad::Jet> deeponet_graph(ad::Tape& t, const BoundDeepOnet& bp,
                                    const ad::Jet& u, const ad::Jet& y) {
  if (u.ch.size() != y.ch.size())
    throw ShapeError("branch and trunk input jets carry different channel counts");
  ad::Jet b, tr;
  if (bp.architecture == Architecture::kModifiedDeepOnet) {
    auto sides = modified_graph(t, bp, u, y);
    b = sides[0];
    tr = sides[1];
  } else {
    b = net_graph(t, bp.branch, u);
    tr = net_graph(t, bp.trunk, y);
  }
  return block_dots(t, b, tr, bp.splits);
}

double deeponet_forward(const DeepOnetParams& p, const Vec& u, const Vec& y) {
  if (p.n_outputs() != 1)
    throw ConfigError("single-output forward called on a multi-output network");
  return deeponet_forward_multi(p, u, y)(0);
}

Vec deeponet_forward_multi(const DeepOnetParams& p, const Vec& u, const Vec& y) {
  ad::Tape t(1);
  const BoundDeepOnet bp = bind(t, p);
  const ad::Jet uj = ad::jet_constant(t, u, 0);
  const ad::Jet yj = ad::jet_constant(t, y, 0);
  const auto outs = deeponet_graph(t, bp, uj, yj);
  Vec result(static_cast<Eigen::Index>(outs.size()));
  for (std::size_t i = 0; i < outs.size(); ++i)
    result(static_cast<Eigen::Index>(i)) = t.value(outs[i].v)(0, 0);
  return result;
}

Vec collect_grad(const ad::Tape& t, const BoundDeepOnet& bp,
                 const DeepOnetParams& p) {
  Vec flat(p.parameter_count());
  Eigen::Index at = 0;
  const Vec gb = collect_grad(t, bp.branch, p.branch);
  flat.segment(at, gb.size()) = gb;
  at += gb.size();
  const Vec gt = collect_grad(t, bp.trunk, p.trunk);
  flat.segment(at, gt.size()) = gt;
  at += gt.size();
  for (std::size_t e = 0; e < p.encoders.size(); ++e) {
    const Mat& gw = t.weight_grad(bp.encoders[e].w);
    const Eigen::Index wsize = p.encoders[e].W.size();
    if (gw.size() == 0)
      flat.segment(at, wsize).setZero();
    else
      flat.segment(at, wsize) = Eigen::Map<const Vec>(gw.data(), gw.size());
    at += wsize;
    const Vec& gbias = t.bias_grad(bp.encoders[e].b);
    const Eigen::Index bsize = p.encoders[e].b.size();
    if (gbias.size() == 0)
      flat.segment(at, bsize).setZero();
    else
      flat.segment(at, bsize) = gbias;
    at += bsize;
  }
  return flat;
}

DeepOnetParams make_deeponet(Architecture architecture, Eigen::Index m_sensors,
                             Eigen::Index trunk_inputs, Eigen::Index width,
                             int depth, Eigen::Index latent,
                             std::vector<Eigen::Index> output_splits,
                             std::uint64_t seed) {
  if (depth < 1) throw ConfigError("network depth must be at least 1");
  if (m_sensors <= 0 || trunk_inputs <= 0 || width <= 0 || latent <= 0)
    throw ConfigError("network dimensions must be positive");

  auto sizes = [&](Eigen::Index input) {
    std::vector<Eigen::Index> s{input};
    for (int d = 0; d < depth; ++d) s.push_back(width);
    s.push_back(latent);
    return s;
  };

  const NetKind sub_kind = architecture == Architecture::kModifiedMlp
                               ? NetKind::kModifiedMlp
                               : NetKind::kMlp;
  rng::Stream root(seed, 0);
  DeepOnetParams p;
  p.architecture = architecture;
  p.branch = init_glorot(sizes(m_sensors), sub_kind,
                         root.child(rng::purpose::init_branch));
  p.trunk = init_glorot(sizes(trunk_inputs), sub_kind,
                        root.child(rng::purpose::init_trunk));
  if (architecture == Architecture::kModifiedDeepOnet) {
    rng::Stream enc = root.child(rng::purpose::init_encoder);
    p.encoders.push_back(glorot_layer(width, m_sensors, enc.child(0)));
    p.encoders.push_back(glorot_layer(width, trunk_inputs, enc.child(1)));
  }
  p.output_splits = output_splits.empty()
                        ? std::vector<Eigen::Index>{0, latent}
                        : std::move(output_splits);
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const DeepOnetParams& p,
                     std::uint64_t root_seed, const std::string& config_json) {
  p.validate();
  json j;
  j["format"] = "operant-checkpoint-v1";
  j["architecture"] = architecture_name(p.architecture);
  auto sizes_of = [](const ParameterSet& s) {
    std::vector<std::int64_t> out;
    for (Eigen::Index v : s.layer_sizes()) out.push_back(v);
    return out;
  };
  j["branch_sizes"] = sizes_of(p.branch);
  j["trunk_sizes"] = sizes_of(p.trunk);
  std::vector<std::int64_t> splits(p.output_splits.begin(), p.output_splits.end());
  j["output_splits"] = splits;
  const Vec flat = p.flatten();
  j["parameters"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  j["root_seed"] = root_seed;
  if (!config_json.empty())
    j["config"] = json::parse(config_json);
  io::write_text_file(path, j.dump(1));
}

DeepOnetParams load_checkpoint(const std::filesystem::path& path,
                               std::uint64_t* root_seed,
                               std::string* config_json) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("checkpoint parse failure at " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "operant-checkpoint-v1")
    throw DataError("unrecognized checkpoint format in " + path.string());

  const Architecture arch = architecture_from_name(j.at("architecture"));
  auto sizes = [&](const char* key) {
    std::vector<Eigen::Index> out;
    for (const auto& v : j.at(key)) out.push_back(v.get<std::int64_t>());
    return out;
  };
  const auto branch_sizes = sizes("branch_sizes");
  const auto trunk_sizes = sizes("trunk_sizes");
  if (branch_sizes.size() < 3) throw DataError("checkpoint branch sizes too short");

  const Eigen::Index width = branch_sizes[1];
  const Eigen::Index latent = branch_sizes.back();
  const int depth = static_cast<int>(branch_sizes.size()) - 2;
  std::vector<Eigen::Index> splits;
  for (const auto& v : j.at("output_splits")) splits.push_back(v.get<std::int64_t>());

  DeepOnetParams p = make_deeponet(arch, branch_sizes.front(), trunk_sizes.front(),
                                   width, depth, latent, splits, /*seed=*/0);
  const auto& raw = j.at("parameters");
  Vec flat(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i)
    flat(static_cast<Eigen::Index>(i)) = raw[i].get<double>();
  p.unflatten(flat);
  if (root_seed) *root_seed = j.value("root_seed", std::uint64_t{0});
  if (config_json) *config_json = j.contains("config") ? j["config"].dump() : "";
  return p;
}

}  // namespace operant::net
