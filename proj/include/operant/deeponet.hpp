#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "operant/mlp.hpp"

namespace operant::net {

enum class Architecture {
  kMlp,              // plain branch and trunk, dot-product merge
  kModifiedMlp,      // branch and trunk are gated-blend networks, dot merge
  kModifiedDeepOnet, // cross-gated: both paths blend the shared U, V encoders
};

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

// Operator network parameters.  The branch consumes a function's sensor
// values, the trunk an evaluation point; output component i is the dot
// product of latent rows [output_splits[i], output_splits[i+1]).
//
// For kModifiedDeepOnet, branch/trunk layers are reinterpreted: layers[0] is
// the path's first hidden map, interior layers are blend gates, layers.back()
// is the final hidden map (tanh applied before the dot product).  Both paths
// blend the same pair of encoder states U (from the branch input) and V
// (from the trunk input), so every evaluation is intrinsically tied to one
// (function, point) pair.  Encoders, hidden maps and gates all hold distinct
// parameter tensors.
struct DeepOnetParams {
  Architecture architecture = Architecture::kMlp;
  ParameterSet branch;
  ParameterSet trunk;
  std::vector<LayerParams> encoders;        // kModifiedDeepOnet: {u-enc, y-enc}
  std::vector<Eigen::Index> output_splits;  // 0 = q_0 < q_1 < ... < q_n = latent

  [[nodiscard]] Eigen::Index latent() const;
  [[nodiscard]] Eigen::Index n_outputs() const;
  [[nodiscard]] Eigen::Index parameter_count() const;
  [[nodiscard]] Vec flatten() const;
  void unflatten(const Vec& flat);
  void validate() const;
};

struct BoundDeepOnet {
  Architecture architecture = Architecture::kMlp;
  BoundParams branch;
  BoundParams trunk;
  std::vector<BoundLayer> encoders;
  std::vector<Eigen::Index> splits;
};

BoundDeepOnet bind(ad::Tape& t, const DeepOnetParams& p);

// Builds the full operator graph for a batch of (u, y) columns; returns one
// 1 x ncols jet per output component.  Derivative channels on y flow through
// every path that depends on the evaluation point.
std::vector<ad::Jet> deeponet_graph(ad::Tape& t, const BoundDeepOnet& bp,
                                    const ad::Jet& u, const ad::Jet& y);

// Single-point conveniences.
double deeponet_forward(const DeepOnetParams& p, const Vec& u, const Vec& y);
Vec deeponet_forward_multi(const DeepOnetParams& p, const Vec& u, const Vec& y);

Vec collect_grad(const ad::Tape& t, const BoundDeepOnet& bp, const DeepOnetParams& p);

// Factory: width/depth describe both subnetworks; depth counts hidden states.
// Branch and trunk draw from independent child streams of the seed.
DeepOnetParams make_deeponet(Architecture architecture, Eigen::Index m_sensors,
                             Eigen::Index trunk_inputs, Eigen::Index width,
                             int depth, Eigen::Index latent,
                             std::vector<Eigen::Index> output_splits,
                             std::uint64_t seed);

// Checkpoints: JSON with architecture tag, layer sizes, output splits, the
// flat parameter array (round-trip exact), the root seed, and the resolved
// config the run was launched with (as a JSON string; empty means none).
void save_checkpoint(const std::filesystem::path& path, const DeepOnetParams& p,
                     std::uint64_t root_seed, const std::string& config_json);
DeepOnetParams load_checkpoint(const std::filesystem::path& path,
                               std::uint64_t* root_seed = nullptr,
                               std::string* config_json = nullptr);

}  // namespace operant::net
