#pragma once

#include <vector>

#include "operant/tape.hpp"

namespace operant::ad {

// Forward-mode derivative channels layered over the tape.
//
// A Jet carries a value node plus, per channel, first and optionally second
// derivative nodes with respect to one scalar input coordinate.  Channel
// structure is fixed per graph: every Jet flowing through one computation
// holds the same channels in the same order.  An invalid Var inside a channel
// is a structural zero; the combinators below propagate zeros without
// emitting ops, so e.g. a subnetwork that never sees a coordinate costs
// nothing in its derivative channels.
//
// Because channels are ordinary tape nodes, reverse-mode over any scalar
// built from them yields exact mixed derivatives (parameter gradients of
// expressions containing input derivatives up to second order).

struct JetChannel {
  Var d1{};
  Var d2{};
  // Channels that never consume the second derivative can opt out of
  // building it: combinators skip every d2 op on a channel whose inputs all
  // carry want_d2 == false.  The default keeps full jets.
  bool want_d2 = true;
};

struct Jet {
  Var v{};
  std::vector<JetChannel> ch;
};

// Structural-zero-aware node combinators.
Var z_add(Tape& t, Var a, Var b);
Var z_sub(Tape& t, Var a, Var b);
Var z_mul(Tape& t, Var a, Var b);
Var z_scale(Tape& t, Var a, double c);

Jet jet_constant(Tape& t, Mat value, std::size_t nchannels);
Jet jet_affine(Tape& t, int w_slot, int b_slot, const Jet& x, int layer_tag = -1);
Jet jet_tanh(Tape& t, const Jet& x);
Jet jet_mul(Tape& t, const Jet& a, const Jet& b);
Jet jet_add(Tape& t, const Jet& a, const Jet& b);
Jet jet_sub(Tape& t, const Jet& a, const Jet& b);
Jet jet_scale(Tape& t, const Jet& a, double c);
Jet jet_one_minus(Tape& t, const Jet& a);
Jet jet_dot_rows(Tape& t, const Jet& a, const Jet& b, Eigen::Index r0,
                 Eigen::Index r1);

}  // namespace operant::ad
