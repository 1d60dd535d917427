#include "operant/jet.hpp"

#include "operant/errors.hpp"

namespace operant::ad {

namespace {

void require_same_channels(const Jet& a, const Jet& b, const char* where) {
  if (a.ch.size() != b.ch.size())
    throw ShapeError(std::string(where) + ": jets carry different channel counts");
}

}  // namespace

Var z_add(Tape& t, Var a, Var b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return t.add(a, b);
}

Var z_sub(Tape& t, Var a, Var b) {
  if (!b.valid()) return a;
  if (!a.valid()) return t.neg(b);
  return t.sub(a, b);
}

Var z_mul(Tape& t, Var a, Var b) {
  if (!a.valid() || !b.valid()) return Var{};
  return t.mul(a, b);
}

Var z_scale(Tape& t, Var a, double c) {
  if (!a.valid()) return Var{};
  return t.scale(a, c);
}

Jet jet_constant(Tape& t, Mat value, std::size_t nchannels) {
  Jet j;
  j.v = t.constant(std::move(value));
  j.ch.resize(nchannels);
  return j;
}

Jet jet_affine(Tape& t, int w_slot, int b_slot, const Jet& x, int layer_tag) {
  Jet out;
  out.v = t.affine(w_slot, b_slot, x.v, layer_tag);
  out.ch.resize(x.ch.size());
  for (std::size_t c = 0; c < x.ch.size(); ++c) {
    // The bias drops out of every derivative channel.
    out.ch[c].want_d2 = x.ch[c].want_d2;
    if (x.ch[c].d1.valid()) out.ch[c].d1 = t.matmul(w_slot, x.ch[c].d1);
    if (x.ch[c].d2.valid()) out.ch[c].d2 = t.matmul(w_slot, x.ch[c].d2);
  }
  return out;
}

Jet jet_tanh(Tape& t, const Jet& x) {
  Jet out;
  out.v = t.tanh(x.v);
  out.ch.resize(x.ch.size());

  bool any_d1 = false, any_d2 = false;
  for (const auto& c : x.ch) {
    any_d1 |= c.d1.valid();
    any_d2 |= c.want_d2 && (c.d1.valid() || c.d2.valid());
  }
  if (!any_d1 && !any_d2) return out;

  // phi'(z) = 1 - h^2 and phi''(z) = -2 h (1 - h^2), written in terms of the
  // already-computed h = tanh(z); shared across channels.
  const Var hp = t.one_minus(t.square(out.v));
  Var hpp{};
  if (any_d2) hpp = t.scale(t.mul(out.v, hp), -2.0);

  for (std::size_t c = 0; c < x.ch.size(); ++c) {
    const Var z1 = x.ch[c].d1;
    const Var z2 = x.ch[c].d2;
    out.ch[c].want_d2 = x.ch[c].want_d2;
    if (z1.valid()) out.ch[c].d1 = t.mul(hp, z1);
    if (!x.ch[c].want_d2) continue;
    // h'' = phi''(z) z1^2 + phi'(z) z2
    Var term1{};
    if (z1.valid()) term1 = t.mul(hpp, t.square(z1));
    Var term2{};
    if (z2.valid()) term2 = t.mul(hp, z2);
    out.ch[c].d2 = z_add(t, term1, term2);
  }
  return out;
}

Jet jet_mul(Tape& t, const Jet& a, const Jet& b) {
  require_same_channels(a, b, "jet_mul");
  Jet out;
  out.v = t.mul(a.v, b.v);
  out.ch.resize(a.ch.size());
  for (std::size_t c = 0; c < a.ch.size(); ++c) {
    const auto& ca = a.ch[c];
    const auto& cb = b.ch[c];
    out.ch[c].want_d2 = ca.want_d2 || cb.want_d2;
    out.ch[c].d1 = z_add(t, z_mul(t, ca.d1, b.v), z_mul(t, a.v, cb.d1));
    if (!out.ch[c].want_d2) continue;
    // (ab)'' = a'' b + 2 a' b' + a b''
    Var mid = z_mul(t, ca.d1, cb.d1);
    if (mid.valid()) mid = t.scale(mid, 2.0);
    out.ch[c].d2 = z_add(t, z_add(t, z_mul(t, ca.d2, b.v), mid),
                         z_mul(t, a.v, cb.d2));
  }
  return out;
}

Jet jet_add(Tape& t, const Jet& a, const Jet& b) {
  require_same_channels(a, b, "jet_add");
  Jet out;
  out.v = t.add(a.v, b.v);
  out.ch.resize(a.ch.size());
  for (std::size_t c = 0; c < a.ch.size(); ++c) {
    out.ch[c].want_d2 = a.ch[c].want_d2 || b.ch[c].want_d2;
    out.ch[c].d1 = z_add(t, a.ch[c].d1, b.ch[c].d1);
    out.ch[c].d2 = z_add(t, a.ch[c].d2, b.ch[c].d2);
  }
  return out;
}

Jet jet_sub(Tape& t, const Jet& a, const Jet& b) {
  require_same_channels(a, b, "jet_sub");
  Jet out;
  out.v = t.sub(a.v, b.v);
  out.ch.resize(a.ch.size());
  for (std::size_t c = 0; c < a.ch.size(); ++c) {
    out.ch[c].want_d2 = a.ch[c].want_d2 || b.ch[c].want_d2;
    out.ch[c].d1 = z_sub(t, a.ch[c].d1, b.ch[c].d1);
    out.ch[c].d2 = z_sub(t, a.ch[c].d2, b.ch[c].d2);
  }
  return out;
}

Jet jet_scale(Tape& t, const Jet& a, double c) {
  Jet out;
  out.v = t.scale(a.v, c);
  out.ch.resize(a.ch.size());
  for (std::size_t i = 0; i < a.ch.size(); ++i) {
    out.ch[i].want_d2 = a.ch[i].want_d2;
    out.ch[i].d1 = z_scale(t, a.ch[i].d1, c);
    out.ch[i].d2 = z_scale(t, a.ch[i].d2, c);
  }
  return out;
}

Jet jet_one_minus(Tape& t, const Jet& a) {
  Jet out;
  out.v = t.one_minus(a.v);
  out.ch.resize(a.ch.size());
  for (std::size_t i = 0; i < a.ch.size(); ++i) {
    out.ch[i].want_d2 = a.ch[i].want_d2;
    if (a.ch[i].d1.valid()) out.ch[i].d1 = t.neg(a.ch[i].d1);
    if (a.ch[i].d2.valid()) out.ch[i].d2 = t.neg(a.ch[i].d2);
  }
  return out;
}

Jet jet_dot_rows(Tape& t, const Jet& a, const Jet& b, Eigen::Index r0,
                 Eigen::Index r1) {
  require_same_channels(a, b, "jet_dot_rows");
  Jet out;
  out.v = t.dot_rows(a.v, b.v, r0, r1);
  out.ch.resize(a.ch.size());
  auto dot = [&](Var x, Var y) -> Var {
    if (!x.valid() || !y.valid()) return Var{};
    return t.dot_rows(x, y, r0, r1);
  };
  for (std::size_t c = 0; c < a.ch.size(); ++c) {
    const auto& ca = a.ch[c];
    const auto& cb = b.ch[c];
    out.ch[c].want_d2 = ca.want_d2 || cb.want_d2;
    out.ch[c].d1 = z_add(t, dot(ca.d1, b.v), dot(a.v, cb.d1));
    if (!out.ch[c].want_d2) continue;
    Var mid = dot(ca.d1, cb.d1);
    if (mid.valid()) mid = t.scale(mid, 2.0);
    out.ch[c].d2 = z_add(t, z_add(t, dot(ca.d2, b.v), mid), dot(a.v, cb.d2));
  }
  return out;
}

}  // namespace operant::ad
