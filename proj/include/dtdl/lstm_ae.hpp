#pragma once

// LSTM auto-encoder. A single LSTM cell is unrolled for 2*omega steps: the
// first omega steps read a snippet (the encoder) and h_omega is its feature;
// the last omega steps run on zero input and a linear readout turns each h_l
// into one reconstructed sample (the decoder).
//
// Gate stacks are ordered (a, i, f, o) in W, U and b:
//   a = tanh(W_a x + U_a h + b_a)      i = sigm(W_i x + U_i h + b_i)
//   f = sigm(W_f x + U_f h + b_f)      o = sigm(W_o x + U_o h + b_o)
//   S = f * S_prev + i * a             h = o * tanh(S)

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "dtdl/error.hpp"
#include "dtdl/rng.hpp"

namespace dtdl {

struct LstmAeParams {
  Eigen::Index m = 0;
  Eigen::VectorXd W;  // 4m
  Eigen::MatrixXd U;  // 4m x m
  Eigen::VectorXd b;  // 4m
  Eigen::VectorXd readout_v;  // m
  double readout_c = 0.0;

  static LstmAeParams zeros(Eigen::Index m) {
    LstmAeParams p;
    p.m = m;
    p.W = Eigen::VectorXd::Zero(4 * m);
    p.U = Eigen::MatrixXd::Zero(4 * m, m);
    p.b = Eigen::VectorXd::Zero(4 * m);
    p.readout_v = Eigen::VectorXd::Zero(m);
    return p;
  }

  /// Weights uniform in [-scale, scale]; forget-gate biases +1, other biases 0.
  static LstmAeParams initialize(Eigen::Index m, Rng rng, double scale = 0.1) {
    LstmAeParams p = zeros(m);
    for (Eigen::Index r = 0; r < 4 * m; ++r) p.W(r) = rng.uniform(-scale, scale);
    for (Eigen::Index r = 0; r < 4 * m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) p.U(r, c) = rng.uniform(-scale, scale);
    for (Eigen::Index r = 0; r < m; ++r) p.readout_v(r) = rng.uniform(-scale, scale);
    p.b.segment(2 * m, m).setOnes();
    return p;
  }

  Eigen::Index size() const { return 4 * m + 4 * m * m + 4 * m + m + 1; }

  /// Flat layout: W, U (row-major), b, readout_v, readout_c.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(size());
    Eigen::Index o = 0;
    out.segment(o, 4 * m) = W;
    o += 4 * m;
    for (Eigen::Index r = 0; r < 4 * m; ++r) {
      out.segment(o, m) = U.row(r).transpose();
      o += m;
    }
    out.segment(o, 4 * m) = b;
    o += 4 * m;
    out.segment(o, m) = readout_v;
    o += m;
    out(o) = readout_c;
    return out;
  }

  static LstmAeParams unflatten(Eigen::Index m, const Eigen::VectorXd& flat) {
    LstmAeParams p = zeros(m);
    if (flat.size() != p.size()) throw DataError("LSTM parameter vector has the wrong length");
    Eigen::Index o = 0;
    p.W = flat.segment(o, 4 * m);
    o += 4 * m;
    for (Eigen::Index r = 0; r < 4 * m; ++r) {
      p.U.row(r) = flat.segment(o, m).transpose();
      o += m;
    }
    p.b = flat.segment(o, 4 * m);
    o += 4 * m;
    p.readout_v = flat.segment(o, m);
    o += m;
    p.readout_c = flat(o);
    return p;
  }

  double squared_norm() const {
    return W.squaredNorm() + U.squaredNorm() + b.squaredNorm() + readout_v.squaredNorm() + readout_c * readout_c;
  }

  bool all_finite() const {
    return W.allFinite() && U.allFinite() && b.allFinite() && readout_v.allFinite() && std::isfinite(readout_c);
  }
};

struct ParamGradients {
  Eigen::VectorXd dW;
  Eigen::MatrixXd dU;
  Eigen::VectorXd db;
  Eigen::VectorXd d_readout_v;
  double d_readout_c = 0.0;

  static ParamGradients zeros(Eigen::Index m) {
    return {Eigen::VectorXd::Zero(4 * m), Eigen::MatrixXd::Zero(4 * m, m), Eigen::VectorXd::Zero(4 * m),
            Eigen::VectorXd::Zero(m), 0.0};
  }

  ParamGradients& operator+=(const ParamGradients& o) {
    dW += o.dW;
    dU += o.dU;
    db += o.db;
    d_readout_v += o.d_readout_v;
    d_readout_c += o.d_readout_c;
    return *this;
  }

  ParamGradients& operator*=(double s) {
    dW *= s;
    dU *= s;
    db *= s;
    d_readout_v *= s;
    d_readout_c *= s;
    return *this;
  }

  /// Same flat layout as LstmAeParams::flatten.
  Eigen::VectorXd flatten() const {
    LstmAeParams p;
    p.m = d_readout_v.size();
    p.W = dW;
    p.U = dU;
    p.b = db;
    p.readout_v = d_readout_v;
    p.readout_c = d_readout_c;
    return p.flatten();
  }
};

/// One unrolled iteration. Inputs are recorded so the tape is self-contained.
struct StepRecord {
  double x = 0.0;
  Eigen::VectorXd h_prev, S_prev;
  Eigen::VectorXd gates;  // 4m activations (a, i, f, o)
  Eigen::VectorXd S, h;
};

struct ForwardTape {
  std::size_t omega = 0;
  std::vector<StepRecord> steps;   // steps[l-1] is iteration l
  Eigen::VectorXd reconstruction;  // readout of iterations omega+1..2*omega

  const Eigen::VectorXd& feature() const { return steps.at(omega - 1).h; }
};

namespace detail {
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace detail

inline StepRecord lstm_step(const LstmAeParams& p, double x, const Eigen::VectorXd& h_prev,
                            const Eigen::VectorXd& S_prev) {
  const Eigen::Index m = p.m;
  StepRecord r;
  r.x = x;
  r.h_prev = h_prev;
  r.S_prev = S_prev;
  Eigen::VectorXd z = p.W * x + p.U * h_prev + p.b;
  r.gates.resize(4 * m);
  for (Eigen::Index j = 0; j < m; ++j) r.gates(j) = std::tanh(z(j));
  for (Eigen::Index j = m; j < 4 * m; ++j) r.gates(j) = detail::sigmoid(z(j));
  const auto a = r.gates.segment(0, m).array();
  const auto in = r.gates.segment(m, m).array();
  const auto f = r.gates.segment(2 * m, m).array();
  const auto o = r.gates.segment(3 * m, m).array();
  r.S = (f * S_prev.array() + in * a).matrix();
  r.h = (o * r.S.array().tanh()).matrix();
  return r;
}

struct EncodeResult {
  Eigen::VectorXd feature;
  ForwardTape tape;  // first omega iterations
};

/// F_enc: reads the snippet one sample per iteration; returns h_omega.
inline EncodeResult encode(const LstmAeParams& p, const Eigen::Ref<const Eigen::VectorXd>& snippet) {
  EncodeResult out;
  out.tape.omega = static_cast<std::size_t>(snippet.size());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(p.m), S = Eigen::VectorXd::Zero(p.m);
  out.tape.steps.reserve(2 * out.tape.omega);
  for (Eigen::Index l = 0; l < snippet.size(); ++l) {
    out.tape.steps.push_back(lstm_step(p, snippet(l), h, S));
    h = out.tape.steps.back().h;
    S = out.tape.steps.back().S;
  }
  out.feature = h;
  return out;
}

struct DecodeResult {
  Eigen::VectorXd reconstruction;
  std::vector<StepRecord> steps;  // iterations omega+1..2*omega
};

/// F_dec: omega iterations on zero input starting from hidden state `feature`
/// and a zero cell state, so the output depends on the feature alone.
inline DecodeResult decode(const LstmAeParams& p, const Eigen::Ref<const Eigen::VectorXd>& feature, std::size_t omega) {
  DecodeResult out;
  out.reconstruction.resize(static_cast<Eigen::Index>(omega));
  Eigen::VectorXd h = feature, S = Eigen::VectorXd::Zero(p.m);
  out.steps.reserve(omega);
  for (std::size_t l = 0; l < omega; ++l) {
    out.steps.push_back(lstm_step(p, 0.0, h, S));
    h = out.steps.back().h;
    S = out.steps.back().S;
    out.reconstruction(static_cast<Eigen::Index>(l)) = p.readout_v.dot(h) + p.readout_c;
  }
  return out;
}

/// Full 2*omega-step pass over one snippet.
inline ForwardTape forward(const LstmAeParams& p, const Eigen::Ref<const Eigen::VectorXd>& snippet) {
  EncodeResult enc = encode(p, snippet);
  DecodeResult dec = decode(p, enc.feature, enc.tape.omega);
  ForwardTape tape = std::move(enc.tape);
  for (auto& s : dec.steps) tape.steps.push_back(std::move(s));
  tape.reconstruction = std::move(dec.reconstruction);
  return tape;
}

/// Weights of the per-snippet loss
///   ||F_enc(y) - target||^2 + recon_weight * ||F_dec(F_enc(y)) - y||^2 + (lambda4/2) ||theta||^2.
struct LossWeights {
  double recon_weight = 1.0;
  double lambda4 = 0.0;
};

inline double snippet_loss(const LstmAeParams& p, const Eigen::Ref<const Eigen::VectorXd>& snippet,
                           const Eigen::Ref<const Eigen::VectorXd>& encoder_target, const LossWeights& w) {
  const ForwardTape tape = forward(p, snippet);
  return (tape.feature() - encoder_target).squaredNorm() +
         w.recon_weight * (tape.reconstruction - snippet).squaredNorm() + 0.5 * w.lambda4 * p.squared_norm();
}

/// Backpropagation through time for snippet_loss. The regularizer enters as
/// +lambda4 * theta.
inline ParamGradients backward(const LstmAeParams& p, const ForwardTape& tape,
                               const Eigen::Ref<const Eigen::VectorXd>& encoder_target,
                               const Eigen::Ref<const Eigen::VectorXd>& recon_target, const LossWeights& w) {
  const std::size_t omega = tape.omega;
  const Eigen::Index m = p.m;
  if (tape.steps.size() != 2 * omega || static_cast<std::size_t>(recon_target.size()) != omega ||
      encoder_target.size() != m || tape.reconstruction.size() != static_cast<Eigen::Index>(omega))
    throw DataError("backward: tape and target lengths do not match");

  ParamGradients g = ParamGradients::zeros(m);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(m);  // U^T dgates_{l+1}
  Eigen::VectorXd dS_carry = Eigen::VectorXd::Zero(m); // dS_{l+1} * f_{l+1}
  Eigen::VectorXd dgates(4 * m);

  for (std::size_t idx = 2 * omega; idx-- > 0;) {
    const StepRecord& st = tape.steps[idx];
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(m);
    if (idx == omega - 1) {
      delta = 2.0 * (st.h - encoder_target);
    } else if (idx >= omega) {
      const auto r = static_cast<Eigen::Index>(idx - omega);
      const double dr = 2.0 * w.recon_weight * (tape.reconstruction(r) - recon_target(r));
      delta = dr * p.readout_v;
      g.d_readout_v += dr * st.h;
      g.d_readout_c += dr;
    }
    const Eigen::VectorXd dh = delta + dh_next;
    const auto a = st.gates.segment(0, m).array();
    const auto in = st.gates.segment(m, m).array();
    const auto f = st.gates.segment(2 * m, m).array();
    const auto o = st.gates.segment(3 * m, m).array();
    const Eigen::ArrayXd tanhS = st.S.array().tanh();
    const Eigen::ArrayXd dS = dh.array() * o * (1.0 - tanhS.square()) + dS_carry.array();

    dgates.segment(0, m) = (dS * in * (1.0 - a.square())).matrix();
    dgates.segment(m, m) = (dS * a * in * (1.0 - in)).matrix();
    dgates.segment(2 * m, m) = (dS * st.S_prev.array() * f * (1.0 - f)).matrix();
    dgates.segment(3 * m, m) = (dh.array() * tanhS * o * (1.0 - o)).matrix();

    g.dW += dgates * st.x;
    g.dU.noalias() += dgates * st.h_prev.transpose();
    g.db += dgates;

    dh_next = p.U.transpose() * dgates;
    // the decoder starts from a zero cell state, so no cell gradient crosses
    // the encoder/decoder boundary
    dS_carry = idx == omega ? Eigen::VectorXd::Zero(m) : Eigen::VectorXd((dS * f).matrix());
  }

  g.dW += w.lambda4 * p.W;
  g.dU += w.lambda4 * p.U;
  g.db += w.lambda4 * p.b;
  g.d_readout_v += w.lambda4 * p.readout_v;
  g.d_readout_c += w.lambda4 * p.readout_c;
  return g;
}

/// theta <- theta - eta * grad.
inline LstmAeParams apply_update(const LstmAeParams& p, const ParamGradients& g, double eta) {
  LstmAeParams out = p;
  out.W -= eta * g.dW;
  out.U -= eta * g.dU;
  out.b -= eta * g.db;
  out.readout_v -= eta * g.d_readout_v;
  out.readout_c -= eta * g.d_readout_c;
  return out;
}

struct DescentResult {
  LstmAeParams params;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double step = 0.0;  // accepted step, 0 when every halving failed
};

/// One gradient step on a single snippet, halving eta up to max_halvings times
/// until the snippet loss does not increase.
inline DescentResult descend_snippet(const LstmAeParams& p, const Eigen::Ref<const Eigen::VectorXd>& snippet,
                                     const Eigen::Ref<const Eigen::VectorXd>& encoder_target, const LossWeights& w,
                                     double eta, int max_halvings = 20) {
  const ForwardTape tape = forward(p, snippet);
  DescentResult out;
  out.loss_before = (tape.feature() - encoder_target).squaredNorm() +
                    w.recon_weight * (tape.reconstruction - snippet).squaredNorm() + 0.5 * w.lambda4 * p.squared_norm();
  const ParamGradients g = backward(p, tape, encoder_target, snippet, w);
  double step = eta;
  for (int h = 0; h <= max_halvings; ++h, step *= 0.5) {
    LstmAeParams cand = apply_update(p, g, step);
    const double l = snippet_loss(cand, snippet, encoder_target, w);
    if (std::isfinite(l) && l <= out.loss_before) {
      out.params = std::move(cand);
      out.loss_after = l;
      out.step = step;
      return out;
    }
  }
  out.params = p;
  out.loss_after = out.loss_before;
  return out;
}

}  // namespace dtdl
