#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bandmix/nn/conv.hpp"

namespace bandmix::nn {

/// A batch of equal-length sequences, laid out [batch x steps x features].
template <typename T>
struct SequenceBatch {
  std::size_t batch = 0, steps = 0, features = 0;
  RowMat<T> data;  // (batch * steps) x features, row = b * steps + s

  auto row(std::size_t b, std::size_t s) { return data.row(static_cast<Eigen::Index>(b * steps + s)); }
  auto row(std::size_t b, std::size_t s) const {
    return data.row(static_cast<Eigen::Index>(b * steps + s));
  }
};

/// One-direction LSTM, gate order (input, forget, cell, output).
/// Parameters: w_ih [4H x in], w_hh [4H x H], bias [4H].
template <typename T>
class LstmDirection {
 public:
  LstmDirection() = default;
  LstmDirection(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t hidden,
                bool reverse)
      : in_(in), hidden_(hidden), reverse_(reverse) {
    w_ih_ = params.add(name + ".w_ih", {4 * hidden, in});
    w_hh_ = params.add(name + ".w_hh", {4 * hidden, hidden});
    bias_ = params.add(name + ".bias", {4 * hidden});
  }

  std::size_t hidden() const noexcept { return hidden_; }

  void init(ParamSet<T>& p, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    fill_uniform(p[w_ih_], rng, bound);
    fill_uniform(p[w_hh_], rng, bound);
    fill_uniform(p[bias_], rng, bound);
  }

  struct Cache {
    std::vector<RowMat<T>> gates;  // per step, activated [batch x 4H]
    std::vector<RowMat<T>> cell;   // per step, c_t
    std::vector<RowMat<T>> out;    // per step, h_t
  };

  /// Returns h for every (sequence, step) as [batch*steps x H].
  RowMat<T> forward(const ParamSet<T>& p, const SequenceBatch<T>& x, Cache& cache) const {
    const auto B = static_cast<Eigen::Index>(x.batch);
    const auto H = static_cast<Eigen::Index>(hidden_);
    ConstMatMap<T> w_ih(p[w_ih_].data(), 4 * H, static_cast<Eigen::Index>(in_));
    ConstMatMap<T> w_hh(p[w_hh_].data(), 4 * H, H);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(p[bias_].data(), 4 * H);

    const RowMat<T> proj = x.data * w_ih.transpose();  // (batch*steps) x 4H
    cache.gates.assign(x.steps, RowMat<T>());
    cache.cell.assign(x.steps, RowMat<T>());
    cache.out.assign(x.steps, RowMat<T>());
    RowMat<T> h = RowMat<T>::Zero(B, H), c = RowMat<T>::Zero(B, H);
    RowMat<T> gates(B, 4 * H);
    for (std::size_t k = 0; k < x.steps; ++k) {
      const std::size_t s = reverse_ ? x.steps - 1 - k : k;
      gates.noalias() = h * w_hh.transpose();
      for (Eigen::Index b = 0; b < B; ++b)
        gates.row(b) += proj.row(b * static_cast<Eigen::Index>(x.steps) + static_cast<Eigen::Index>(s)) + bias;
      auto i = gates.leftCols(H).array();
      i = T{1} / (T{1} + (-i).exp());
      auto f = gates.middleCols(H, H).array();
      f = T{1} / (T{1} + (-f).exp());
      auto gg = gates.middleCols(2 * H, H).array();
      gg = gg.tanh();
      auto o = gates.rightCols(H).array();
      o = T{1} / (T{1} + (-o).exp());
      c = (gates.middleCols(H, H).array() * c.array() +
           gates.leftCols(H).array() * gates.middleCols(2 * H, H).array())
              .matrix();
      h = (gates.rightCols(H).array() * c.array().tanh()).matrix();
      cache.gates[s] = gates;
      cache.cell[s] = c;
      cache.out[s] = h;
    }
    RowMat<T> y(B * static_cast<Eigen::Index>(x.steps), H);
    for (Eigen::Index b = 0; b < B; ++b)
      for (std::size_t s = 0; s < x.steps; ++s)
        y.row(b * static_cast<Eigen::Index>(x.steps) + static_cast<Eigen::Index>(s)) =
            cache.out[s].row(b);
    return y;
  }

  /// Backpropagation through time. `gy` is dL/dh laid out like forward()'s
  /// output; returns dL/dx laid out like x.data.
  RowMat<T> backward(const ParamSet<T>& p, const SequenceBatch<T>& x, const Cache& cache,
                     const RowMat<T>& gy, ParamSet<T>& g) const {
    const auto B = static_cast<Eigen::Index>(x.batch);
    const auto H = static_cast<Eigen::Index>(hidden_);
    const auto S = static_cast<Eigen::Index>(x.steps);
    ConstMatMap<T> w_ih(p[w_ih_].data(), 4 * H, static_cast<Eigen::Index>(in_));
    ConstMatMap<T> w_hh(p[w_hh_].data(), 4 * H, H);

    RowMat<T> dgates_all(B * S, 4 * H);
    RowMat<T> dh_next = RowMat<T>::Zero(B, H), dc_next = RowMat<T>::Zero(B, H);
    RowMat<T> dgates(B, 4 * H);
    MatMap<T> gw_hh(g[w_hh_].data(), 4 * H, H);
    for (std::size_t k = x.steps; k-- > 0;) {
      const std::size_t s = reverse_ ? x.steps - 1 - k : k;
      const bool first = k == 0;
      const std::size_t prev = reverse_ ? s + 1 : s - 1;  // valid only when !first
      const auto& gt = cache.gates[s];
      const auto i = gt.leftCols(H).array();
      const auto f = gt.middleCols(H, H).array();
      const auto gg = gt.middleCols(2 * H, H).array();
      const auto o = gt.rightCols(H).array();
      const auto tc = cache.cell[s].array().tanh();

      RowMat<T> dh = dh_next;
      for (Eigen::Index b = 0; b < B; ++b) dh.row(b) += gy.row(b * S + static_cast<Eigen::Index>(s));
      const auto dha = dh.array();
      RowMat<T> dc = (dc_next.array() + dha * o * (T{1} - tc.square())).matrix();
      const RowMat<T> c_prev = first ? RowMat<T>::Zero(B, H) : cache.cell[prev];
      dgates.leftCols(H) = (dc.array() * gg * i * (T{1} - i)).matrix();
      dgates.middleCols(H, H) = (dc.array() * c_prev.array() * f * (T{1} - f)).matrix();
      dgates.middleCols(2 * H, H) = (dc.array() * i * (T{1} - gg.square())).matrix();
      dgates.rightCols(H) = (dha * tc * o * (T{1} - o)).matrix();
      dc_next = (dc.array() * f).matrix();
      if (!first) {
        gw_hh.noalias() += dgates.transpose() * cache.out[prev];
      }
      dh_next.noalias() = dgates * w_hh;
      for (Eigen::Index b = 0; b < B; ++b) dgates_all.row(b * S + static_cast<Eigen::Index>(s)) = dgates.row(b);
    }
    MatMap<T>(g[w_ih_].data(), 4 * H, static_cast<Eigen::Index>(in_)).noalias() +=
        dgates_all.transpose() * x.data;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g[bias_].data(), 4 * H) +=
        dgates_all.colwise().sum();
    return dgates_all * w_ih;
  }

 private:
  std::size_t in_ = 0, hidden_ = 0;
  bool reverse_ = false;
  std::size_t w_ih_ = 0, w_hh_ = 0, bias_ = 0;
};

/// Bidirectional LSTM; output rows are [forward h | backward h] (width 2H).
template <typename T>
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t hidden)
      : fwd_(params, name + ".fwd", in, hidden, false),
        bwd_(params, name + ".bwd", in, hidden, true) {}

  std::size_t hidden() const noexcept { return fwd_.hidden(); }

  void init(ParamSet<T>& p, Rng& rng) const {
    fwd_.init(p, rng);
    bwd_.init(p, rng);
  }

  struct Cache {
    typename LstmDirection<T>::Cache fwd, bwd;
  };

  RowMat<T> forward(const ParamSet<T>& p, const SequenceBatch<T>& x, Cache& cache) const {
    const auto H = static_cast<Eigen::Index>(hidden());
    RowMat<T> y(x.data.rows(), 2 * H);
    y.leftCols(H) = fwd_.forward(p, x, cache.fwd);
    y.rightCols(H) = bwd_.forward(p, x, cache.bwd);
    return y;
  }

  RowMat<T> backward(const ParamSet<T>& p, const SequenceBatch<T>& x, const Cache& cache,
                     const RowMat<T>& gy, ParamSet<T>& g) const {
    const auto H = static_cast<Eigen::Index>(hidden());
    RowMat<T> gx = fwd_.backward(p, x, cache.fwd, gy.leftCols(H), g);
    gx += bwd_.backward(p, x, cache.bwd, gy.rightCols(H), g);
    return gx;
  }

 private:
  LstmDirection<T> fwd_, bwd_;
};

}  // namespace bandmix::nn
