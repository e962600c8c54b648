#pragma once

#include <string>

#include "bandmix/nn/layers.hpp"
#include "bandmix/nn/lstm.hpp"

namespace bandmix {

/// Dual-path recurrent block on [ch x T x F] features. The intra pass runs a
/// bidirectional LSTM along frequency inside each frame, the inter pass runs
/// one along time inside each bin; each pass projects back to `ch` channels
/// and adds its input.
template <typename T>
class DprnnBlock {
 public:
  DprnnBlock() = default;
  DprnnBlock(ParamSet<T>& params, const std::string& name, std::size_t channels,
             std::size_t hidden)
      : channels_(channels),
        intra_rnn_(params, name + ".intra.rnn", channels, hidden),
        intra_proj_(params, name + ".intra.proj", 2 * hidden, channels),
        inter_rnn_(params, name + ".inter.rnn", channels, hidden),
        inter_proj_(params, name + ".inter.proj", 2 * hidden, channels) {}

  std::size_t channels() const noexcept { return channels_; }
  const nn::Linear<T>& intra_projection() const noexcept { return intra_proj_; }
  const nn::Linear<T>& inter_projection() const noexcept { return inter_proj_; }

  void init(ParamSet<T>& p, nn::Rng& rng) const {
    intra_rnn_.init(p, rng);
    intra_proj_.init(p, rng);
    inter_rnn_.init(p, rng);
    inter_proj_.init(p, rng);
  }

  struct PassCache {
    nn::SequenceBatch<T> seq;
    typename nn::BiLstm<T>::Cache rnn;
    nn::RowMat<T> rnn_out;
  };
  struct Cache {
    PassCache intra, inter;
  };

  Tensor<T> forward(const ParamSet<T>& p, const Tensor<T>& x, Cache& cache) const {
    require(x.rank() == 3 && x.dim(0) == channels_, "DPRNN expects ", channels_,
            " channels, got ", shape_str(x.shape()));
    Tensor<T> mid = run_pass(p, x, /*along_bins=*/true, intra_rnn_, intra_proj_, cache.intra);
    return run_pass(p, mid, /*along_bins=*/false, inter_rnn_, inter_proj_, cache.inter);
  }

  Tensor<T> backward(const ParamSet<T>& p, const Cache& cache, const Tensor<T>& gy,
                     ParamSet<T>& g) const {
    Tensor<T> gmid = back_pass(p, gy, false, inter_rnn_, inter_proj_, cache.inter, g);
    return back_pass(p, gmid, true, intra_rnn_, intra_proj_, cache.intra, g);
  }

 private:
  // Sequences run along bins (one per frame) or along frames (one per bin).
  static nn::SequenceBatch<T> to_sequences(const Tensor<T>& x, bool along_bins) {
    const std::size_t ch = x.dim(0), nt = x.dim(1), nf = x.dim(2);
    nn::SequenceBatch<T> s;
    s.batch = along_bins ? nt : nf;
    s.steps = along_bins ? nf : nt;
    s.features = ch;
    s.data.resize(static_cast<Eigen::Index>(nt * nf), static_cast<Eigen::Index>(ch));
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t f = 0; f < nf; ++f) {
          const std::size_t r = along_bins ? t * nf + f : f * nt + t;
          s.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(c, t, f);
        }
    return s;
  }

  static void add_from_rows(Tensor<T>& x, const nn::RowMat<T>& rows, bool along_bins) {
    const std::size_t ch = x.dim(0), nt = x.dim(1), nf = x.dim(2);
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t f = 0; f < nf; ++f) {
          const std::size_t r = along_bins ? t * nf + f : f * nt + t;
          x(c, t, f) += rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
  }

  Tensor<T> run_pass(const ParamSet<T>& p, const Tensor<T>& x, bool along_bins,
                     const nn::BiLstm<T>& rnn, const nn::Linear<T>& proj, PassCache& pc) const {
    pc.seq = to_sequences(x, along_bins);
    pc.rnn_out = rnn.forward(p, pc.seq, pc.rnn);
    Tensor<T> y = x;
    add_from_rows(y, proj.forward(p, pc.rnn_out), along_bins);
    return y;
  }

  Tensor<T> back_pass(const ParamSet<T>& p, const Tensor<T>& gy, bool along_bins,
                      const nn::BiLstm<T>& rnn, const nn::Linear<T>& proj, const PassCache& pc,
                      ParamSet<T>& g) const {
    const nn::SequenceBatch<T> gseq = to_sequences(gy, along_bins);
    const nn::RowMat<T> grnn = proj.backward(p, pc.rnn_out, gseq.data, g);
    const nn::RowMat<T> gx_rows = rnn.backward(p, pc.seq, pc.rnn, grnn, g);
    Tensor<T> gx = gy;  // residual path
    add_from_rows(gx, gx_rows, along_bins);
    return gx;
  }

  std::size_t channels_ = 0;
  nn::BiLstm<T> intra_rnn_;
  nn::Linear<T> intra_proj_;
  nn::BiLstm<T> inter_rnn_;
  nn::Linear<T> inter_proj_;
};

}  // namespace bandmix
