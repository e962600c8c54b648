#pragma once

#include <cmath>

#include "bandmix/audio.hpp"
#include "bandmix/stft.hpp"

namespace bandmix {

/// The four L1 terms of the training loss; `total` is their sum.
struct LossBreakdown {
  double time_term = 0;  // mean |y - y_ref| over samples
  double mag_term = 0;   // mean ||Y| - |Y_ref|| over bins
  double real_term = 0;  // mean |Re Y - Re Y_ref|
  double imag_term = 0;  // mean |Im Y - Im Y_ref|
  double total = 0;
};

namespace detail {

inline double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

inline void check_loss_inputs(const AudioSegment& est, const AudioSegment& ref) {
  require(est.same_layout(ref), "demix_loss: estimate [", est.channels(), " x ", est.length(),
          " @ ", est.sample_rate(), " Hz] and reference [", ref.channels(), " x ", ref.length(),
          " @ ", ref.sample_rate(), " Hz] differ");
  require<NonFiniteError>(est.finite() && ref.finite(), "demix_loss: non-finite input");
}

}  // namespace detail

/// Spectrograms use `stft_cfg`. Every term is a mean so the loss does not
/// scale with batch or segment size.
inline LossBreakdown demix_loss(const AudioSegment& est, const AudioSegment& ref,
                                const StftConfig& stft_cfg) {
  detail::check_loss_inputs(est, ref);
  LossBreakdown out;
  const auto& e = est.samples();
  const auto& r = ref.samples();
  for (std::size_t i = 0; i < e.size(); ++i) out.time_term += std::abs(e[i] - r[i]);
  out.time_term /= static_cast<double>(e.size());

  const auto es = stft(est, stft_cfg), rs = stft(ref, stft_cfg);
  const auto& ev = es.values();
  const auto& rv = rs.values();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    out.mag_term += std::abs(std::abs(ev[i]) - std::abs(rv[i]));
    out.real_term += std::abs(ev[i].real() - rv[i].real());
    out.imag_term += std::abs(ev[i].imag() - rv[i].imag());
  }
  const double n = static_cast<double>(ev.size());
  out.mag_term /= n;
  out.real_term /= n;
  out.imag_term /= n;
  out.total = out.time_term + out.mag_term + out.real_term + out.imag_term;
  return out;
}

/// Subgradient of demix_loss(...).total with respect to the estimate
/// (sign(0) = 0 at ties, and a zero-magnitude bin contributes nothing to the
/// magnitude term).
inline AudioSegment demix_loss_grad(const AudioSegment& est, const AudioSegment& ref,
                                    const StftConfig& stft_cfg, double scale = 1.0) {
  detail::check_loss_inputs(est, ref);
  const auto es = stft(est, stft_cfg), rs = stft(ref, stft_cfg);
  ComplexSpectrogram g(es.channels(), es.frames(), stft_cfg, es.sample_rate());
  const double wf = scale / static_cast<double>(es.values().size());
  for (std::size_t i = 0; i < es.values().size(); ++i) {
    const cplx y = es.values()[i], yr = rs.values()[i];
    const double mag = std::abs(y);
    const double dmag = mag > 0 ? detail::sign(mag - std::abs(yr)) / mag : 0.0;
    g.values()[i] = wf * cplx(detail::sign(y.real() - yr.real()) + dmag * y.real(),
                              detail::sign(y.imag() - yr.imag()) + dmag * y.imag());
  }
  AudioSegment grad = stft_backward(g, est.length());
  const double wt = scale / static_cast<double>(est.samples().size());
  for (std::size_t i = 0; i < grad.samples().size(); ++i)
    grad.samples()[i] += wt * detail::sign(est.samples()[i] - ref.samples()[i]);
  return grad;
}

}  // namespace bandmix
