#pragma once

#include "bandmix/stft.hpp"
#include "bandmix/tensor.hpp"

namespace bandmix {

/// Real and imaginary parts of a complex ratio mask, each [C x T x F].
template <typename T>
struct MaskPair {
  Tensor<T> real;
  Tensor<T> imag;
};

/// (mask_real + i mask_imag) * spec, elementwise.
template <typename T>
ComplexSpectrogram apply_complex_mask(const ComplexSpectrogram& spec, const Tensor<T>& mask_real,
                                      const Tensor<T>& mask_imag) {
  const Shape expect{spec.channels(), spec.frames(), spec.bins()};
  require(mask_real.shape() == expect && mask_imag.shape() == expect,
          "apply_complex_mask: mask shapes ", shape_str(mask_real.shape()), "/",
          shape_str(mask_imag.shape()), " do not match spectrogram ", shape_str(expect));
  require<NonFiniteError>(mask_real.finite() && mask_imag.finite(),
                          "apply_complex_mask: non-finite mask");
  ComplexSpectrogram out(spec.channels(), spec.frames(), spec.config(), spec.sample_rate());
  const auto& x = spec.values();
  auto& y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = cplx(static_cast<double>(mask_real[i]), static_cast<double>(mask_imag[i])) * x[i];
  return out;
}

template <typename T>
ComplexSpectrogram apply_complex_mask(const ComplexSpectrogram& spec, const MaskPair<T>& mask) {
  return apply_complex_mask(spec, mask.real, mask.imag);
}

/// Gradient of apply_complex_mask with respect to the mask, given
/// grad_out = dL/dRe(out) + i dL/dIm(out).
template <typename T>
MaskPair<T> apply_complex_mask_backward(const ComplexSpectrogram& spec,
                                        const ComplexSpectrogram& grad_out) {
  require(spec.same_shape(grad_out), "apply_complex_mask_backward: shape mismatch");
  const Shape shape{spec.channels(), spec.frames(), spec.bins()};
  MaskPair<T> g{Tensor<T>(shape), Tensor<T>(shape)};
  const auto& x = spec.values();
  const auto& go = grad_out.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const cplx d = go[i] * std::conj(x[i]);
    g.real[i] = static_cast<T>(d.real());
    g.imag[i] = static_cast<T>(d.imag());
  }
  return g;
}

}  // namespace bandmix
