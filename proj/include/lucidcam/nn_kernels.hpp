#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

// Raw layer kernels, templated on the scalar type. The public float32 ops in
// nn.hpp wrap these; the gradient checker instantiates them with double to get
// a high-precision forward pass for finite differences.

namespace lucidcam::kernels {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Valid output range [ow0, ow1) for a kernel column kw, so that
// iw = ow * stride + kw - pad stays inside [0, w).
inline void conv_col_range(int w, int ow_total, int kw, int stride, int pad,
                           int& ow0, int& ow1) {
    ow0 = pad > kw ? (pad - kw + stride - 1) / stride : 0;
    int last_num = w - 1 + pad - kw;
    ow1 = last_num < 0 ? 0 : std::min(ow_total, last_num / stride + 1);
    if (ow1 < ow0) ow1 = ow0;
}

template <typename T>
void conv2d_fwd(const T* in, int cin, int h, int w,
                const T* wgt, int cout, int k,
                const T* bias, int stride, int pad,
                T* out, int oh_total, int ow_total) {
    for (int oc = 0; oc < cout; ++oc) {
        T* outc = out + static_cast<std::size_t>(oc) * oh_total * ow_total;
        std::fill(outc, outc + static_cast<std::size_t>(oh_total) * ow_total, bias[oc]);
        for (int ic = 0; ic < cin; ++ic) {
            const T* inc = in + static_cast<std::size_t>(ic) * h * w;
            const T* wk = wgt + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    T wv = wk[kh * k + kw];
                    int ow0, ow1;
                    conv_col_range(w, ow_total, kw, stride, pad, ow0, ow1);
                    for (int oh = 0; oh < oh_total; ++oh) {
                        int ih = oh * stride + kh - pad;
                        if (ih < 0 || ih >= h) continue;
                        const T* src = inc + static_cast<std::size_t>(ih) * w +
                                       (ow0 * stride + kw - pad);
                        T* dst = outc + static_cast<std::size_t>(oh) * ow_total + ow0;
                        int n = ow1 - ow0;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) dst[i] += wv * src[i];
                        } else {
                            for (int i = 0; i < n; ++i) dst[i] += wv * src[i * stride];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_bwd_input(const T* wgt, int cin, int cout, int k,
                      const T* gout, int oh_total, int ow_total,
                      int stride, int pad,
                      T* gin, int h, int w) {
    std::fill(gin, gin + static_cast<std::size_t>(cin) * h * w, T(0));
    for (int oc = 0; oc < cout; ++oc) {
        const T* goutc = gout + static_cast<std::size_t>(oc) * oh_total * ow_total;
        for (int ic = 0; ic < cin; ++ic) {
            T* ginc = gin + static_cast<std::size_t>(ic) * h * w;
            const T* wk = wgt + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    T wv = wk[kh * k + kw];
                    int ow0, ow1;
                    conv_col_range(w, ow_total, kw, stride, pad, ow0, ow1);
                    for (int oh = 0; oh < oh_total; ++oh) {
                        int ih = oh * stride + kh - pad;
                        if (ih < 0 || ih >= h) continue;
                        const T* g = goutc + static_cast<std::size_t>(oh) * ow_total + ow0;
                        T* dst = ginc + static_cast<std::size_t>(ih) * w +
                                 (ow0 * stride + kw - pad);
                        int n = ow1 - ow0;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) dst[i] += wv * g[i];
                        } else {
                            for (int i = 0; i < n; ++i) dst[i * stride] += wv * g[i];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_bwd_params(const T* in, int cin, int h, int w,
                       const T* gout, int cout, int oh_total, int ow_total,
                       int k, int stride, int pad,
                       T* gwgt, T* gbias) {
    for (int oc = 0; oc < cout; ++oc) {
        const T* goutc = gout + static_cast<std::size_t>(oc) * oh_total * ow_total;
        double bacc = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh_total) * ow_total; ++i) {
            bacc += static_cast<double>(goutc[i]);
        }
        gbias[oc] = static_cast<T>(bacc);
        for (int ic = 0; ic < cin; ++ic) {
            const T* inc = in + static_cast<std::size_t>(ic) * h * w;
            T* gw = gwgt + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    int ow0, ow1;
                    conv_col_range(w, ow_total, kw, stride, pad, ow0, ow1);
                    double acc = 0.0;
                    for (int oh = 0; oh < oh_total; ++oh) {
                        int ih = oh * stride + kh - pad;
                        if (ih < 0 || ih >= h) continue;
                        const T* g = goutc + static_cast<std::size_t>(oh) * ow_total + ow0;
                        const T* src = inc + static_cast<std::size_t>(ih) * w +
                                       (ow0 * stride + kw - pad);
                        int n = ow1 - ow0;
                        T rowacc = T(0);
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) rowacc += g[i] * src[i];
                        } else {
                            for (int i = 0; i < n; ++i) rowacc += g[i] * src[i * stride];
                        }
                        acc += static_cast<double>(rowacc);
                    }
                    gw[kh * k + kw] = static_cast<T>(acc);
                }
            }
        }
    }
}

template <typename T>
void maxpool_fwd(const T* in, int c, int h, int w, int k, int stride,
                 T* out, int oh_total, int ow_total) {
    for (int ch = 0; ch < c; ++ch) {
        const T* inc = in + static_cast<std::size_t>(ch) * h * w;
        T* outc = out + static_cast<std::size_t>(ch) * oh_total * ow_total;
        for (int oh = 0; oh < oh_total; ++oh) {
            for (int ow = 0; ow < ow_total; ++ow) {
                int ih0 = oh * stride;
                int iw0 = ow * stride;
                T best = inc[static_cast<std::size_t>(ih0) * w + iw0];
                for (int i = 0; i < k; ++i) {
                    const T* row = inc + static_cast<std::size_t>(ih0 + i) * w + iw0;
                    for (int j = 0; j < k; ++j) {
                        if (row[j] > best) best = row[j];
                    }
                }
                outc[static_cast<std::size_t>(oh) * ow_total + ow] = best;
            }
        }
    }
}

// Routes each window's gradient to the first maximum in row-major order.
template <typename T>
void maxpool_bwd(const T* in, int c, int h, int w, int k, int stride,
                 const T* gout, int oh_total, int ow_total, T* gin) {
    std::fill(gin, gin + static_cast<std::size_t>(c) * h * w, T(0));
    for (int ch = 0; ch < c; ++ch) {
        const T* inc = in + static_cast<std::size_t>(ch) * h * w;
        T* ginc = gin + static_cast<std::size_t>(ch) * h * w;
        const T* goutc = gout + static_cast<std::size_t>(ch) * oh_total * ow_total;
        for (int oh = 0; oh < oh_total; ++oh) {
            for (int ow = 0; ow < ow_total; ++ow) {
                int ih0 = oh * stride;
                int iw0 = ow * stride;
                int best_i = 0, best_j = 0;
                T best = inc[static_cast<std::size_t>(ih0) * w + iw0];
                for (int i = 0; i < k; ++i) {
                    const T* row = inc + static_cast<std::size_t>(ih0 + i) * w + iw0;
                    for (int j = 0; j < k; ++j) {
                        if (row[j] > best) {
                            best = row[j];
                            best_i = i;
                            best_j = j;
                        }
                    }
                }
                ginc[static_cast<std::size_t>(ih0 + best_i) * w + iw0 + best_j] +=
                    goutc[static_cast<std::size_t>(oh) * ow_total + ow];
            }
        }
    }
}

template <typename T>
void relu_fwd(const T* in, std::size_t n, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

// Subgradient at exactly zero is zero.
template <typename T>
void relu_bwd(const T* in, const T* gout, std::size_t n, T* gin) {
    for (std::size_t i = 0; i < n; ++i) gin[i] = in[i] > T(0) ? gout[i] : T(0);
}

template <typename T>
void gap_fwd(const T* in, int c, int h, int w, T* out) {
    double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        const T* inc = in + static_cast<std::size_t>(ch) * h * w;
        double acc = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
            acc += static_cast<double>(inc[i]);
        }
        out[ch] = static_cast<T>(acc * inv);
    }
}

template <typename T>
void gap_bwd(const T* gout, int c, int h, int w, T* gin) {
    for (int ch = 0; ch < c; ++ch) {
        T g = gout[ch] / static_cast<T>(h * w);
        T* ginc = gin + static_cast<std::size_t>(ch) * h * w;
        std::fill(ginc, ginc + static_cast<std::size_t>(h) * w, g);
    }
}

template <typename T>
void dense_fwd(const T* x, int n_in, const T* wgt, int n_out, const T* bias, T* y) {
    for (int o = 0; o < n_out; ++o) {
        const T* row = wgt + static_cast<std::size_t>(o) * n_in;
        double acc = static_cast<double>(bias[o]);
        for (int i = 0; i < n_in; ++i) acc += static_cast<double>(row[i]) * x[i];
        y[o] = static_cast<T>(acc);
    }
}

template <typename T>
void dense_bwd(const T* x, int n_in, const T* wgt, int n_out, const T* gout,
               T* gx, T* gwgt, T* gbias) {
    for (int i = 0; i < n_in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < n_out; ++o) {
            acc += static_cast<double>(wgt[static_cast<std::size_t>(o) * n_in + i]) * gout[o];
        }
        gx[i] = static_cast<T>(acc);
    }
    for (int o = 0; o < n_out; ++o) {
        T g = gout[o];
        T* gw = gwgt + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) gw[i] = g * x[i];
        gbias[o] = g;
    }
}

} // namespace lucidcam::kernels
