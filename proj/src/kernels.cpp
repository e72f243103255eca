#include "attnpose/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace attnpose::kernels {

namespace {

bool initial_parallel() {
  const char* env = std::getenv("ATTNPOSE_KERNELS");
  if (env != nullptr && std::strcmp(env, "serial") == 0) return false;
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

std::atomic<bool> g_parallel{initial_parallel()};

// First output index >= 0 with oy*stride - pad + k >= 0.
inline int first_valid(int pad, int k, int stride) {
  const int a = pad - k;
  return a > 0 ? (a + stride - 1) / stride : 0;
}

// Last output index with oy*stride - pad + k <= limit - 1.
inline int last_valid(int limit, int pad, int k, int stride) {
  return (limit - 1 + pad - k) / stride;
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

// ---------------------------------------------------------------------------
// Serial reference implementations: plain gather loops, one output element at
// a time, accumulation order (ic, ky, kx) / (oc, ky, kx) / batch-ascending.
// ---------------------------------------------------------------------------

namespace serial {

void dense_forward(int batch, int in_dim, int out_dim, const double* x, const double* w,
                   const double* bias, double* y) {
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      for (int i = 0; i < in_dim; ++i) acc += w[static_cast<int64_t>(o) * in_dim + i] * x[static_cast<int64_t>(b) * in_dim + i];
      y[static_cast<int64_t>(b) * out_dim + o] = bias != nullptr ? acc + bias[o] : acc;
    }
  }
}

void dense_backward_input(int batch, int in_dim, int out_dim, const double* dy, const double* w,
                          double* dx) {
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o)
        acc += dy[static_cast<int64_t>(b) * out_dim + o] * w[static_cast<int64_t>(o) * in_dim + i];
      dx[static_cast<int64_t>(b) * in_dim + i] = acc;
    }
  }
}

void dense_backward_params(int batch, int in_dim, int out_dim, const double* dy, const double* x,
                           double* dw, double* dbias) {
  for (int o = 0; o < out_dim; ++o) {
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b)
        acc += dy[static_cast<int64_t>(b) * out_dim + o] * x[static_cast<int64_t>(b) * in_dim + i];
      dw[static_cast<int64_t>(o) * in_dim + i] += acc;
    }
    if (dbias != nullptr) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b) acc += dy[static_cast<int64_t>(b) * out_dim + o];
      dbias[o] += acc;
    }
  }
}

void conv2d_forward(const Conv2dShape& s, const double* x, const double* w, double* y) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int b = 0; b < s.batch; ++b) {
    for (int oc = 0; oc < s.out_ch; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int ic = 0; ic < s.in_ch; ++ic) {
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int iy = oy * s.stride - s.pad + ky;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int ix = ox * s.stride - s.pad + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += w[((static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel + ky) * s.kernel + kx] *
                       x[((static_cast<int64_t>(b) * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix];
              }
            }
          }
          y[((static_cast<int64_t>(b) * s.out_ch + oc) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dShape& s, const double* dy, const double* w, double* dx) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int b = 0; b < s.batch; ++b) {
    for (int ic = 0; ic < s.in_ch; ++ic) {
      for (int iy = 0; iy < s.in_h; ++iy) {
        for (int ix = 0; ix < s.in_w; ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < s.out_ch; ++oc) {
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int ny = iy + s.pad - ky;
              if (ny < 0 || ny % s.stride != 0) continue;
              const int oy = ny / s.stride;
              if (oy >= oh) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int nx = ix + s.pad - kx;
                if (nx < 0 || nx % s.stride != 0) continue;
                const int ox = nx / s.stride;
                if (ox >= ow) continue;
                acc += w[((static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel + ky) * s.kernel + kx] *
                       dy[((static_cast<int64_t>(b) * s.out_ch + oc) * oh + oy) * ow + ox];
              }
            }
          }
          dx[((static_cast<int64_t>(b) * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix] = acc;
        }
      }
    }
  }
}

void conv2d_backward_weights(const Conv2dShape& s, const double* dy, const double* x, double* dw) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int oc = 0; oc < s.out_ch; ++oc) {
    for (int ic = 0; ic < s.in_ch; ++ic) {
      for (int ky = 0; ky < s.kernel; ++ky) {
        for (int kx = 0; kx < s.kernel; ++kx) {
          double acc = 0.0;
          for (int b = 0; b < s.batch; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * s.stride - s.pad + ky;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride - s.pad + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += x[((static_cast<int64_t>(b) * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix] *
                       dy[((static_cast<int64_t>(b) * s.out_ch + oc) * oh + oy) * ow + ox];
              }
            }
          }
          dw[((static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel + ky) * s.kernel + kx] += acc;
        }
      }
    }
  }
}

void relu_forward(int64_t n, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(int64_t n, const double* x, const double* dy, double* dx) {
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void groupnorm_forward(int batch, int ch, int hw, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* inv_std) {
  const int cg = ch / groups;
  const int64_t gsize = static_cast<int64_t>(cg) * hw;
  for (int b = 0; b < batch; ++b) {
    for (int g = 0; g < groups; ++g) {
      const double* xg = x + (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
      double m = 0.0;
      for (int64_t i = 0; i < gsize; ++i) m += xg[i];
      m /= static_cast<double>(gsize);
      double var = 0.0;
      for (int64_t i = 0; i < gsize; ++i) {
        const double d = xg[i] - m;
        var += d * d;
      }
      var /= static_cast<double>(gsize);
      const double is = 1.0 / std::sqrt(var + eps);
      mean[static_cast<int64_t>(b) * groups + g] = m;
      inv_std[static_cast<int64_t>(b) * groups + g] = is;
      double* yg = y + (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
      for (int c = 0; c < cg; ++c) {
        const double ga = gamma[g * cg + c];
        const double be = beta[g * cg + c];
        for (int i = 0; i < hw; ++i) {
          yg[static_cast<int64_t>(c) * hw + i] = (xg[static_cast<int64_t>(c) * hw + i] - m) * is * ga + be;
        }
      }
    }
  }
}

void groupnorm_backward(int batch, int ch, int hw, int groups, const double* x,
                        const double* gamma, const double* mean, const double* inv_std,
                        const double* dy, double* dx, double* dgamma, double* dbeta) {
  const int cg = ch / groups;
  const int64_t gsize = static_cast<int64_t>(cg) * hw;
  for (int b = 0; b < batch; ++b) {
    for (int g = 0; g < groups; ++g) {
      const int64_t base = (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
      const double m = mean[static_cast<int64_t>(b) * groups + g];
      const double is = inv_std[static_cast<int64_t>(b) * groups + g];
      double sum_t = 0.0, sum_tx = 0.0;
      for (int c = 0; c < cg; ++c) {
        const double ga = gamma[g * cg + c];
        for (int i = 0; i < hw; ++i) {
          const int64_t idx = base + static_cast<int64_t>(c) * hw + i;
          const double t = dy[idx] * ga;
          const double xh = (x[idx] - m) * is;
          sum_t += t;
          sum_tx += t * xh;
        }
      }
      const double inv_n = 1.0 / static_cast<double>(gsize);
      for (int c = 0; c < cg; ++c) {
        const double ga = gamma[g * cg + c];
        for (int i = 0; i < hw; ++i) {
          const int64_t idx = base + static_cast<int64_t>(c) * hw + i;
          const double t = dy[idx] * ga;
          const double xh = (x[idx] - m) * is;
          dx[idx] = is * (t - sum_t * inv_n - xh * sum_tx * inv_n);
        }
      }
    }
  }
  for (int c = 0; c < ch; ++c) {
    const int g = c / cg;
    double dg = 0.0, db = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double m = mean[static_cast<int64_t>(b) * groups + g];
      const double is = inv_std[static_cast<int64_t>(b) * groups + g];
      const int64_t base = (static_cast<int64_t>(b) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) {
        const double xh = (x[base + i] - m) * is;
        dg += dy[base + i] * xh;
        db += dy[base + i];
      }
    }
    dgamma[c] += dg;
    dbeta[c] += db;
  }
}

void maxpool_forward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                     const double* x, double* y, int32_t* argmax) {
  const Conv2dShape s{batch, ch, h, w, ch, kernel, stride, pad};
  const int oh = s.out_h(), ow = s.out_w();
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* xs = x + (static_cast<int64_t>(b) * ch + c) * h * w;
      double* ys = y + (static_cast<int64_t>(b) * ch + c) * oh * ow;
      int32_t* as = argmax + (static_cast<int64_t>(b) * ch + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int32_t best_idx = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const double v = xs[static_cast<int64_t>(iy) * w + ix];
              if (v > best) {
                best = v;
                best_idx = static_cast<int32_t>(iy * w + ix);
              }
            }
          }
          ys[static_cast<int64_t>(oy) * ow + ox] = best;
          as[static_cast<int64_t>(oy) * ow + ox] = best_idx;
        }
      }
    }
  }
}

void maxpool_backward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                      const double* dy, const int32_t* argmax, double* dx) {
  const Conv2dShape s{batch, ch, h, w, ch, kernel, stride, pad};
  const int oh = s.out_h(), ow = s.out_w();
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      double* dxs = dx + (static_cast<int64_t>(b) * ch + c) * h * w;
      std::fill(dxs, dxs + static_cast<int64_t>(h) * w, 0.0);
      const double* dys = dy + (static_cast<int64_t>(b) * ch + c) * oh * ow;
      const int32_t* as = argmax + (static_cast<int64_t>(b) * ch + c) * oh * ow;
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) {
        if (as[i] >= 0) dxs[as[i]] += dys[i];
      }
    }
  }
}

void global_avgpool_forward(int batch, int ch, int hw, const double* x, double* y) {
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* xs = x + (static_cast<int64_t>(b) * ch + c) * hw;
      double acc = 0.0;
      for (int i = 0; i < hw; ++i) acc += xs[i];
      y[static_cast<int64_t>(b) * ch + c] = acc / static_cast<double>(hw);
    }
  }
}

void global_avgpool_backward(int batch, int ch, int hw, const double* dy, double* dx) {
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double g = dy[static_cast<int64_t>(b) * ch + c] / static_cast<double>(hw);
      double* dxs = dx + (static_cast<int64_t>(b) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) dxs[i] = g;
    }
  }
}

void softmax_rows(int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<int64_t>(r) * cols;
    double* yr = y + static_cast<int64_t>(r) * cols;
    double mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] /= sum;
  }
}

void softmax_backward_rows(int rows, int cols, const double* y, const double* dy, double* dx) {
  for (int r = 0; r < rows; ++r) {
    const double* yr = y + static_cast<int64_t>(r) * cols;
    const double* dyr = dy + static_cast<int64_t>(r) * cols;
    double* dxr = dx + static_cast<int64_t>(r) * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += dyr[c] * yr[c];
    for (int c = 0; c < cols; ++c) dxr[c] = yr[c] * (dyr[c] - dot);
  }
}

void adam_step(int64_t n, double* p, const double* g, double* m, double* v, double lr,
               double beta1, double beta2, double eps, double bias_corr1, double bias_corr2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias_corr1;
    const double vhat = v[i] / bias_corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations. Work is split by output ownership (each output
// element written by one thread) and inner accumulation runs in the same
// order as the serial reference, so results match it bitwise.
// ---------------------------------------------------------------------------

namespace par {

void dense_forward(int batch, int in_dim, int out_dim, const double* x, const double* w,
                   const double* bias, double* y) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    const double* xb = x + static_cast<int64_t>(b) * in_dim;
    double* yb = y + static_cast<int64_t>(b) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      const double* wo = w + static_cast<int64_t>(o) * in_dim;
      double acc = 0.0;
      for (int i = 0; i < in_dim; ++i) acc += wo[i] * xb[i];
      yb[o] = bias != nullptr ? acc + bias[o] : acc;
    }
  }
}

void dense_backward_input(int batch, int in_dim, int out_dim, const double* dy, const double* w,
                          double* dx) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    const double* dyb = dy + static_cast<int64_t>(b) * out_dim;
    double* dxb = dx + static_cast<int64_t>(b) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o) acc += dyb[o] * w[static_cast<int64_t>(o) * in_dim + i];
      dxb[i] = acc;
    }
  }
}

void dense_backward_params(int batch, int in_dim, int out_dim, const double* dy, const double* x,
                           double* dw, double* dbias) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_dim; ++o) {
    double* dwo = dw + static_cast<int64_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b)
        acc += dy[static_cast<int64_t>(b) * out_dim + o] * x[static_cast<int64_t>(b) * in_dim + i];
      dwo[i] += acc;
    }
    if (dbias != nullptr) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b) acc += dy[static_cast<int64_t>(b) * out_dim + o];
      dbias[o] += acc;
    }
  }
}

void conv2d_forward(const Conv2dShape& s, const double* x, const double* w, double* y) {
  const int oh = s.out_h(), ow = s.out_w();
  const int64_t plane_in = static_cast<int64_t>(s.in_h) * s.in_w;
  const int64_t plane_out = static_cast<int64_t>(oh) * ow;
  const int64_t jobs = static_cast<int64_t>(s.batch) * s.out_ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const int b = static_cast<int>(job / s.out_ch);
    const int oc = static_cast<int>(job % s.out_ch);
    double* ys = y + (static_cast<int64_t>(b) * s.out_ch + oc) * plane_out;
    std::fill(ys, ys + plane_out, 0.0);
    for (int ic = 0; ic < s.in_ch; ++ic) {
      const double* xs = x + (static_cast<int64_t>(b) * s.in_ch + ic) * plane_in;
      const double* ws = w + (static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel * s.kernel;
      for (int ky = 0; ky < s.kernel; ++ky) {
        const int oy0 = first_valid(s.pad, ky, s.stride);
        const int oy1 = std::min(oh - 1, last_valid(s.in_h, s.pad, ky, s.stride));
        for (int kx = 0; kx < s.kernel; ++kx) {
          const double wv = ws[ky * s.kernel + kx];
          const int ox0 = first_valid(s.pad, kx, s.stride);
          const int ox1 = std::min(ow - 1, last_valid(s.in_w, s.pad, kx, s.stride));
          for (int oy = oy0; oy <= oy1; ++oy) {
            const int iy = oy * s.stride - s.pad + ky;
            const double* xrow = xs + static_cast<int64_t>(iy) * s.in_w + (ox0 * s.stride - s.pad + kx);
            double* yrow = ys + static_cast<int64_t>(oy) * ow + ox0;
            const int n = ox1 - ox0;
            if (s.stride == 1) {
              for (int i = 0; i <= n; ++i) yrow[i] += wv * xrow[i];
            } else {
              for (int i = 0; i <= n; ++i) yrow[i] += wv * xrow[static_cast<int64_t>(i) * s.stride];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dShape& s, const double* dy, const double* w, double* dx) {
  const int oh = s.out_h(), ow = s.out_w();
  const int64_t plane_in = static_cast<int64_t>(s.in_h) * s.in_w;
  const int64_t plane_out = static_cast<int64_t>(oh) * ow;
  const int64_t jobs = static_cast<int64_t>(s.batch) * s.in_ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const int b = static_cast<int>(job / s.in_ch);
    const int ic = static_cast<int>(job % s.in_ch);
    double* dxs = dx + (static_cast<int64_t>(b) * s.in_ch + ic) * plane_in;
    std::fill(dxs, dxs + plane_in, 0.0);
    for (int oc = 0; oc < s.out_ch; ++oc) {
      const double* dys = dy + (static_cast<int64_t>(b) * s.out_ch + oc) * plane_out;
      const double* ws = w + (static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel * s.kernel;
      for (int ky = 0; ky < s.kernel; ++ky) {
        const int oy0 = first_valid(s.pad, ky, s.stride);
        const int oy1 = std::min(oh - 1, last_valid(s.in_h, s.pad, ky, s.stride));
        for (int kx = 0; kx < s.kernel; ++kx) {
          const double wv = ws[ky * s.kernel + kx];
          const int ox0 = first_valid(s.pad, kx, s.stride);
          const int ox1 = std::min(ow - 1, last_valid(s.in_w, s.pad, kx, s.stride));
          for (int oy = oy0; oy <= oy1; ++oy) {
            const int iy = oy * s.stride - s.pad + ky;
            double* dxrow = dxs + static_cast<int64_t>(iy) * s.in_w + (ox0 * s.stride - s.pad + kx);
            const double* dyrow = dys + static_cast<int64_t>(oy) * ow + ox0;
            const int n = ox1 - ox0;
            if (s.stride == 1) {
              for (int i = 0; i <= n; ++i) dxrow[i] += wv * dyrow[i];
            } else {
              for (int i = 0; i <= n; ++i) dxrow[static_cast<int64_t>(i) * s.stride] += wv * dyrow[i];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weights(const Conv2dShape& s, const double* dy, const double* x, double* dw) {
  const int oh = s.out_h(), ow = s.out_w();
  const int64_t plane_in = static_cast<int64_t>(s.in_h) * s.in_w;
  const int64_t plane_out = static_cast<int64_t>(oh) * ow;
  const int64_t jobs = static_cast<int64_t>(s.out_ch) * s.in_ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const int oc = static_cast<int>(job / s.in_ch);
    const int ic = static_cast<int>(job % s.in_ch);
    double* dws = dw + (static_cast<int64_t>(oc) * s.in_ch + ic) * s.kernel * s.kernel;
    for (int ky = 0; ky < s.kernel; ++ky) {
      const int oy0 = first_valid(s.pad, ky, s.stride);
      const int oy1 = std::min(oh - 1, last_valid(s.in_h, s.pad, ky, s.stride));
      for (int kx = 0; kx < s.kernel; ++kx) {
        const int ox0 = first_valid(s.pad, kx, s.stride);
        const int ox1 = std::min(ow - 1, last_valid(s.in_w, s.pad, kx, s.stride));
        double acc = 0.0;
        for (int b = 0; b < s.batch; ++b) {
          const double* xs = x + (static_cast<int64_t>(b) * s.in_ch + ic) * plane_in;
          const double* dys = dy + (static_cast<int64_t>(b) * s.out_ch + oc) * plane_out;
          for (int oy = oy0; oy <= oy1; ++oy) {
            const int iy = oy * s.stride - s.pad + ky;
            const double* xrow = xs + static_cast<int64_t>(iy) * s.in_w + (ox0 * s.stride - s.pad + kx);
            const double* dyrow = dys + static_cast<int64_t>(oy) * ow + ox0;
            const int n = ox1 - ox0;
            if (s.stride == 1) {
              for (int i = 0; i <= n; ++i) acc += xrow[i] * dyrow[i];
            } else {
              for (int i = 0; i <= n; ++i) acc += xrow[static_cast<int64_t>(i) * s.stride] * dyrow[i];
            }
          }
        }
        dws[ky * s.kernel + kx] += acc;
      }
    }
  }
}

void relu_forward(int64_t n, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(int64_t n, const double* x, const double* dy, double* dx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void groupnorm_forward(int batch, int ch, int hw, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* inv_std) {
  const int cg = ch / groups;
  const int64_t gsize = static_cast<int64_t>(cg) * hw;
  const int64_t jobs = static_cast<int64_t>(batch) * groups;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const int b = static_cast<int>(job / groups);
    const int g = static_cast<int>(job % groups);
    const double* xg = x + (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
    double m = 0.0;
    for (int64_t i = 0; i < gsize; ++i) m += xg[i];
    m /= static_cast<double>(gsize);
    double var = 0.0;
    for (int64_t i = 0; i < gsize; ++i) {
      const double d = xg[i] - m;
      var += d * d;
    }
    var /= static_cast<double>(gsize);
    const double is = 1.0 / std::sqrt(var + eps);
    mean[job] = m;
    inv_std[job] = is;
    double* yg = y + (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
    for (int c = 0; c < cg; ++c) {
      const double ga = gamma[g * cg + c];
      const double be = beta[g * cg + c];
      for (int i = 0; i < hw; ++i) {
        yg[static_cast<int64_t>(c) * hw + i] = (xg[static_cast<int64_t>(c) * hw + i] - m) * is * ga + be;
      }
    }
  }
}

void groupnorm_backward(int batch, int ch, int hw, int groups, const double* x,
                        const double* gamma, const double* mean, const double* inv_std,
                        const double* dy, double* dx, double* dgamma, double* dbeta) {
  const int cg = ch / groups;
  const int64_t gsize = static_cast<int64_t>(cg) * hw;
  const int64_t jobs = static_cast<int64_t>(batch) * groups;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const int b = static_cast<int>(job / groups);
    const int g = static_cast<int>(job % groups);
    const int64_t base = (static_cast<int64_t>(b) * ch + static_cast<int64_t>(g) * cg) * hw;
    const double m = mean[job];
    const double is = inv_std[job];
    double sum_t = 0.0, sum_tx = 0.0;
    for (int c = 0; c < cg; ++c) {
      const double ga = gamma[g * cg + c];
      for (int i = 0; i < hw; ++i) {
        const int64_t idx = base + static_cast<int64_t>(c) * hw + i;
        const double t = dy[idx] * ga;
        const double xh = (x[idx] - m) * is;
        sum_t += t;
        sum_tx += t * xh;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(gsize);
    for (int c = 0; c < cg; ++c) {
      const double ga = gamma[g * cg + c];
      for (int i = 0; i < hw; ++i) {
        const int64_t idx = base + static_cast<int64_t>(c) * hw + i;
        const double t = dy[idx] * ga;
        const double xh = (x[idx] - m) * is;
        dx[idx] = is * (t - sum_t * inv_n - xh * sum_tx * inv_n);
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    const int g = c / cg;
    double dg = 0.0, db = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double m = mean[static_cast<int64_t>(b) * groups + g];
      const double is = inv_std[static_cast<int64_t>(b) * groups + g];
      const int64_t base = (static_cast<int64_t>(b) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) {
        const double xh = (x[base + i] - m) * is;
        dg += dy[base + i] * xh;
        db += dy[base + i];
      }
    }
    dgamma[c] += dg;
    dbeta[c] += db;
  }
}

void maxpool_forward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                     const double* x, double* y, int32_t* argmax) {
  const Conv2dShape s{batch, ch, h, w, ch, kernel, stride, pad};
  const int oh = s.out_h(), ow = s.out_w();
  const int64_t jobs = static_cast<int64_t>(batch) * ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const double* xs = x + job * h * w;
    double* ys = y + job * oh * ow;
    int32_t* as = argmax + job * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int32_t best_idx = -1;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            const double v = xs[static_cast<int64_t>(iy) * w + ix];
            if (v > best) {
              best = v;
              best_idx = static_cast<int32_t>(iy * w + ix);
            }
          }
        }
        ys[static_cast<int64_t>(oy) * ow + ox] = best;
        as[static_cast<int64_t>(oy) * ow + ox] = best_idx;
      }
    }
  }
}

void maxpool_backward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                      const double* dy, const int32_t* argmax, double* dx) {
  const Conv2dShape s{batch, ch, h, w, ch, kernel, stride, pad};
  const int oh = s.out_h(), ow = s.out_w();
  const int64_t jobs = static_cast<int64_t>(batch) * ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    double* dxs = dx + job * h * w;
    std::fill(dxs, dxs + static_cast<int64_t>(h) * w, 0.0);
    const double* dys = dy + job * oh * ow;
    const int32_t* as = argmax + job * oh * ow;
    for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) {
      if (as[i] >= 0) dxs[as[i]] += dys[i];
    }
  }
}

void global_avgpool_forward(int batch, int ch, int hw, const double* x, double* y) {
  const int64_t jobs = static_cast<int64_t>(batch) * ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const double* xs = x + job * hw;
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) acc += xs[i];
    y[job] = acc / static_cast<double>(hw);
  }
}

void global_avgpool_backward(int batch, int ch, int hw, const double* dy, double* dx) {
  const int64_t jobs = static_cast<int64_t>(batch) * ch;
#pragma omp parallel for schedule(static)
  for (int64_t job = 0; job < jobs; ++job) {
    const double g = dy[job] / static_cast<double>(hw);
    double* dxs = dx + job * hw;
    for (int i = 0; i < hw; ++i) dxs[i] = g;
  }
}

void softmax_rows(int rows, int cols, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<int64_t>(r) * cols;
    double* yr = y + static_cast<int64_t>(r) * cols;
    double mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] /= sum;
  }
}

void softmax_backward_rows(int rows, int cols, const double* y, const double* dy, double* dx) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* yr = y + static_cast<int64_t>(r) * cols;
    const double* dyr = dy + static_cast<int64_t>(r) * cols;
    double* dxr = dx + static_cast<int64_t>(r) * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += dyr[c] * yr[c];
    for (int c = 0; c < cols; ++c) dxr[c] = yr[c] * (dyr[c] - dot);
  }
}

void adam_step(int64_t n, double* p, const double* g, double* m, double* v, double lr,
               double beta1, double beta2, double eps, double bias_corr1, double bias_corr2) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias_corr1;
    const double vhat = v[i] / bias_corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace par

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

#define ATTNPOSE_DISPATCH(call) \
  if (parallel_enabled()) {     \
    par::call;                  \
  } else {                      \
    serial::call;               \
  }

void dense_forward(int batch, int in_dim, int out_dim, const double* x, const double* w,
                   const double* bias, double* y) {
  ATTNPOSE_DISPATCH(dense_forward(batch, in_dim, out_dim, x, w, bias, y))
}
void dense_backward_input(int batch, int in_dim, int out_dim, const double* dy, const double* w,
                          double* dx) {
  ATTNPOSE_DISPATCH(dense_backward_input(batch, in_dim, out_dim, dy, w, dx))
}
void dense_backward_params(int batch, int in_dim, int out_dim, const double* dy, const double* x,
                           double* dw, double* dbias) {
  ATTNPOSE_DISPATCH(dense_backward_params(batch, in_dim, out_dim, dy, x, dw, dbias))
}
void conv2d_forward(const Conv2dShape& s, const double* x, const double* w, double* y) {
  ATTNPOSE_DISPATCH(conv2d_forward(s, x, w, y))
}
void conv2d_backward_input(const Conv2dShape& s, const double* dy, const double* w, double* dx) {
  ATTNPOSE_DISPATCH(conv2d_backward_input(s, dy, w, dx))
}
void conv2d_backward_weights(const Conv2dShape& s, const double* dy, const double* x, double* dw) {
  ATTNPOSE_DISPATCH(conv2d_backward_weights(s, dy, x, dw))
}
void relu_forward(int64_t n, const double* x, double* y) {
  ATTNPOSE_DISPATCH(relu_forward(n, x, y))
}
void relu_backward(int64_t n, const double* x, const double* dy, double* dx) {
  ATTNPOSE_DISPATCH(relu_backward(n, x, dy, dx))
}
void groupnorm_forward(int batch, int ch, int hw, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* inv_std) {
  ATTNPOSE_DISPATCH(groupnorm_forward(batch, ch, hw, groups, eps, x, gamma, beta, y, mean, inv_std))
}
void groupnorm_backward(int batch, int ch, int hw, int groups, const double* x,
                        const double* gamma, const double* mean, const double* inv_std,
                        const double* dy, double* dx, double* dgamma, double* dbeta) {
  ATTNPOSE_DISPATCH(
      groupnorm_backward(batch, ch, hw, groups, x, gamma, mean, inv_std, dy, dx, dgamma, dbeta))
}
void maxpool_forward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                     const double* x, double* y, int32_t* argmax) {
  ATTNPOSE_DISPATCH(maxpool_forward(batch, ch, h, w, kernel, stride, pad, x, y, argmax))
}
void maxpool_backward(int batch, int ch, int h, int w, int kernel, int stride, int pad,
                      const double* dy, const int32_t* argmax, double* dx) {
  ATTNPOSE_DISPATCH(maxpool_backward(batch, ch, h, w, kernel, stride, pad, dy, argmax, dx))
}
void global_avgpool_forward(int batch, int ch, int hw, const double* x, double* y) {
  ATTNPOSE_DISPATCH(global_avgpool_forward(batch, ch, hw, x, y))
}
void global_avgpool_backward(int batch, int ch, int hw, const double* dy, double* dx) {
  ATTNPOSE_DISPATCH(global_avgpool_backward(batch, ch, hw, dy, dx))
}
void softmax_rows(int rows, int cols, const double* x, double* y) {
  ATTNPOSE_DISPATCH(softmax_rows(rows, cols, x, y))
}
void softmax_backward_rows(int rows, int cols, const double* y, const double* dy, double* dx) {
  ATTNPOSE_DISPATCH(softmax_backward_rows(rows, cols, y, dy, dx))
}
void adam_step(int64_t n, double* p, const double* g, double* m, double* v, double lr,
               double beta1, double beta2, double eps, double bias_corr1, double bias_corr2) {
  ATTNPOSE_DISPATCH(adam_step(n, p, g, m, v, lr, beta1, beta2, eps, bias_corr1, bias_corr2))
}

#undef ATTNPOSE_DISPATCH

}  // namespace attnpose::kernels
