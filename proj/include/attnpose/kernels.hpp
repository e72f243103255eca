#pragma once

// Numeric kernels behind the network layers, implemented twice:
//
//   kernels::serial::*  straightforward reference loops
//   kernels::par::*     OpenMP versions of the same math
//
// Every output element is owned by exactly one thread and accumulated in the
// same order as the serial reference, so the two paths agree bitwise; the
// test suite asserts that and the bench target times them against each other.
// The unprefixed functions dispatch on a process-wide switch (default: the
// OpenMP path when compiled with OpenMP; override with set_parallel() or
// ATTNPOSE_KERNELS=serial|parallel).
//
// Conventions: tensors are row-major doubles. Forward kernels and
// backward-input kernels overwrite their outputs; backward-parameter kernels
// accumulate (+=) so minibatch gradients can be summed across calls.

#include <cstdint>

namespace attnpose::kernels {

void set_parallel(bool on);
bool parallel_enabled();

struct Conv2dShape {
  int batch = 0;
  int in_ch = 0;
  int in_h = 0;
  int in_w = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

#define ATTNPOSE_KERNEL_DECLS                                                                  \
  void dense_forward(int batch, int in_dim, int out_dim, const double* x, const double* w,     \
                     const double* bias, double* y);                                           \
  void dense_backward_input(int batch, int in_dim, int out_dim, const double* dy,              \
                            const double* w, double* dx);                                      \
  void dense_backward_params(int batch, int in_dim, int out_dim, const double* dy,             \
                             const double* x, double* dw, double* dbias);                      \
  void conv2d_forward(const Conv2dShape& s, const double* x, const double* w, double* y);      \
  void conv2d_backward_input(const Conv2dShape& s, const double* dy, const double* w,          \
                             double* dx);                                                      \
  void conv2d_backward_weights(const Conv2dShape& s, const double* dy, const double* x,        \
                               double* dw);                                                    \
  void relu_forward(int64_t n, const double* x, double* y);                                    \
  void relu_backward(int64_t n, const double* x, const double* dy, double* dx);                \
  void groupnorm_forward(int batch, int ch, int hw, int groups, double eps, const double* x,   \
                         const double* gamma, const double* beta, double* y, double* mean,     \
                         double* inv_std);                                                     \
  void groupnorm_backward(int batch, int ch, int hw, int groups, const double* x,              \
                          const double* gamma, const double* mean, const double* inv_std,      \
                          const double* dy, double* dx, double* dgamma, double* dbeta);        \
  void maxpool_forward(int batch, int ch, int h, int w, int kernel, int stride, int pad,       \
                       const double* x, double* y, int32_t* argmax);                           \
  void maxpool_backward(int batch, int ch, int h, int w, int kernel, int stride, int pad,      \
                        const double* dy, const int32_t* argmax, double* dx);                  \
  void global_avgpool_forward(int batch, int ch, int hw, const double* x, double* y);          \
  void global_avgpool_backward(int batch, int ch, int hw, const double* dy, double* dx);       \
  void softmax_rows(int rows, int cols, const double* x, double* y);                           \
  void softmax_backward_rows(int rows, int cols, const double* y, const double* dy,            \
                             double* dx);                                                      \
  void adam_step(int64_t n, double* p, const double* g, double* m, double* v, double lr,       \
                 double beta1, double beta2, double eps, double bias_corr1, double bias_corr2)

namespace serial {
ATTNPOSE_KERNEL_DECLS;
}
namespace par {
ATTNPOSE_KERNEL_DECLS;
}
ATTNPOSE_KERNEL_DECLS;

#undef ATTNPOSE_KERNEL_DECLS

}  // namespace attnpose::kernels
