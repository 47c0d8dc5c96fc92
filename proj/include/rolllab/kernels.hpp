#pragma once

#include <cstddef>

// Dense numeric kernels. Each kernel has a plain serial reference version and
// an OpenMP version; the tape always calls the OpenMP ones, the serial ones are
// kept for differential testing and benchmarking. All parallel loops are
// gather-style (each output element is written by exactly one thread with a
// fixed inner summation order), so results do not depend on the thread count.
namespace rolllab::kernels {

// 3x3 convolution, stride 1, zero padding 1.
// in: H x W x Cin, k: 3 x 3 x Cin x Cout, bias: Cout, out: H x W x Cout
// (row-major, channel-last)
void conv2d_forward_serial(const double* in, const double* k, const double* bias,
                           double* out, int H, int W, int Cin, int Cout);
void conv2d_forward_omp(const double* in, const double* k, const double* bias,
                        double* out, int H, int W, int Cin, int Cout);

// gradients wrt input, kernel and bias given upstream gradient gout
void conv2d_backward_serial(const double* in, const double* k, const double* gout,
                            double* gin, double* gk, double* gbias,
                            int H, int W, int Cin, int Cout);
void conv2d_backward_omp(const double* in, const double* k, const double* gout,
                         double* gin, double* gk, double* gbias,
                         int H, int W, int Cin, int Cout);

// 2x2 average pooling, stride 2. H and W must be even.
void avgpool2_forward(const double* in, double* out, int H, int W, int C);
void avgpool2_backward(const double* gout, double* gin, int H, int W, int C);

// out[m] = sum_n x[n] * w[n*M + m] + b[m]
void affine_forward(const double* x, const double* w, const double* b,
                    double* out, int N, int M);
void affine_backward(const double* x, const double* w, const double* gout,
                     double* gx, double* gw, double* gb, int N, int M);

}  // namespace rolllab::kernels
