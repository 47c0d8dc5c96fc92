#include "rolllab/kernels.hpp"

#include <cstring>

namespace rolllab::kernels {

void conv2d_forward_serial(const double* in, const double* k, const double* bias,
                           double* out, int H, int W, int Cin, int Cout) {
    for (int y = 0; y < H; y++) {
        for (int x = 0; x < W; x++) {
            for (int co = 0; co < Cout; co++) {
                double acc = bias[co];
                for (int kh = 0; kh < 3; kh++) {
                    int yy = y + kh - 1;
                    if (yy < 0 || yy >= H) continue;
                    for (int kw = 0; kw < 3; kw++) {
                        int xx = x + kw - 1;
                        if (xx < 0 || xx >= W) continue;
                        for (int ci = 0; ci < Cin; ci++) {
                            acc += in[(yy * W + xx) * Cin + ci] *
                                   k[((kh * 3 + kw) * Cin + ci) * Cout + co];
                        }
                    }
                }
                out[(y * W + x) * Cout + co] = acc;
            }
        }
    }
}

void conv2d_forward_omp(const double* in, const double* k, const double* bias,
                        double* out, int H, int W, int Cin, int Cout) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; y++) {
        double* orow = out + y * W * Cout;
        for (int x = 0; x < W; x++) {
            double* o = orow + x * Cout;
            for (int co = 0; co < Cout; co++) o[co] = bias[co];
            for (int kh = 0; kh < 3; kh++) {
                int yy = y + kh - 1;
                if (yy < 0 || yy >= H) continue;
                for (int kw = 0; kw < 3; kw++) {
                    int xx = x + kw - 1;
                    if (xx < 0 || xx >= W) continue;
                    const double* irow = in + (yy * W + xx) * Cin;
                    const double* kk = k + (kh * 3 + kw) * Cin * Cout;
                    for (int ci = 0; ci < Cin; ci++) {
                        double v = irow[ci];
                        const double* ks = kk + ci * Cout;
                        for (int co = 0; co < Cout; co++) o[co] += v * ks[co];
                    }
                }
            }
        }
    }
}

void conv2d_backward_serial(const double* in, const double* k, const double* gout,
                            double* gin, double* gk, double* gbias,
                            int H, int W, int Cin, int Cout) {
    for (int y = 0; y < H; y++)
        for (int x = 0; x < W; x++)
            for (int ci = 0; ci < Cin; ci++) {
                double acc = 0;
                for (int kh = 0; kh < 3; kh++) {
                    int yo = y - kh + 1;
                    if (yo < 0 || yo >= H) continue;
                    for (int kw = 0; kw < 3; kw++) {
                        int xo = x - kw + 1;
                        if (xo < 0 || xo >= W) continue;
                        for (int co = 0; co < Cout; co++)
                            acc += gout[(yo * W + xo) * Cout + co] *
                                   k[((kh * 3 + kw) * Cin + ci) * Cout + co];
                    }
                }
                gin[(y * W + x) * Cin + ci] += acc;
            }
    for (int kh = 0; kh < 3; kh++)
        for (int kw = 0; kw < 3; kw++)
            for (int ci = 0; ci < Cin; ci++)
                for (int co = 0; co < Cout; co++) {
                    double acc = 0;
                    for (int y = 0; y < H; y++) {
                        int yy = y + kh - 1;
                        if (yy < 0 || yy >= H) continue;
                        for (int x = 0; x < W; x++) {
                            int xx = x + kw - 1;
                            if (xx < 0 || xx >= W) continue;
                            acc += in[(yy * W + xx) * Cin + ci] *
                                   gout[(y * W + x) * Cout + co];
                        }
                    }
                    gk[((kh * 3 + kw) * Cin + ci) * Cout + co] += acc;
                }
    for (int co = 0; co < Cout; co++) {
        double acc = 0;
        for (int p = 0; p < H * W; p++) acc += gout[p * Cout + co];
        gbias[co] += acc;
    }
}

void conv2d_backward_omp(const double* in, const double* k, const double* gout,
                         double* gin, double* gk, double* gbias,
                         int H, int W, int Cin, int Cout) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; y++) {
        for (int x = 0; x < W; x++) {
            double* g = gin + (y * W + x) * Cin;
            for (int kh = 0; kh < 3; kh++) {
                int yo = y - kh + 1;
                if (yo < 0 || yo >= H) continue;
                for (int kw = 0; kw < 3; kw++) {
                    int xo = x - kw + 1;
                    if (xo < 0 || xo >= W) continue;
                    const double* go = gout + (yo * W + xo) * Cout;
                    const double* kk = k + (kh * 3 + kw) * Cin * Cout;
                    for (int ci = 0; ci < Cin; ci++) {
                        const double* ks = kk + ci * Cout;
                        double acc = 0;
                        for (int co = 0; co < Cout; co++) acc += go[co] * ks[co];
                        g[ci] += acc;
                    }
                }
            }
        }
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int kh = 0; kh < 3; kh++)
        for (int kw = 0; kw < 3; kw++) {
            double* gks = gk + (kh * 3 + kw) * Cin * Cout;
            for (int y = 0; y < H; y++) {
                int yy = y + kh - 1;
                if (yy < 0 || yy >= H) continue;
                for (int x = 0; x < W; x++) {
                    int xx = x + kw - 1;
                    if (xx < 0 || xx >= W) continue;
                    const double* irow = in + (yy * W + xx) * Cin;
                    const double* go = gout + (y * W + x) * Cout;
                    for (int ci = 0; ci < Cin; ci++) {
                        double v = irow[ci];
                        double* gr = gks + ci * Cout;
                        for (int co = 0; co < Cout; co++) gr[co] += v * go[co];
                    }
                }
            }
        }
    for (int co = 0; co < Cout; co++) {
        double acc = 0;
        for (int p = 0; p < H * W; p++) acc += gout[p * Cout + co];
        gbias[co] += acc;
    }
}

void avgpool2_forward(const double* in, double* out, int H, int W, int C) {
    int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < Ho; y++)
        for (int x = 0; x < Wo; x++)
            for (int c = 0; c < C; c++) {
                double s = in[((2 * y) * W + 2 * x) * C + c] +
                           in[((2 * y) * W + 2 * x + 1) * C + c] +
                           in[((2 * y + 1) * W + 2 * x) * C + c] +
                           in[((2 * y + 1) * W + 2 * x + 1) * C + c];
                out[(y * Wo + x) * C + c] = 0.25 * s;
            }
}

void avgpool2_backward(const double* gout, double* gin, int H, int W, int C) {
    int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; y++)
        for (int x = 0; x < W; x++)
            for (int c = 0; c < C; c++)
                gin[(y * W + x) * C + c] +=
                    0.25 * gout[((y / 2) * Wo + x / 2) * C + c];
}

void affine_forward(const double* x, const double* w, const double* b,
                    double* out, int N, int M) {
    for (int m = 0; m < M; m++) out[m] = b[m];
    for (int n = 0; n < N; n++) {
        double v = x[n];
        const double* wr = w + n * M;
        for (int m = 0; m < M; m++) out[m] += v * wr[m];
    }
}

void affine_backward(const double* x, const double* w, const double* gout,
                     double* gx, double* gw, double* gb, int N, int M) {
    for (int n = 0; n < N; n++) {
        const double* wr = w + n * M;
        double acc = 0;
        for (int m = 0; m < M; m++) acc += gout[m] * wr[m];
        gx[n] += acc;
        double v = x[n];
        double* gwr = gw + n * M;
        for (int m = 0; m < M; m++) gwr[m] += v * gout[m];
    }
    for (int m = 0; m < M; m++) gb[m] += gout[m];
}

}  // namespace rolllab::kernels
