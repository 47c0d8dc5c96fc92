#include "rolllab/tensor.hpp"

#include <cmath>

#include "rolllab/kernels.hpp"

namespace rolllab::grad {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        fail(Error::Kind::shape, std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::push(int size, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{size, std::move(back)});
    grads_.emplace_back();
    return int(nodes_.size()) - 1;
}

std::vector<double>& Tape::gref(int node) {
    auto& g = grads_[size_t(node)];
    if (g.empty()) g.assign(size_t(nodes_[size_t(node)].size), 0.0);
    return g;
}

void Tape::watch(Tensor& t) { t.node = push(t.size()); }

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape);
    for (int i = 0; i < a.size(); i++) out[i] = a[i] + b[i];
    int an = a.node, bn = b.node;
    out.node = push(out.size(), [an, bn](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        if (an >= 0) {
            auto& g = tp.gref(an);
            for (size_t i = 0; i < go.size(); i++) g[i] += go[i];
        }
        if (bn >= 0) {
            auto& g = tp.gref(bn);
            for (size_t i = 0; i < go.size(); i++) g[i] += go[i];
        }
    });
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape);
    for (int i = 0; i < a.size(); i++) out[i] = a[i] - b[i];
    int an = a.node, bn = b.node;
    out.node = push(out.size(), [an, bn](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        if (an >= 0) {
            auto& g = tp.gref(an);
            for (size_t i = 0; i < go.size(); i++) g[i] += go[i];
        }
        if (bn >= 0) {
            auto& g = tp.gref(bn);
            for (size_t i = 0; i < go.size(); i++) g[i] -= go[i];
        }
    });
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape);
    for (int i = 0; i < a.size(); i++) out[i] = a[i] * b[i];
    Tensor ac = a, bc = b;
    out.node = push(out.size(), [ac, bc](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        if (ac.node >= 0) {
            auto& g = tp.gref(ac.node);
            for (size_t i = 0; i < go.size(); i++) g[i] += go[i] * bc[int(i)];
        }
        if (bc.node >= 0) {
            auto& g = tp.gref(bc.node);
            for (size_t i = 0; i < go.size(); i++) g[i] += go[i] * ac[int(i)];
        }
    });
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape);
    for (int i = 0; i < a.size(); i++) out[i] = a[i] * c;
    int an = a.node;
    out.node = push(out.size(), [an, c](Tape& tp) {
        if (an < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        auto& g = tp.gref(an);
        for (size_t i = 0; i < go.size(); i++) g[i] += go[i] * c;
    });
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    double s = 0;
    for (int i = 0; i < a.size(); i++) s += a[i];
    Tensor out = Tensor::scalar(s);
    int an = a.node, n = a.size();
    out.node = push(1, [an, n](Tape& tp) {
        if (an < 0) return;
        double go = tp.grads_[size_t(tp.cur_)][0];
        auto& g = tp.gref(an);
        for (int i = 0; i < n; i++) g[size_t(i)] += go;
    });
    return out;
}

Tensor Tape::pointwise(const Tensor& a, Pointwise kind) {
    Tensor out = Tensor::zeros(a.shape);
    for (int i = 0; i < a.size(); i++) {
        double x = a[i];
        switch (kind) {
            case Pointwise::relu: out[i] = x > 0 ? x : 0; break;
            case Pointwise::sigmoid: out[i] = stable_sigmoid(x); break;
            case Pointwise::log:
                if (x <= 0) fail(Error::Kind::domain, "log of non-positive value");
                out[i] = std::log(x);
                break;
            case Pointwise::exp: out[i] = std::exp(x); break;
            case Pointwise::sin: out[i] = std::sin(x); break;
            case Pointwise::cos: out[i] = std::cos(x); break;
            case Pointwise::square: out[i] = x * x; break;
        }
    }
    Tensor ac = a, oc = out;
    out.node = push(out.size(), [ac, oc, kind](Tape& tp) {
        if (ac.node < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        auto& g = tp.gref(ac.node);
        for (size_t i = 0; i < go.size(); i++) {
            double x = ac[int(i)], y = oc[int(i)], d = 0;
            switch (kind) {
                case Pointwise::relu: d = x > 0 ? 1 : 0; break;
                case Pointwise::sigmoid: d = y * (1 - y); break;
                case Pointwise::log: d = 1.0 / x; break;
                case Pointwise::exp: d = y; break;
                case Pointwise::sin: d = std::cos(x); break;
                case Pointwise::cos: d = -std::sin(x); break;
                case Pointwise::square: d = 2 * x; break;
            }
            g[i] += go[i] * d;
        }
    });
    return out;
}

Tensor Tape::scaled_sigmoid(const Tensor& z, double scale, double offset) {
    if (scale <= 0) fail(Error::Kind::domain, "scaled_sigmoid: scale must be positive");
    Tensor out = Tensor::zeros(z.shape);
    for (int i = 0; i < z.size(); i++) out[i] = scale * stable_sigmoid(z[i]) + offset;
    Tensor zc = z;
    out.node = push(out.size(), [zc, scale, offset](Tape& tp) {
        if (zc.node < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        auto& g = tp.gref(zc.node);
        for (size_t i = 0; i < go.size(); i++) {
            double s = stable_sigmoid(zc[int(i)]);
            g[i] += go[i] * scale * s * (1 - s);
        }
    });
    return out;
}

Tensor Tape::conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.shape.size() != 3) fail(Error::Kind::shape, "conv2d: input must be HxWxC");
    if (kernel.shape.size() != 4 || kernel.shape[0] != 3 || kernel.shape[1] != 3)
        fail(Error::Kind::shape, "conv2d: kernel must be 3x3xCinxCout");
    int H = input.shape[0], W = input.shape[1], Cin = input.shape[2];
    int Cout = kernel.shape[3];
    if (kernel.shape[2] != Cin)
        fail(Error::Kind::shape, "conv2d: input channels do not match kernel");
    if (bias.shape != Shape{Cout})
        fail(Error::Kind::shape, "conv2d: bias must have Cout entries");

    Tensor out = Tensor::zeros({H, W, Cout});
    kernels::conv2d_forward_omp(input.ptr(), kernel.ptr(), bias.ptr(), out.ptr(),
                                H, W, Cin, Cout);
    Tensor ic = input, kc = kernel;
    int bn = bias.node;
    out.node = push(out.size(), [ic, kc, bn, H, W, Cin, Cout](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        std::vector<double> scratch_in, scratch_k, scratch_b;
        double* gi = nullptr;
        double* gk = nullptr;
        double* gb = nullptr;
        if (ic.node >= 0) gi = tp.gref(ic.node).data();
        else { scratch_in.assign(size_t(H * W * Cin), 0.0); gi = scratch_in.data(); }
        if (kc.node >= 0) gk = tp.gref(kc.node).data();
        else { scratch_k.assign(size_t(9 * Cin * Cout), 0.0); gk = scratch_k.data(); }
        if (bn >= 0) gb = tp.gref(bn).data();
        else { scratch_b.assign(size_t(Cout), 0.0); gb = scratch_b.data(); }
        kernels::conv2d_backward_omp(ic.ptr(), kc.ptr(), go.data(), gi, gk, gb,
                                     H, W, Cin, Cout);
    });
    return out;
}

Tensor Tape::avgpool2(const Tensor& input) {
    if (input.shape.size() != 3) fail(Error::Kind::shape, "avgpool2: input must be HxWxC");
    int H = input.shape[0], W = input.shape[1], C = input.shape[2];
    if (H % 2 || W % 2) fail(Error::Kind::shape, "avgpool2: extents must be even");
    Tensor out = Tensor::zeros({H / 2, W / 2, C});
    kernels::avgpool2_forward(input.ptr(), out.ptr(), H, W, C);
    int in_node = input.node;
    out.node = push(out.size(), [in_node, H, W, C](Tape& tp) {
        if (in_node < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        kernels::avgpool2_backward(go.data(), tp.gref(in_node).data(), H, W, C);
    });
    return out;
}

Tensor Tape::affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (weight.shape.size() != 2) fail(Error::Kind::shape, "affine: weight must be NxM");
    int N = weight.shape[0], M = weight.shape[1];
    if (input.size() != N) fail(Error::Kind::shape, "affine: input extent mismatch");
    if (bias.size() != M) fail(Error::Kind::shape, "affine: bias extent mismatch");

    Tensor out = Tensor::zeros({M});
    kernels::affine_forward(input.ptr(), weight.ptr(), bias.ptr(), out.ptr(), N, M);
    Tensor ic = input, wc = weight;
    int bn = bias.node;
    out.node = push(M, [ic, wc, bn, N, M](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        std::vector<double> si, sw, sb;
        double* gx = nullptr;
        double* gw = nullptr;
        double* gb = nullptr;
        if (ic.node >= 0) gx = tp.gref(ic.node).data();
        else { si.assign(size_t(N), 0.0); gx = si.data(); }
        if (wc.node >= 0) gw = tp.gref(wc.node).data();
        else { sw.assign(size_t(N * M), 0.0); gw = sw.data(); }
        if (bn >= 0) gb = tp.gref(bn).data();
        else { sb.assign(size_t(M), 0.0); gb = sb.data(); }
        kernels::affine_backward(ic.ptr(), wc.ptr(), go.data(), gx, gw, gb, N, M);
    });
    return out;
}

Tensor Tape::rotation_covariance(const Tensor& lambda1, const Tensor& lambda2,
                                 const Tensor& theta) {
    if (lambda1.size() != 1 || lambda2.size() != 1 || theta.size() != 1)
        fail(Error::Kind::shape, "rotation_covariance: inputs must be scalars");
    double l1 = lambda1.value(), l2 = lambda2.value(), th = theta.value();
    if (l1 <= 0 || l2 <= 0)
        fail(Error::Kind::domain, "rotation_covariance: eigenvalues must be positive");
    double c = std::cos(th), s = std::sin(th);
    // Mean/difference form: the diagonal is m ± d·cos2θ, so equal eigenvalues
    // give d = 0 and a bit-exact isotropic result regardless of how the
    // compiler contracts the arithmetic (an l1·c² + l2·s² formulation loses
    // that symmetry under FMA contraction).
    double m = 0.5 * (l1 + l2), d = 0.5 * (l1 - l2);
    double cos2 = (c - s) * (c + s), sin2 = 2.0 * c * s;
    double off = d * sin2;
    Tensor out({2, 2}, {m + d * cos2, off, off, m - d * cos2});
    int n1 = lambda1.node, n2 = lambda2.node, nt = theta.node;
    out.node = push(4, [n1, n2, nt, l1, l2, c, s](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        double goff = go[1] + go[2];
        if (n1 >= 0) tp.gref(n1)[0] += go[0] * c * c + goff * c * s + go[3] * s * s;
        if (n2 >= 0) tp.gref(n2)[0] += go[0] * s * s - goff * c * s + go[3] * c * c;
        if (nt >= 0)
            tp.gref(nt)[0] += go[0] * 2 * c * s * (l2 - l1) +
                              goff * (l1 - l2) * (c * c - s * s) +
                              go[3] * 2 * c * s * (l1 - l2);
    });
    return out;
}

Tensor Tape::gaussian_nll(const Tensor& y, const Tensor& mu, const Tensor& sigma) {
    if (y.size() != 2 || mu.size() != 2 || sigma.size() != 4)
        fail(Error::Kind::shape, "gaussian_nll: expects y,mu of length 2 and 2x2 sigma");
    double a = sigma[0], b = 0.5 * (sigma[1] + sigma[2]), d = sigma[3];
    double det = a * d - b * b;
    if (a <= 0 || det <= 0)
        fail(Error::Kind::domain, "gaussian_nll: sigma is not positive definite");
    double r0 = y[0] - mu[0], r1 = y[1] - mu[1];
    // Sigma^{-1} via 2x2 adjugate
    double i00 = d / det, i01 = -b / det, i11 = a / det;
    double w0 = i00 * r0 + i01 * r1;  // Sigma^{-1} r
    double w1 = i01 * r0 + i11 * r1;
    double q = r0 * w0 + r1 * w1;
    double nll = std::log(2 * M_PI) + 0.5 * std::log(det) + 0.5 * q;
    Tensor out = Tensor::scalar(nll);
    int nm = mu.node, ns = sigma.node;
    out.node = push(1, [nm, ns, i00, i01, i11, w0, w1](Tape& tp) {
        double go = tp.grads_[size_t(tp.cur_)][0];
        if (nm >= 0) {
            auto& g = tp.gref(nm);
            g[0] += go * -w0;
            g[1] += go * -w1;
        }
        if (ns >= 0) {
            auto& g = tp.gref(ns);
            // dNLL/dSigma = 0.5 (Sigma^{-1} - w w^T), split across the two
            // off-diagonal entries
            double d00 = 0.5 * (i00 - w0 * w0);
            double d01 = 0.5 * (i01 - w0 * w1);
            double d11 = 0.5 * (i11 - w1 * w1);
            g[0] += go * d00;
            g[1] += go * d01;
            g[2] += go * d01;
            g[3] += go * d11;
        }
    });
    return out;
}

Tensor Tape::concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 3 || b.shape.size() != 3 || a.shape[0] != b.shape[0] ||
        a.shape[1] != b.shape[1])
        fail(Error::Kind::shape, "concat_channels: spatial extents must agree");
    int H = a.shape[0], W = a.shape[1], Ca = a.shape[2], Cb = b.shape[2];
    Tensor out = Tensor::zeros({H, W, Ca + Cb});
    for (int p = 0; p < H * W; p++) {
        for (int c = 0; c < Ca; c++) out[p * (Ca + Cb) + c] = a[p * Ca + c];
        for (int c = 0; c < Cb; c++) out[p * (Ca + Cb) + Ca + c] = b[p * Cb + c];
    }
    int an = a.node, bn = b.node;
    out.node = push(out.size(), [an, bn, H, W, Ca, Cb](Tape& tp) {
        const auto& go = tp.grads_[size_t(tp.cur_)];
        if (an >= 0) {
            auto& g = tp.gref(an);
            for (int p = 0; p < H * W; p++)
                for (int c = 0; c < Ca; c++)
                    g[size_t(p * Ca + c)] += go[size_t(p * (Ca + Cb) + c)];
        }
        if (bn >= 0) {
            auto& g = tp.gref(bn);
            for (int p = 0; p < H * W; p++)
                for (int c = 0; c < Cb; c++)
                    g[size_t(p * Cb + c)] += go[size_t(p * (Ca + Cb) + Ca + c)];
        }
    });
    return out;
}

Tensor Tape::slice_channels(const Tensor& t, int c0, int len) {
    if (t.shape.size() != 3) fail(Error::Kind::shape, "slice_channels: input must be HxWxC");
    int H = t.shape[0], W = t.shape[1], C = t.shape[2];
    if (c0 < 0 || len <= 0 || c0 + len > C)
        fail(Error::Kind::shape, "slice_channels: range out of bounds");
    Tensor out = Tensor::zeros({H, W, len});
    for (int p = 0; p < H * W; p++)
        for (int c = 0; c < len; c++) out[p * len + c] = t[p * C + c0 + c];
    int tn = t.node;
    out.node = push(out.size(), [tn, H, W, C, c0, len](Tape& tp) {
        if (tn < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        auto& g = tp.gref(tn);
        for (int p = 0; p < H * W; p++)
            for (int c = 0; c < len; c++)
                g[size_t(p * C + c0 + c)] += go[size_t(p * len + c)];
    });
    return out;
}

Tensor Tape::slice(const Tensor& t, int i0, int len) {
    if (i0 < 0 || len <= 0 || i0 + len > t.size())
        fail(Error::Kind::shape, "slice: range out of bounds");
    Tensor out = Tensor::zeros({len});
    for (int i = 0; i < len; i++) out[i] = t[i0 + i];
    int tn = t.node;
    out.node = push(len, [tn, i0, len](Tape& tp) {
        if (tn < 0) return;
        const auto& go = tp.grads_[size_t(tp.cur_)];
        auto& g = tp.gref(tn);
        for (int i = 0; i < len; i++) g[size_t(i0 + i)] += go[size_t(i)];
    });
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1 || loss.node < 0)
        fail(Error::Kind::shape, "backward: loss must be a scalar on this tape");
    gref(loss.node)[0] = 1.0;
    for (int i = int(nodes_.size()) - 1; i >= 0; i--) {
        if (grads_[size_t(i)].empty()) continue;
        if (!nodes_[size_t(i)].back) continue;
        cur_ = i;
        nodes_[size_t(i)].back(*this);
    }
}

std::vector<double> Tape::grad(const Tensor& t) const {
    if (t.node < 0) fail(Error::Kind::shape, "grad: tensor is not on the tape");
    const auto& g = grads_[size_t(t.node)];
    if (g.empty()) return std::vector<double>(size_t(t.size()), 0.0);
    return g;
}

}  // namespace rolllab::grad
