#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "rolllab/common.hpp"

namespace rolllab::grad {

using Shape = std::vector<int>;

inline int shape_size(const Shape& s) {
    int n = 1;
    for (int e : s) {
        if (e <= 0) fail(Error::Kind::shape, "tensor extent must be positive");
        n *= e;
    }
    return n;
}

// Dense 64-bit real tensor, row-major. Copies share the underlying buffer;
// `node` ties the tensor to the active tape (-1 = constant, no gradient).
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    int node = -1;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)) {
        if (int(values.size()) != shape_size(shape))
            fail(Error::Kind::shape, "tensor data length does not match shape");
        data = std::make_shared<std::vector<double>>(std::move(values));
    }

    static Tensor zeros(Shape s) {
        int n = shape_size(s);
        return Tensor(std::move(s), std::vector<double>(size_t(n), 0.0));
    }
    static Tensor full(Shape s, double v) {
        int n = shape_size(s);
        return Tensor(std::move(s), std::vector<double>(size_t(n), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor gaussian(Shape s, double stddev, Rng& rng) {
        int n = shape_size(s);
        std::vector<double> v(static_cast<size_t>(n));
        for (double& x : v) x = stddev * rng.gaussian();
        return Tensor(std::move(s), std::move(v));
    }

    int size() const { return data ? int(data->size()) : 0; }
    double* ptr() { return data->data(); }
    const double* ptr() const { return data->data(); }
    double& operator[](int i) { return (*data)[size_t(i)]; }
    double operator[](int i) const { return (*data)[size_t(i)]; }
    double value() const { return (*data)[0]; }

    // deep copy with no tape attachment
    Tensor detached() const {
        Tensor t;
        t.shape = shape;
        t.data = std::make_shared<std::vector<double>>(*data);
        return t;
    }
};

// same buffer and tape node, new shape
inline Tensor reshape(const Tensor& t, Shape s) {
    if (shape_size(s) != t.size()) fail(Error::Kind::shape, "reshape size mismatch");
    Tensor r = t;
    r.shape = std::move(s);
    return r;
}

enum class Pointwise { relu, sigmoid, log, exp, sin, cos, square };

// Reverse-mode tape. Records every operation; backward() replays the records
// in strict reverse insertion order.
class Tape {
public:
    // register a leaf (parameter or input) for gradient tracking
    void watch(Tensor& t);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    Tensor sum(const Tensor& a);

    Tensor pointwise(const Tensor& a, Pointwise kind);
    Tensor scaled_sigmoid(const Tensor& z, double scale = 99.99, double offset = 0.01);

    Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
    Tensor avgpool2(const Tensor& input);
    Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

    Tensor rotation_covariance(const Tensor& lambda1, const Tensor& lambda2,
                               const Tensor& theta);
    // y is a constant target; gradients flow into mu and sigma
    Tensor gaussian_nll(const Tensor& y, const Tensor& mu, const Tensor& sigma);

    Tensor concat_channels(const Tensor& a, const Tensor& b);
    Tensor slice_channels(const Tensor& t, int c0, int len);
    // contiguous slice of a rank-1 tensor
    Tensor slice(const Tensor& t, int i0, int len);

    void backward(const Tensor& loss);

    // gradient of a watched/derived tensor after backward (zeros if unreached)
    std::vector<double> grad(const Tensor& t) const;

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        int size = 0;
        std::function<void(Tape&)> back;  // null for leaves
    };

    int push(int size, std::function<void(Tape&)> back = nullptr);
    std::vector<double>& gref(int node);

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    int cur_ = -1;  // node whose backward rule is currently running
};

}  // namespace rolllab::grad
