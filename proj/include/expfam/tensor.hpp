#pragma once

#include <Eigen/Core>

#include <cmath>

#include "expfam/errors.hpp"

namespace expfam {

/// Shape of a natural-parameter / natural-statistic tensor.
struct TensorShape {
    int k1 = 0;
    int k2 = 0;
    int k3 = 0;

    long size() const { return static_cast<long>(k1) * k2 * k3; }
    bool operator==(const TensorShape&) const = default;
};

/// Dense k1 x k2 x k3 tensor stored flat. Entry (i, j, l) lives at flat
/// index (l*k1 + i)*k2 + j, i.e. slices are consecutive and row-major.
/// vec() ordering everywhere in the library refers to this layout.
class Tensor3 {
  public:
    Tensor3() = default;

    explicit Tensor3(TensorShape shape)
        : shape_(shape), data_(Eigen::VectorXd::Zero(shape.size())) {}

    Tensor3(TensorShape shape, Eigen::VectorXd flat) : shape_(shape), data_(std::move(flat)) {
        if (data_.size() != shape_.size())
            throw InternalError("Tensor3: flat size does not match shape");
    }

    static Tensor3 zero(TensorShape shape) { return Tensor3(shape); }

    const TensorShape& shape() const { return shape_; }
    long size() const { return data_.size(); }

    double operator()(int i, int j, int l) const { return data_[flat_index(i, j, l)]; }
    double& operator()(int i, int j, int l) { return data_[flat_index(i, j, l)]; }

    const Eigen::VectorXd& flat() const { return data_; }
    Eigen::VectorXd& flat() { return data_; }

    Eigen::MatrixXd slice(int l) const {
        check_slice(l);
        Eigen::MatrixXd out(shape_.k1, shape_.k2);
        for (int i = 0; i < shape_.k1; ++i)
            for (int j = 0; j < shape_.k2; ++j) out(i, j) = (*this)(i, j, l);
        return out;
    }

    void set_slice(int l, const Eigen::MatrixXd& m) {
        check_slice(l);
        if (m.rows() != shape_.k1 || m.cols() != shape_.k2)
            throw InternalError("Tensor3::set_slice: slice dimensions mismatch");
        for (int i = 0; i < shape_.k1; ++i)
            for (int j = 0; j < shape_.k2; ++j) (*this)(i, j, l) = m(i, j);
    }

    bool all_finite() const { return data_.allFinite(); }

    long flat_index(int i, int j, int l) const {
        return (static_cast<long>(l) * shape_.k1 + i) * shape_.k2 + j;
    }

  private:
    void check_slice(int l) const {
        if (l < 0 || l >= shape_.k3) throw InternalError("Tensor3: slice index out of range");
    }

    TensorShape shape_;
    Eigen::VectorXd data_;
};

/// Euclidean norm over all entries (the tensor norm ||.||_T).
inline double tensor_norm(const Tensor3& t) { return t.flat().norm(); }

/// Sum of entrywise products of two same-shape tensors.
inline double tensor_inner(const Tensor3& a, const Tensor3& b) {
    if (!(a.shape() == b.shape())) throw InternalError("tensor_inner: shape mismatch");
    return a.flat().dot(b.flat());
}

inline Tensor3 operator+(const Tensor3& a, const Tensor3& b) {
    if (!(a.shape() == b.shape())) throw InternalError("Tensor3 +: shape mismatch");
    return Tensor3(a.shape(), a.flat() + b.flat());
}

inline Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
    if (!(a.shape() == b.shape())) throw InternalError("Tensor3 -: shape mismatch");
    return Tensor3(a.shape(), a.flat() - b.flat());
}

inline Tensor3 operator*(double c, const Tensor3& t) { return Tensor3(t.shape(), c * t.flat()); }

}  // namespace expfam
