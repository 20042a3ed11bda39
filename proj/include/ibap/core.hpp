#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace ibap {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealMatrix = Matrix<double>;
using RealVector = Vector<double>;

// Thrown when the requested construction provably does not exist for the
// given input (as opposed to the input being malformed).  Carries named
// numeric diagnostics for reporting.
class RefusalError : public std::runtime_error {
 public:
  explicit RefusalError(const std::string& message,
                        std::map<std::string, double> details = {})
      : std::runtime_error(message), details_(std::move(details)) {}

  const std::map<std::string, double>& details() const { return details_; }

 private:
  std::map<std::string, double> details_;
};

// Numerical rank policy: a singular value counts as nonzero iff it exceeds
// rel * max(sigma_max, 1).  band_factor delimits the interval around any
// decision threshold inside which verdicts are flagged as borderline.
struct Tolerance {
  double rel = 1e-10;
  double band_factor = 100.0;

  double rank_cut(double sigma_max) const {
    return rel * std::max(sigma_max, 1.0);
  }
  bool in_band(double value, double threshold) const {
    return value > threshold / band_factor && value < threshold * band_factor;
  }
};

// Nonnegative extended real.  +infinity is a tag, never a float sentinel,
// so a genuine overflow stays distinguishable from the defined-as-infinite
// convention (inclination of the zero subspace).
struct ExtendedReal {
  double value = 0.0;
  bool is_infinite = false;

  static ExtendedReal infinite() { return {0.0, true}; }
  static ExtendedReal finite(double v) { return {v, false}; }

  bool exceeds(double threshold) const {
    return is_infinite || value > threshold;
  }
};

// Diagonal-weight inner product on C^dim or R^dim:
// <x,y> = sum_k w_k x_k conj(y_k).  weights all strictly positive.
class InnerProduct {
 public:
  static InnerProduct identity(Index dim) {
    if (dim < 1) throw std::invalid_argument("InnerProduct: dim must be positive");
    InnerProduct s;
    s.dim_ = dim;
    s.identity_ = true;
    s.weights_ = RealVector::Ones(dim);
    s.sqrt_w_ = s.weights_;
    s.inv_sqrt_w_ = s.weights_;
    return s;
  }

  static InnerProduct weighted(RealVector weights) {
    if (weights.size() < 1) throw std::invalid_argument("InnerProduct: dim must be positive");
    if (!(weights.array() > 0.0).all())
      throw std::invalid_argument("InnerProduct: weights must be strictly positive");
    InnerProduct s;
    s.dim_ = weights.size();
    s.identity_ = (weights.array() == 1.0).all();
    s.weights_ = std::move(weights);
    s.sqrt_w_ = s.weights_.cwiseSqrt();
    s.inv_sqrt_w_ = s.sqrt_w_.cwiseInverse();
    return s;
  }

  Index dim() const { return dim_; }
  bool is_identity() const { return identity_; }
  const RealVector& weights() const { return weights_; }
  const RealVector& sqrt_weights() const { return sqrt_w_; }
  const RealVector& inv_sqrt_weights() const { return inv_sqrt_w_; }

  bool operator==(const InnerProduct& other) const {
    return dim_ == other.dim_ && weights_ == other.weights_;
  }
  bool operator!=(const InnerProduct& other) const { return !(*this == other); }

  // W^{1/2} M: maps ambient coordinates into the Euclidean model where all
  // spectral computations run.
  template <typename Derived>
  auto to_model(const Eigen::MatrixBase<Derived>& m) const {
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out = m;
    if (!identity_)
      out = sqrt_w_.cast<Scalar>().asDiagonal() * out;
    return out;
  }

  // W^{-1/2} M: back from the Euclidean model.
  template <typename Derived>
  auto from_model(const Eigen::MatrixBase<Derived>& m) const {
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out = m;
    if (!identity_)
      out = inv_sqrt_w_.cast<Scalar>().asDiagonal() * out;
    return out;
  }

  template <typename Scalar>
  Scalar inner(const Vector<Scalar>& x, const Vector<Scalar>& y) const {
    check_vec(x.size());
    check_vec(y.size());
    return y.dot(weights_.cast<Scalar>().asDiagonal() * x);
  }

  template <typename Scalar>
  double norm(const Vector<Scalar>& x) const {
    check_vec(x.size());
    return to_model(x).norm();
  }

 private:
  void check_vec(Index n) const {
    if (n != dim_) throw std::invalid_argument("InnerProduct: dimension mismatch");
  }

  Index dim_ = 0;
  bool identity_ = true;
  RealVector weights_, sqrt_w_, inv_sqrt_w_;
};

inline void require_same_space(const InnerProduct& a, const InnerProduct& b,
                               const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": inner products differ");
}

template <typename Scalar>
struct SvdResult {
  Matrix<Scalar> u;
  RealVector sigma;  // decreasing
  Matrix<Scalar> v;
};

namespace detail {
// Jacobi for small problems (accuracy), divide-and-conquer above the cutoff.
constexpr Index kJacobiCutoff = 96;
}  // namespace detail

template <typename Scalar>
SvdResult<Scalar> svd_thin(const Matrix<Scalar>& m) {
  if (m.rows() == 0 || m.cols() == 0)
    return {Matrix<Scalar>(m.rows(), 0), RealVector(0), Matrix<Scalar>(m.cols(), 0)};
  if (std::max(m.rows(), m.cols()) <= detail::kJacobiCutoff) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
  }
  Eigen::BDCSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

template <typename Scalar>
RealVector singular_values(const Matrix<Scalar>& m) {
  if (m.rows() == 0 || m.cols() == 0) return RealVector(0);
  if (std::max(m.rows(), m.cols()) <= detail::kJacobiCutoff)
    return Eigen::JacobiSVD<Matrix<Scalar>>(m).singularValues();
  return Eigen::BDCSVD<Matrix<Scalar>>(m).singularValues();
}

template <typename Scalar>
double spectral_norm(const Matrix<Scalar>& m) {
  const RealVector s = singular_values(m);
  return s.size() ? s(0) : 0.0;
}

inline Index count_above(const RealVector& sigma, double cut) {
  Index r = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cut) ++r;
  return r;
}

}  // namespace ibap
