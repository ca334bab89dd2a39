#pragma once

// Orthonormal modal basis of total degree N on the reference triangle
//   T = { (r,s) : r,s >= -1, r+s <= 0 },
// built from Jacobi polynomials in collapsed coordinates, together with the
// quadrature, derivative and face-trace tables used throughout assembly.
//
// Physical elements carry the affinely mapped basis scaled by 1/sqrt(det J),
// so the mass matrix of every element is the identity.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fracdg/common.hpp"
#include "fracdg/quadrature.hpp"

namespace fracdg {

namespace detail {

/// Jacobi polynomial P_n^{(a,b)}(x), normalized to unit L2 norm against the
/// weight (1-x)^a (1+x)^b on [-1, 1].
inline double normalized_jacobi(double x, double a, double b, int n) {
  const double gamma0 = jacobi_weight_mass(a, b);
  double pm1 = 1.0 / std::sqrt(gamma0);
  if (n == 0) return pm1;
  const double gamma1 =
      (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
  double p = ((a + b + 2.0) * x / 2.0 + (a - b) / 2.0) / std::sqrt(gamma1);
  if (n == 1) return p;
  double aold = 2.0 / (2.0 + a + b) *
                std::sqrt((a + 1.0) * (b + 1.0) / (a + b + 3.0));
  for (int i = 1; i < n; ++i) {
    const double h1 = 2.0 * i + a + b;
    const double anew =
        2.0 / (h1 + 2.0) *
        std::sqrt((i + 1.0) * (i + 1.0 + a + b) * (i + 1.0 + a) *
                  (i + 1.0 + b) / ((h1 + 1.0) * (h1 + 3.0)));
    const double bnew = -(a * a - b * b) / (h1 * (h1 + 2.0));
    const double pnext = (-aold * pm1 + (x - bnew) * p) / anew;
    pm1 = p;
    p = pnext;
    aold = anew;
  }
  return p;
}

inline double normalized_jacobi_derivative(double x, double a, double b,
                                           int n) {
  if (n == 0) return 0.0;
  return std::sqrt(n * (n + a + b + 1.0)) *
         normalized_jacobi(x, a + 1.0, b + 1.0, n - 1);
}

/// Collapsed coordinates of a point on the reference triangle.
inline void collapsed_coords(double r, double s, double& a, double& b) {
  b = s;
  a = (std::abs(1.0 - s) > 1e-14) ? 2.0 * (1.0 + r) / (1.0 - s) - 1.0 : -1.0;
}

}  // namespace detail

/// Quadrature rule over the reference triangle (collapsed tensor product,
/// Gauss-Legendre in `a` and Gauss-Jacobi(1,0) in `b` absorbing the collapse
/// Jacobian). Exact for polynomials up to the requested degree.
struct TriangleRule {
  std::vector<Vec2> nodes;  // (r,s)
  Eigen::VectorXd weights;  // sum to 2, the reference-triangle area
};

inline TriangleRule triangle_rule(int degree) {
  const int n = degree / 2 + 1;  // 2n-1 >= degree
  const QuadRule ga = gauss_legendre(n);
  const QuadRule gb = gauss_jacobi(n, 1.0, 0.0);
  TriangleRule rule;
  rule.nodes.reserve(n * n);
  rule.weights.resize(n * n);
  int q = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = ga.nodes[i];
      const double b = gb.nodes[j];
      const double r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
      rule.nodes.emplace_back(r, b);
      rule.weights[q++] = 0.5 * ga.weights[i] * gb.weights[j];
    }
  }
  return rule;
}

class ReferenceBasis {
 public:
  static constexpr int kMaxOrder = 8;

  explicit ReferenceBasis(int order) : order_(order) {
    if (order < 1 || order > kMaxOrder)
      throw ConfigError("ReferenceBasis: order " + std::to_string(order) +
                        " outside supported range [1, " +
                        std::to_string(kMaxOrder) + "]");
    np_ = (order + 1) * (order + 2) / 2;

    const TriangleRule vr = triangle_rule(2 * order + 2);
    vol_nodes_ = vr.nodes;
    vol_weights_ = vr.weights;
    const int nq = static_cast<int>(vol_nodes_.size());
    phi_.resize(nq, np_);
    dphi_dr_.resize(nq, np_);
    dphi_ds_.resize(nq, np_);
    for (int q = 0; q < nq; ++q) {
      phi_.row(q) = eval_modes(vol_nodes_[q].x(), vol_nodes_[q].y());
      Eigen::VectorXd dr, ds;
      eval_mode_gradients(vol_nodes_[q].x(), vol_nodes_[q].y(), dr, ds);
      dphi_dr_.row(q) = dr;
      dphi_ds_.row(q) = ds;
    }

    build_face_tables();
  }

  int order() const { return order_; }
  int np() const { return np_; }

  const std::vector<Vec2>& volume_nodes() const { return vol_nodes_; }
  const Eigen::VectorXd& volume_weights() const { return vol_weights_; }
  /// Basis values at volume nodes, nq x Np.
  const Eigen::MatrixXd& phi() const { return phi_; }
  const Eigen::MatrixXd& dphi_dr() const { return dphi_dr_; }
  const Eigen::MatrixXd& dphi_ds() const { return dphi_ds_; }

  /// All Np modes evaluated at a reference point.
  Eigen::VectorXd eval_modes(double r, double s) const {
    Eigen::VectorXd out(np_);
    eval_modes_into(r, s, out);
    return out;
  }

  void eval_modes_into(double r, double s, Eigen::VectorXd& out) const {
    out.resize(np_);
    double a, b;
    detail::collapsed_coords(r, s, a, b);
    int m = 0;
    for (int i = 0; i <= order_; ++i) {
      const double pa = detail::normalized_jacobi(a, 0.0, 0.0, i);
      const double pow1b = std::pow(1.0 - b, i);
      for (int j = 0; j <= order_ - i; ++j, ++m) {
        const double pb = detail::normalized_jacobi(b, 2.0 * i + 1.0, 0.0, j);
        out[m] = std::sqrt(2.0) * pa * pb * pow1b;
      }
    }
  }

  /// Reference-coordinate gradients of all modes at (r,s).
  void eval_mode_gradients(double r, double s, Eigen::VectorXd& dr,
                           Eigen::VectorXd& ds) const {
    dr.resize(np_);
    ds.resize(np_);
    double a, b;
    detail::collapsed_coords(r, s, a, b);
    int m = 0;
    for (int i = 0; i <= order_; ++i) {
      const double fa = detail::normalized_jacobi(a, 0.0, 0.0, i);
      const double dfa = detail::normalized_jacobi_derivative(a, 0.0, 0.0, i);
      for (int j = 0; j <= order_ - i; ++j, ++m) {
        const double gb = detail::normalized_jacobi(b, 2.0 * i + 1.0, 0.0, j);
        const double dgb =
            detail::normalized_jacobi_derivative(b, 2.0 * i + 1.0, 0.0, j);
        // d/dr = (2/(1-b)) d/da; the (1-b)^i factor keeps everything finite.
        double vdr = dfa * gb;
        if (i > 0) vdr *= std::pow(0.5 * (1.0 - b), i - 1);
        double vds = dfa * gb * 0.5 * (1.0 + a);
        if (i > 0) vds *= std::pow(0.5 * (1.0 - b), i - 1);
        double tmp = dgb * std::pow(0.5 * (1.0 - b), i);
        if (i > 0) tmp -= 0.5 * i * gb * std::pow(0.5 * (1.0 - b), i - 1);
        vds += fa * tmp;
        dr[m] = std::pow(2.0, i + 0.5) * vdr;
        ds[m] = std::pow(2.0, i + 0.5) * vds;
      }
    }
  }

  struct FaceTable {
    std::vector<Vec2> nodes;   // (r,s) on the face
    Eigen::VectorXd weights;   // 1D Gauss weights on [-1,1]
    Eigen::MatrixXd trace;     // nq1d x Np basis values
  };

  /// Face f connects reference vertices f and (f+1) mod 3.
  const FaceTable& face(int f) const { return faces_[f]; }

 private:
  void build_face_tables() {
    static const std::array<Vec2, 3> verts = {Vec2(-1.0, -1.0), Vec2(1.0, -1.0),
                                              Vec2(-1.0, 1.0)};
    const QuadRule g = gauss_legendre(order_ + 2);
    for (int f = 0; f < 3; ++f) {
      const Vec2 p0 = verts[f], p1 = verts[(f + 1) % 3];
      FaceTable& tab = faces_[f];
      tab.weights.resize(g.size());
      tab.trace.resize(g.size(), np_);
      for (int q = 0; q < g.size(); ++q) {
        const double t = g.nodes[q];
        const Vec2 p = 0.5 * ((1.0 - t) * p0 + (1.0 + t) * p1);
        tab.nodes.push_back(p);
        tab.weights[q] = g.weights[q];
        tab.trace.row(q) = eval_modes(p.x(), p.y());
      }
    }
  }

  int order_;
  int np_;
  std::vector<Vec2> vol_nodes_;
  Eigen::VectorXd vol_weights_;
  Eigen::MatrixXd phi_, dphi_dr_, dphi_ds_;
  std::array<FaceTable, 3> faces_;
};

/// Affine map from the reference triangle to a physical one.
struct ElementMap {
  Vec2 v0, v1, v2;
  Eigen::Matrix2d jac;      // d(x,y)/d(r,s), constant
  Eigen::Matrix2d jac_inv;  // d(r,s)/d(x,y)
  double det = 0.0;

  ElementMap(const Vec2& a, const Vec2& b, const Vec2& c) : v0(a), v1(b), v2(c) {
    jac.col(0) = 0.5 * (v1 - v0);
    jac.col(1) = 0.5 * (v2 - v0);
    det = jac.determinant();
    if (det <= 0.0)
      throw ConfigError("ElementMap: vertices are not in CCW order");
    jac_inv = jac.inverse();
  }

  Vec2 to_physical(const Vec2& rs) const {
    return v0 + jac * (rs + Vec2(1.0, 1.0));
  }
  Vec2 to_reference(const Vec2& xy) const {
    return jac_inv * (xy - v0) - Vec2(1.0, 1.0);
  }
};

/// Value and physical gradient of a modal field at a physical point.
/// Coefficients refer to the orthonormalized physical basis psi/sqrt(det J).
inline std::pair<double, Vec2> evaluate_field(
    const ElementMap& map, const ReferenceBasis& basis,
    const Eigen::Ref<const Eigen::VectorXd>& coeffs, const Vec2& point,
    double tol = 1e-10) {
  const Vec2 rs = map.to_reference(point);
  if (rs.x() < -1.0 - tol || rs.y() < -1.0 - tol || rs.x() + rs.y() > tol)
    throw ConfigError("evaluate_field: point lies outside the element");
  const double scale = 1.0 / std::sqrt(map.det);
  const Eigen::VectorXd modes = basis.eval_modes(rs.x(), rs.y());
  Eigen::VectorXd dr, ds;
  basis.eval_mode_gradients(rs.x(), rs.y(), dr, ds);
  const double value = scale * modes.dot(coeffs);
  // Chain rule through the constant inverse Jacobian.
  const Vec2 ref_grad(scale * dr.dot(coeffs), scale * ds.dot(coeffs));
  const Vec2 grad = map.jac_inv.transpose() * ref_grad;
  return {value, grad};
}

/// L2-orthogonal projection of f onto the element's polynomial space,
/// returned as coefficients of the orthonormalized physical basis.
template <typename F>
Eigen::VectorXd project(const ElementMap& map, const ReferenceBasis& basis,
                        F&& f, int extra_degree = 0) {
  const TriangleRule rule = extra_degree == 0
                                ? TriangleRule{basis.volume_nodes(),
                                               basis.volume_weights()}
                                : triangle_rule(2 * basis.order() + 2 +
                                                extra_degree);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.np());
  const double sqrt_det = std::sqrt(map.det);
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const Vec2 x = map.to_physical(rule.nodes[q]);
    const double fx = f(x);
    const Eigen::VectorXd modes =
        basis.eval_modes(rule.nodes[q].x(), rule.nodes[q].y());
    coeffs += rule.weights[static_cast<int>(q)] * sqrt_det * fx * modes;
  }
  return coeffs;
}

}  // namespace fracdg
