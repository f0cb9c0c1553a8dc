#pragma once

#include "metrograph/cpa.hpp"
#include "metrograph/error.hpp"
#include "metrograph/laplacian.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

/// Potential j_z(., y): solves Q u = e_y - e_z with u(z) = 0. Piecewise
/// affine in x, nonnegative, bounded by the resistance between y and z.
inline CpaFunction j_function(const KirchhoffMatrix& q, std::size_t z, std::size_t y) {
    const std::size_t n = q.size();
    if (z >= n || y >= n) throw ValidationError("j-function arguments must be model vertices");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (z == y) return {q.model(), std::move(u)};
    // delete row and column z
    std::vector<Eigen::Index> keep;
    keep.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        if (i != z) keep.push_back(static_cast<Eigen::Index>(i));
    std::vector<Eigen::Index> slot(n, -1);
    for (std::size_t r = 0; r < keep.size(); ++r) slot[static_cast<std::size_t>(keep[r])] = static_cast<Eigen::Index>(r);
    std::vector<Eigen::Triplet<double>> trip;
    const auto& s = q.sparse();
    for (Eigen::Index col = 0; col < s.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(s, col); it; ++it) {
            const auto r = slot[static_cast<std::size_t>(it.row())];
            const auto c = slot[static_cast<std::size_t>(it.col())];
            if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
        }
    }
    const auto m = static_cast<Eigen::Index>(n - 1);
    Eigen::SparseMatrix<double> pinned(m, m);
    pinned.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(pinned);
    if (ldlt.info() != Eigen::Success) throw NumericalError("pinned system is singular: disconnected model");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(slot[y]) = 1.0;
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success) throw NumericalError("pinned solve failed");
    for (std::size_t r = 0; r < keep.size(); ++r) u(keep[r]) = sol(static_cast<Eigen::Index>(r));
    return {q.model(), std::move(u)};
}

inline CpaFunction j_function(const ModelPtr& model, std::size_t z, std::size_t y) {
    return j_function(kirchhoff_matrix(model), z, y);
}

/// Moore-Penrose inverse of Q via its eigendecomposition. Eigenvalues below
/// 1e-12 |Q| are treated as the kernel, which must be one-dimensional.
inline Eigen::MatrixXd pseudoinverse_kernel(const KirchhoffMatrix& q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.dense());
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of Q failed");
    const auto& ev = es.eigenvalues();
    const double cutoff = 1e-12 * ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    Eigen::Index zero_modes = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i)) <= cutoff) ++zero_modes;
        else inv(i) = 1.0 / ev(i);
    }
    if (zero_modes != 1)
        throw NumericalError("Kirchhoff matrix kernel has dimension " + std::to_string(zero_modes));
    const auto& v = es.eigenvectors();
    Eigen::MatrixXd lp = v * inv.asDiagonal() * v.transpose();
    return 0.5 * (lp + lp.transpose());
}

/// Four-point identity j_z(x, y) = L+_xy - L+_xz - L+_zy + L+_zz.
inline double j_from_pseudoinverse(const Eigen::MatrixXd& lp, std::size_t z, std::size_t x,
                                   std::size_t y) {
    const auto X = static_cast<Eigen::Index>(x), Y = static_cast<Eigen::Index>(y),
               Z = static_cast<Eigen::Index>(z);
    return lp(X, Y) - lp(X, Z) - lp(Z, Y) + lp(Z, Z);
}

/// Vertex values of g_nu(x, y) = j_nu(x, y) - C_nu, where
/// j_nu(x, y) = sum_z nu(z) j_z(x, y).
struct KernelTable {
    ModelPtr model;
    DiscreteMeasure nu;
    Eigen::MatrixXd g;
    double c_nu = 0.0;
    double c_spread = 0.0;  ///< max - min of sum_x j_nu(x, y) nu(x) over anchors y

    /// Bilinear CPA interpolation of g between vertices.
    [[nodiscard]] double eval(const GraphPoint& x, const GraphPoint& y) const {
        const auto n = static_cast<Eigen::Index>(model->size());
        Eigen::VectorXd col(n);
        for (Eigen::Index j = 0; j < n; ++j)
            col(j) = cpa_eval(CpaFunction(model, g.col(j)), x);
        return cpa_eval(CpaFunction(model, std::move(col)), y);
    }
};

inline KernelTable kernel_table(const KirchhoffMatrix& q, const DiscreteMeasure& nu) {
    require_same_model(q.model(), nu.model());
    if (!nu.is_probability_mass())
        throw ValidationError("kernel measure must have total mass 1, got " +
                              std::to_string(nu.total_mass()));
    const Eigen::MatrixXd lp = pseudoinverse_kernel(q);
    const Eigen::VectorXd& w = nu.mass();
    const Eigen::VectorXd a = lp * w;                 // sum_z nu(z) L+_xz
    const double d = lp.diagonal().dot(w);            // sum_z nu(z) L+_zz
    Eigen::MatrixXd j = lp;
    j.colwise() -= a;
    j.rowwise() -= a.transpose();
    j.array() += d;

    const Eigen::VectorXd anchors = j.transpose() * w;  // C(y) for every y
    KernelTable t{q.model(), nu, {}, anchors(0), anchors.maxCoeff() - anchors.minCoeff()};
    if (t.c_spread > 1e-9 * std::max(1.0, std::abs(t.c_nu)))
        throw NumericalError("C_nu depends on the anchor (spread " + std::to_string(t.c_spread) + ")");
    t.g = j.array() - t.c_nu;
    return t;
}

inline KernelTable kernel_table(const ModelPtr& model, const DiscreteMeasure& nu) {
    return kernel_table(kirchhoff_matrix(model), nu);
}

namespace detail {
inline void require_table_measure(const KernelTable& t, const DiscreteMeasure& mu) {
    require_same_model(t.model, mu.model());
    if ((t.nu.mass() - mu.mass()).cwiseAbs().maxCoeff() > 0.0)
        throw ValidationError("kernel table was built for a different measure");
}
} // namespace detail

/// phi_N(h)(q_i) = (1/N) sum_j g(q_i, q_j) h(q_j).
inline CpaFunction phi_N(const KernelTable& table, const DiscreteMeasure& mu, const CpaFunction& h) {
    detail::require_table_measure(table, mu);
    require_same_model(table.model, h.model());
    return {h.model(), table.g * h.values() / static_cast<double>(h.size())};
}

/// max_q |(Q phi_N f)(q) - f(q)/N + (int f dx_N) mu_N(q)|.
inline double verify_laplacian_inverse(const KirchhoffMatrix& q, const KernelTable& table,
                                       const DiscreteMeasure& mu, const CpaFunction& f) {
    require_same_model(q.model(), table.model);
    const double n = static_cast<double>(q.size());
    const CpaFunction phi = phi_N(table, mu, f);
    const Eigen::VectorXd lhs = q * phi.values();
    const double mean = f.values().sum() / n;
    const Eigen::VectorXd rhs = f.values() / n - mean * mu.mass();
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

/// Largest eigenvalues alpha of phi_N on the mu_N-orthogonal subspace, using
/// the same reflector basis as eigen_mu.
inline SpectralResult eigen_phi(const KernelTable& table, const DiscreteMeasure& mu, std::size_t k,
                                const EigenOptions& opt = {}) {
    detail::require_table_measure(table, mu);
    const std::size_t n = table.model->size();
    if (n < 2) throw ValidationError("model has a single vertex");
    if (k > n - 1)
        throw ValidationError("requested " + std::to_string(k) + " eigenvalues but only " +
                              std::to_string(n - 1) + " exist");
    const detail::MassComplement basis(mu.mass());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        basis.compress(table.g / static_cast<double>(n)));
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    const auto r = static_cast<Eigen::Index>(n - 1);
    if (es.eigenvalues()(0) <= 0.0)
        throw NumericalError("integral operator has a nonpositive eigenvalue on the complement");
    std::vector<double> values(static_cast<std::size_t>(r));
    Eigen::MatrixXd reduced(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        values[static_cast<std::size_t>(i)] = es.eigenvalues()(r - 1 - i);
        reduced.col(i) = es.eigenvectors().col(r - 1 - i);
    }
    SpectralResult out;
    out.model = table.model;
    out.kind = OperatorKind::integral;
    out.n = n;
    out.clusters = detail::make_clusters(table.model, values, basis.lift(reduced), k,
                                         opt.cluster_tolerance, OperatorKind::integral);
    return out;
}

} // namespace metrograph
