#pragma once

#include "metrograph/cpa.hpp"
#include "metrograph/error.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

inline constexpr std::size_t kDenseThreshold = 2048;
inline constexpr double kClusterTolerance = 1e-8;

/// Weighted graph Laplacian of a model: diagonal = weighted degree,
/// off-diagonal = -w_ij for adjacent vertices.
class KirchhoffMatrix {
public:
    explicit KirchhoffMatrix(ModelPtr model) : model_(std::move(model)) {
        const auto n = static_cast<Eigen::Index>(model_->size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(model_->edges().size() * 4);
        for (const auto& ed : model_->edges()) {
            const auto a = static_cast<Eigen::Index>(ed.a);
            const auto b = static_cast<Eigen::Index>(ed.b);
            trip.emplace_back(a, a, ed.weight);
            trip.emplace_back(b, b, ed.weight);
            trip.emplace_back(a, b, -ed.weight);
            trip.emplace_back(b, a, -ed.weight);
        }
        sparse_.resize(n, n);
        sparse_.setFromTriplets(trip.begin(), trip.end());
        sparse_.makeCompressed();
    }

    [[nodiscard]] const ModelPtr& model() const noexcept { return model_; }
    [[nodiscard]] std::size_t size() const noexcept { return model_->size(); }
    [[nodiscard]] const Eigen::SparseMatrix<double>& sparse() const noexcept { return sparse_; }
    [[nodiscard]] Eigen::MatrixXd dense() const { return Eigen::MatrixXd(sparse_); }

    /// Gershgorin bound on the spectral norm (twice the largest degree).
    [[nodiscard]] double norm_bound() const {
        double m = 0.0;
        for (Eigen::Index k = 0; k < sparse_.outerSize(); ++k)
            m = std::max(m, sparse_.coeff(k, k));
        return 2.0 * m;
    }

    [[nodiscard]] Eigen::VectorXd operator*(const Eigen::VectorXd& v) const { return sparse_ * v; }

    /// Returns a copy with one off-diagonal weight scaled; used to seed
    /// self-test failure fixtures.
    [[nodiscard]] KirchhoffMatrix with_perturbed_edge(std::size_t edge, double factor) const {
        KirchhoffMatrix q = *this;
        const auto& ed = model_->edges().at(edge);
        const auto a = static_cast<Eigen::Index>(ed.a);
        const auto b = static_cast<Eigen::Index>(ed.b);
        const double dw = ed.weight * (factor - 1.0);
        q.sparse_.coeffRef(a, b) -= dw;
        q.sparse_.coeffRef(b, a) -= dw;
        q.sparse_.coeffRef(a, a) += dw;
        q.sparse_.coeffRef(b, b) += dw;
        return q;
    }

private:
    ModelPtr model_;
    Eigen::SparseMatrix<double> sparse_;
};

inline KirchhoffMatrix kirchhoff_matrix(const ModelPtr& model) { return KirchhoffMatrix(model); }

/// Vertexwise Q f; the atom weights of the measure Laplacian of f.
inline CpaFunction apply_Q(const KirchhoffMatrix& q, const CpaFunction& f) {
    require_same_model(q.model(), f.model());
    return {f.model(), q * f.values()};
}

/// Edge sum of w_ij (f_i - f_j)(g_i - g_j), each edge once.
inline double dirichlet_inner(const CpaFunction& f, const CpaFunction& g) {
    require_same_model(f.model(), g.model());
    double r = 0.0;
    for (const auto& ed : f.model()->edges())
        r += ed.weight * (f[ed.a] - f[ed.b]) * (g[ed.a] - g[ed.b]);
    return r;
}

inline double dirichlet_energy(const CpaFunction& f) { return dirichlet_inner(f, f); }

/// Dirichlet energy over l2 (dx_N) norm squared.
inline double rayleigh_quotient(const CpaFunction& f) {
    const double n2 = inner_l2(f, f);
    if (n2 <= 0.0) throw NumericalError("Rayleigh quotient of the zero function");
    return dirichlet_energy(f) / n2;
}

enum class OperatorKind { laplacian, integral };

/// One distinct eigenvalue with its eigenspace. For the Laplacian `value` is
/// lambda_{i,N} and `scaled` is N lambda_{i,N}; for the integral operator
/// `value` is alpha_{i,N} and `scaled` is 1 / alpha_{i,N}.
struct SpectralCluster {
    double value = 0.0;
    double scaled = 0.0;
    std::size_t multiplicity = 0;
    std::vector<CpaFunction> eigenfunctions;  ///< l2-orthonormal against dx_N
};

struct SpectralResult {
    ModelPtr model;
    OperatorKind kind = OperatorKind::laplacian;
    std::size_t n = 0;
    std::vector<SpectralCluster> clusters;

    [[nodiscard]] const SpectralCluster& cluster(std::size_t i) const { return clusters.at(i - 1); }

    /// Eigenfunctions of clusters 1..i-1 (1-based i).
    [[nodiscard]] std::vector<CpaFunction> basis_below(std::size_t i) const {
        std::vector<CpaFunction> out;
        for (std::size_t c = 0; c + 1 < i && c < clusters.size(); ++c)
            out.insert(out.end(), clusters[c].eigenfunctions.begin(), clusters[c].eigenfunctions.end());
        return out;
    }
};

struct EigenOptions {
    std::size_t dense_threshold = kDenseThreshold;
    double cluster_tolerance = kClusterTolerance;
};

namespace detail {

/// Householder reflector H = I - 2 w w^T sending the mass direction to e_1;
/// columns 2..N of H are an orthonormal basis of {u : m . u = 0}.
class MassComplement {
public:
    explicit MassComplement(const Eigen::VectorXd& mass) {
        const double nm = mass.norm();
        if (!(nm > 0.0)) throw ValidationError("mass vector is zero");
        Eigen::VectorXd m = mass / nm;
        const double sign = m(0) >= 0.0 ? 1.0 : -1.0;
        w_ = m;
        w_(0) += sign;  // w = m + sign e_1 avoids cancellation
        w_.normalize();
    }

    [[nodiscard]] Eigen::Index full_size() const noexcept { return w_.size(); }

    /// Embed reduced coordinates v (size N-1) into the subspace.
    [[nodiscard]] Eigen::VectorXd lift(const Eigen::VectorXd& v) const {
        Eigen::VectorXd x(w_.size());
        x(0) = 0.0;
        x.tail(w_.size() - 1) = v;
        return x - 2.0 * w_ * w_.dot(x);
    }

    [[nodiscard]] Eigen::MatrixXd lift(const Eigen::MatrixXd& v) const {
        Eigen::MatrixXd x(w_.size(), v.cols());
        x.row(0).setZero();
        x.bottomRows(w_.size() - 1) = v;
        return x - 2.0 * w_ * (w_.transpose() * x);
    }

    /// P^T A P for symmetric A.
    [[nodiscard]] Eigen::MatrixXd compress(const Eigen::MatrixXd& a) const {
        const Eigen::VectorXd aw = a * w_;
        const double waw = w_.dot(aw);
        Eigen::MatrixXd h = a;
        h.noalias() -= 2.0 * w_ * aw.transpose();
        h.noalias() -= 2.0 * aw * w_.transpose();
        h.noalias() += (4.0 * waw) * (w_ * w_.transpose());
        const Eigen::Index r = w_.size() - 1;
        Eigen::MatrixXd out = h.bottomRightCorner(r, r);
        return 0.5 * (out + out.transpose());
    }

private:
    Eigen::VectorXd w_;
};

/// Flip sign so the entry of largest magnitude is positive; near-ties go
/// to the lowest index.
inline void orient(Eigen::VectorXd& u) {
    const double big = u.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (std::abs(u(i)) >= big * (1.0 - 1e-9)) {
            if (u(i) < 0.0) u = -u;
            return;
        }
    }
}

inline bool same_cluster(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(b), 1.0);
}

/// Group sorted eigenpairs into clusters; eigenvector columns are full-space
/// and standard-orthonormal. Keeps at most `k` clusters.
inline std::vector<SpectralCluster> make_clusters(const ModelPtr& model,
                                                  const std::vector<double>& values,
                                                  const Eigen::MatrixXd& vectors, std::size_t k,
                                                  double tol, OperatorKind kind) {
    const double n = static_cast<double>(model->size());
    const double to_l2 = std::sqrt(n);
    std::vector<SpectralCluster> out;
    std::size_t j = 0;
    while (j < values.size() && out.size() < k) {
        std::size_t end = j + 1;
        while (end < values.size() && same_cluster(values[end], values[end - 1], tol)) ++end;
        SpectralCluster c;
        double acc = 0.0;
        for (std::size_t t = j; t < end; ++t) acc += values[t];
        c.value = acc / static_cast<double>(end - j);
        c.scaled = kind == OperatorKind::laplacian ? n * c.value : 1.0 / c.value;
        c.multiplicity = end - j;
        for (std::size_t t = j; t < end; ++t) {
            Eigen::VectorXd u = vectors.col(static_cast<Eigen::Index>(t)) * to_l2;
            orient(u);
            c.eigenfunctions.emplace_back(model, std::move(u));
        }
        out.push_back(std::move(c));
        j = end;
    }
    return out;
}

/// Solves (Pi Q Pi) x = b on the mass complement via a pinned sparse factorization.
class ComplementSolver {
public:
    ComplementSolver(const KirchhoffMatrix& q, const Eigen::VectorXd& mass)
        : n_(static_cast<Eigen::Index>(q.size())), m_(mass.normalized()) {
        const auto& s = q.sparse();
        Eigen::SparseMatrix<double> pinned = s.bottomRightCorner(n_ - 1, n_ - 1);
        ldlt_.compute(pinned);
        if (ldlt_.info() != Eigen::Success)
            throw NumericalError("pinned Kirchhoff matrix is singular (disconnected model?)");
        msum_ = m_.sum();
        if (std::abs(msum_) < 1e-14 * std::sqrt(static_cast<double>(n_)))
            throw ValidationError("mass vector has zero total mass");
    }

    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        const double t = -b.sum() / msum_;
        const Eigen::VectorXd r = b + t * m_;
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
        y.tail(n_ - 1) = ldlt_.solve(r.tail(n_ - 1));
        const double shift = m_.dot(y) / msum_;
        y.array() -= shift;
        return y;
    }

    [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& x) const {
        return x - m_ * m_.dot(x);
    }

private:
    Eigen::Index n_;
    Eigen::VectorXd m_;
    double msum_ = 1.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// Smallest eigenpairs of Q restricted to the mass complement by subspace
/// iteration on the inverse, for models too large for the dense path.
inline std::pair<std::vector<double>, Eigen::MatrixXd>
iterative_smallest(const KirchhoffMatrix& q, const Eigen::VectorXd& mass, std::size_t k,
                   double cluster_tol) {
    const ComplementSolver solver(q, mass);
    const auto n = static_cast<Eigen::Index>(q.size());
    const double qnorm = q.norm_bound();
    std::size_t block = std::min<std::size_t>(q.size() - 1, 2 * k + 10);
    std::mt19937_64 rng(0x6d65747267ULL);
    std::normal_distribution<double> gauss;
    for (;;) {
        const auto b = static_cast<Eigen::Index>(block);
        Eigen::MatrixXd x(n, b);
        for (Eigen::Index j = 0; j < b; ++j) {
            Eigen::VectorXd col(n);
            for (Eigen::Index i = 0; i < n; ++i) col(i) = gauss(rng);
            x.col(j) = solver.project(col);
        }
        std::vector<double> values;
        Eigen::MatrixXd vectors;
        bool converged = false;
        for (int iter = 0; iter < 500 && !converged; ++iter) {
            for (Eigen::Index j = 0; j < b; ++j) x.col(j) = solver.project(solver.solve(x.col(j)));
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
            x = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
            for (Eigen::Index j = 0; j < b; ++j) x.col(j) = solver.project(x.col(j));
            const Eigen::MatrixXd qx = q.sparse() * x;
            Eigen::MatrixXd h = x.transpose() * qx;
            h = 0.5 * (h + h.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
            x = x * es.eigenvectors();
            const Eigen::MatrixXd res = q.sparse() * x;
            values.assign(es.eigenvalues().data(), es.eigenvalues().data() + b);
            converged = true;
            // need every eigenvector up to the end of the k-th cluster
            std::size_t clusters = 0;
            for (Eigen::Index j = 0; j < b; ++j) {
                if (j > 0 && !same_cluster(values[static_cast<std::size_t>(j)],
                                           values[static_cast<std::size_t>(j - 1)], cluster_tol))
                    ++clusters;
                if (clusters >= k) break;
                const Eigen::VectorXd r =
                    solver.project(res.col(j)) - values[static_cast<std::size_t>(j)] * x.col(j);
                if (r.norm() > 1e-11 * qnorm) { converged = false; break; }
            }
            vectors = x;
        }
        if (!converged) throw NumericalError("subspace iteration did not converge");
        std::size_t clusters = 1;
        for (std::size_t j = 1; j < values.size(); ++j)
            if (!same_cluster(values[j], values[j - 1], cluster_tol)) ++clusters;
        // the last cluster may be truncated by the block; widen until it is not
        if (clusters > k || block == q.size() - 1) return {values, vectors};
        block = std::min<std::size_t>(q.size() - 1, 2 * block);
    }
}

} // namespace detail

/// Eigenpairs of Q with respect to mu_N: f with sum_q mu_N(q) f(q) = 0 and
/// sum_q (Qf)(q) g(q) = lambda sum_q f(q) g(q) for all such g. Solved as the
/// symmetric problem P^T Q P on an orthonormal basis of the mass complement.
inline SpectralResult eigen_mu(const KirchhoffMatrix& q, const DiscreteMeasure& mu, std::size_t k,
                               const EigenOptions& opt = {}) {
    require_same_model(q.model(), mu.model());
    const std::size_t n = q.size();
    if (n < 2) throw ValidationError("model has a single vertex");
    if (k > n - 1)
        throw ValidationError("requested " + std::to_string(k) + " eigenvalues but only " +
                              std::to_string(n - 1) + " exist");
    if (!(mu.mass().norm() > 0.0)) throw ValidationError("mass vector is zero");

    std::vector<double> values;
    Eigen::MatrixXd vectors;
    if (n < opt.dense_threshold) {
        const detail::MassComplement basis(mu.mass());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(basis.compress(q.dense()));
        if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
        values.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        vectors = basis.lift(es.eigenvectors());
    } else {
        std::tie(values, vectors) = detail::iterative_smallest(q, mu.mass(), k, opt.cluster_tolerance);
    }
    if (values.front() <= 0.0)
        throw NumericalError("nonpositive eigenvalue on the mass complement");

    SpectralResult r;
    r.model = q.model();
    r.kind = OperatorKind::laplacian;
    r.n = n;
    r.clusters = detail::make_clusters(q.model(), values, vectors, k, opt.cluster_tolerance,
                                       OperatorKind::laplacian);
    return r;
}

struct EquivalenceResidual {
    double max_residual = 0.0;            ///< Q f - lambda (f - N (int f dx_N) mu_N)
    std::optional<double> ordinary;       ///< Q f - lambda f, when mu_N = dx_N
};

/// Checks every eigenpair against the pointwise form of the eigenproblem.
inline EquivalenceResidual verify_equivalent_laplacian(const SpectralResult& result,
                                                       const KirchhoffMatrix& q,
                                                       const DiscreteMeasure& mu) {
    require_same_model(q.model(), mu.model());
    require_same_model(result.model, q.model());
    const double n = static_cast<double>(q.size());
    const bool is_dx = (mu.mass().array() - 1.0 / n).abs().maxCoeff() <= 1e-15;
    EquivalenceResidual out;
    if (is_dx) out.ordinary = 0.0;
    for (const auto& c : result.clusters) {
        for (const auto& f : c.eigenfunctions) {
            const double scale = std::max(1.0, f.values().cwiseAbs().maxCoeff());
            if (std::abs(integrate(f, mu)) > 1e-8 * scale)
                throw ValidationError("function is not orthogonal to the measure");
            const Eigen::VectorXd qf = q * f.values();
            const double sum_f = f.values().sum();  // N * int f dx_N
            const Eigen::VectorXd rhs = c.value * (f.values() - sum_f * mu.mass());
            out.max_residual = std::max(out.max_residual, (qf - rhs).cwiseAbs().maxCoeff());
            if (is_dx)
                out.ordinary = std::max(*out.ordinary, (qf - c.value * f.values()).cwiseAbs().maxCoeff());
        }
    }
    return out;
}

/// Unit-l2 function orthogonal to mu_N and to every element of `basis`:
/// subtract B_N = int f dmu_N, then the l2 projection onto the basis.
inline CpaFunction deflate(const CpaFunction& f, const std::vector<CpaFunction>& basis,
                           const DiscreteMeasure& mu) {
    require_same_model(f.model(), mu.model());
    const double b = integrate(f, mu);
    Eigen::VectorXd g = f.values().array() - b;
    for (const auto& h : basis) {
        require_same_model(f.model(), h.model());
        const double c = g.dot(h.values()) / static_cast<double>(f.size());
        g -= c * h.values();
    }
    const double norm = std::sqrt(g.squaredNorm() / static_cast<double>(f.size()));
    const double ref = std::max(1.0, std::sqrt(f.values().squaredNorm() / static_cast<double>(f.size())));
    if (!(norm > 1e-12 * ref))
        throw NumericalError("deflation has zero denominator: f lies in span(basis) + constants");
    return {f.model(), g / norm};
}

struct RayleighCheck {
    bool passed = true;
    double target = 0.0;           ///< N lambda_{m,N}
    double min_quotient = 0.0;     ///< over random deflated trials
    double equality_error = 0.0;   ///< max relative |R(h) - target| over cluster m
    std::size_t trials = 0;
};

/// Random deflated functions never beat N lambda_{m,N}; members of cluster m
/// attain it.
inline RayleighCheck rayleigh_min_check(const SpectralResult& result, const KirchhoffMatrix& q,
                                        const DiscreteMeasure& mu, std::size_t m_index,
                                        std::size_t trials, std::uint64_t seed = 0,
                                        double rel_tol = 1e-8) {
    require_same_model(result.model, q.model());
    if (m_index < 1 || m_index > result.clusters.size())
        throw ValidationError("cluster index out of range for Rayleigh check");
    const auto basis = result.basis_below(m_index);
    if (basis.size() + 1 >= q.size()) throw ValidationError("empty orthocomplement");
    RayleighCheck out;
    out.target = result.cluster(m_index).scaled;
    out.trials = trials;
    out.min_quotient = std::numeric_limits<double>::infinity();
    for (const auto& h : result.cluster(m_index).eigenfunctions) {
        const double r = rayleigh_quotient(h);
        out.equality_error = std::max(out.equality_error, std::abs(r - out.target) / out.target);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const auto n = static_cast<Eigen::Index>(q.size());
    for (std::size_t t = 0; t < trials; ++t) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = uni(rng);
        const auto g = deflate(CpaFunction(q.model(), std::move(v)), basis, mu);
        out.min_quotient = std::min(out.min_quotient, rayleigh_quotient(g));
    }
    out.passed = out.equality_error <= rel_tol &&
                 (trials == 0 || out.min_quotient >= out.target * (1.0 - rel_tol));
    return out;
}

} // namespace metrograph
