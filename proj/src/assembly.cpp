#include "afem/assembly.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#ifdef AFEM_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "afem/errors.hpp"
#include "afem/parallel.hpp"

namespace afem {

namespace {

struct ElementBlocks {
    Eigen::Matrix<double, 6, 6> a;  // scalar P2 stiffness
    Eigen::Matrix<double, 3, 12> b; // q_i * d_c phi_j, column c * 6 + j
    Eigen::Matrix3d m;
    Eigen::Matrix<double, 12, 1> load; // component c * 6 + j
};

ElementBlocks element_blocks(const ElementGeometry& geo, const VectorFn& f)
{
    ElementBlocks e;
    e.a.setZero();
    e.b.setZero();
    e.m.setZero();
    e.load.setZero();
    const TriangleRule& rule = triangle_rule_6();
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const Bary& l = rule.points[q];
        const double w = rule.weights[q] * geo.area;
        const auto phi = p2::values(l);
        const auto dphi = p2::gradients(l, geo);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                e.a(i, j) += w * dphi[static_cast<std::size_t>(i)].dot(dphi[static_cast<std::size_t>(j)]);
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 2; ++c)
                for (int j = 0; j < 6; ++j)
                    e.b(i, c * 6 + j) += w * l[static_cast<std::size_t>(i)] * dphi[static_cast<std::size_t>(j)][c];
            for (int j = 0; j < 3; ++j)
                e.m(i, j) += w * l[static_cast<std::size_t>(i)] * l[static_cast<std::size_t>(j)];
        }
        if (f) {
            const Vec2 fv = f(geo.point(l));
            for (int c = 0; c < 2; ++c)
                for (int j = 0; j < 6; ++j)
                    e.load(c * 6 + j) += w * fv[c] * phi[static_cast<std::size_t>(j)];
        }
    }
    return e;
}

std::string describe_unknown(const StokesSystem& sys, Eigen::Index k)
{
    const auto nf = static_cast<Eigen::Index>(sys.free_dofs.size());
    const auto np = static_cast<Eigen::Index>(sys.dofs->n_p());
    std::ostringstream os;
    if (k < nf) {
        const int dof = sys.free_dofs[static_cast<std::size_t>(k)];
        const auto n_nodes = static_cast<int>(sys.dofs->n_nodes());
        const Point& x = sys.dofs->node_point(dof % n_nodes);
        os << "velocity dof " << dof << " (component " << dof / n_nodes << " at " << x.x() << "," << x.y() << ")";
    } else if (k < nf + np) {
        const Point& x = sys.dofs->node_point(static_cast<int>(k - nf));
        os << "pressure dof " << (k - nf) << " (at " << x.x() << "," << x.y() << ")";
    } else {
        os << "zero-mean multiplier";
    }
    return os.str();
}

[[noreturn]] void report_singular(const StokesSystem& sys, const SparseMatrix& k, const std::string& backend)
{
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(k);
    std::string detail = lu.lastErrorMessage();
    const auto pos = detail.find("ZERO COLUMN AT ");
    if (pos != std::string::npos) {
        const Eigen::Index col = std::stol(detail.substr(pos + 15));
        detail += " -> " + describe_unknown(sys, col);
    }
    throw SolverError("singular saddle-point factorization (" + backend + "): " + detail);
}

} // namespace

StokesSystem assemble(std::shared_ptr<const DofMap> dofs, const VectorFn& f, const VectorFn& g)
{
    const DofMap& d = *dofs;
    const Partition& part = d.partition();
    const std::size_t n_el = part.size();

    std::vector<ElementBlocks> blocks(n_el);
    parallel_for(n_el, [&](std::size_t i) { blocks[i] = element_blocks(ElementGeometry(part.corners(i)), f); });

    StokesSystem sys;
    sys.dofs = dofs;
    const auto nu = static_cast<Eigen::Index>(d.n_u());
    const auto np = static_cast<Eigen::Index>(d.n_p());
    sys.load = Eigen::VectorXd::Zero(nu);
    sys.mean = Eigen::VectorXd::Zero(np);
    std::vector<Eigen::Triplet<double>> ta, tb, tm;
    ta.reserve(n_el * 72);
    tb.reserve(n_el * 36);
    tm.reserve(n_el * 9);
    for (std::size_t i = 0; i < n_el; ++i) {
        const ElementBlocks& e = blocks[i];
        const auto& nodes = d.nodes(i);
        const auto& pd = d.pressure_dofs(i);
        for (int c = 0; c < 2; ++c)
            for (int r = 0; r < 6; ++r) {
                const int row = d.velocity_dof(nodes[static_cast<std::size_t>(r)], c);
                for (int s = 0; s < 6; ++s)
                    ta.emplace_back(row, d.velocity_dof(nodes[static_cast<std::size_t>(s)], c), e.a(r, s));
                sys.load[row] += e.load(c * 6 + r);
            }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c)
                for (int s = 0; s < 6; ++s)
                    tb.emplace_back(pd[static_cast<std::size_t>(r)], d.velocity_dof(nodes[static_cast<std::size_t>(s)], c),
                                    e.b(r, c * 6 + s));
            for (int s = 0; s < 3; ++s)
                tm.emplace_back(pd[static_cast<std::size_t>(r)], pd[static_cast<std::size_t>(s)], e.m(r, s));
            sys.mean[pd[static_cast<std::size_t>(r)]] += part.area(i) / 3.0;
        }
    }
    sys.A.resize(nu, nu);
    sys.A.setFromTriplets(ta.begin(), ta.end());
    sys.B.resize(np, nu);
    sys.B.setFromTriplets(tb.begin(), tb.end());
    sys.M.resize(np, np);
    sys.M.setFromTriplets(tm.begin(), tm.end());

    sys.dirichlet = Eigen::VectorXd::Zero(nu);
    if (g) {
        for (std::size_t n = 0; n < d.n_nodes(); ++n) {
            if (!d.boundary_node(static_cast<int>(n)))
                continue;
            const Vec2 val = g(d.node_point(static_cast<int>(n)));
            sys.dirichlet[d.velocity_dof(static_cast<int>(n), 0)] = val.x();
            sys.dirichlet[d.velocity_dof(static_cast<int>(n), 1)] = val.y();
        }
    }
    std::vector<bool> fixed(static_cast<std::size_t>(nu), false);
    for (int dof : d.boundary_velocity_dofs())
        fixed[static_cast<std::size_t>(dof)] = true;
    for (Eigen::Index i = 0; i < nu; ++i)
        if (!fixed[static_cast<std::size_t>(i)])
            sys.free_dofs.push_back(static_cast<int>(i));
    return sys;
}

SparseMatrix StokesSystem::kkt_matrix() const
{
    const auto nu = static_cast<std::size_t>(dofs->n_u());
    const auto nf = static_cast<Eigen::Index>(free_dofs.size());
    const auto np = static_cast<Eigen::Index>(dofs->n_p());
    std::vector<int> pos(nu, -1);
    for (std::size_t k = 0; k < free_dofs.size(); ++k)
        pos[static_cast<std::size_t>(free_dofs[k])] = static_cast<int>(k);

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(A.nonZeros() + 2 * B.nonZeros() + 2 * np));
    for (Eigen::Index c = 0; c < A.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
            const int r = pos[static_cast<std::size_t>(it.row())];
            const int s = pos[static_cast<std::size_t>(it.col())];
            if (r >= 0 && s >= 0)
                t.emplace_back(r, s, it.value());
        }
    for (Eigen::Index c = 0; c < B.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(B, c); it; ++it) {
            const int s = pos[static_cast<std::size_t>(it.col())];
            if (s < 0)
                continue;
            t.emplace_back(nf + it.row(), s, -it.value());
            t.emplace_back(s, nf + it.row(), -it.value());
        }
    const Eigen::Index lam = nf + np;
    for (Eigen::Index i = 0; i < np; ++i) {
        t.emplace_back(nf + i, lam, mean[i]);
        t.emplace_back(lam, nf + i, mean[i]);
    }
    SparseMatrix k(lam + 1, lam + 1);
    k.setFromTriplets(t.begin(), t.end());
    return k;
}

Eigen::VectorXd StokesSystem::kkt_rhs() const
{
    const auto nf = static_cast<Eigen::Index>(free_dofs.size());
    const auto np = static_cast<Eigen::Index>(dofs->n_p());
    const Eigen::VectorXd au = A * dirichlet;
    const Eigen::VectorXd bu = B * dirichlet;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + np + 1);
    for (Eigen::Index k = 0; k < nf; ++k) {
        const int dof = free_dofs[static_cast<std::size_t>(k)];
        rhs[k] = load[dof] - au[dof];
    }
    // -B u = 0 with the boundary part moved to the right.
    rhs.segment(nf, np) = bu;
    return rhs;
}

SolutionPair solve(const StokesSystem& sys)
{
    const SparseMatrix k = sys.kkt_matrix();
    const Eigen::VectorXd rhs = sys.kkt_rhs();

    const double bound = 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    auto residual = [&](const Eigen::VectorXd& x) {
        return x.allFinite() ? (k * x - rhs).lpNorm<Eigen::Infinity>() : std::numeric_limits<double>::infinity();
    };

    Eigen::VectorXd x;
    double res = std::numeric_limits<double>::infinity();
#ifdef AFEM_HAVE_UMFPACK
    {
        Eigen::UmfPackLU<SparseMatrix> lu;
        lu.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
        lu.compute(k);
        if (lu.info() != Eigen::Success)
            report_singular(sys, k, "umfpack");
        x = lu.solve(rhs);
        res = residual(x);
    }
#endif
    if (!(res <= bound)) {
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(k);
        if (lu.info() != Eigen::Success)
            report_singular(sys, k, "sparselu");
        x = lu.solve(rhs);
        res = residual(x);
    }
    if (!(res <= bound)) {
        std::ostringstream os;
        os << "saddle-point residual " << res << " exceeds bound " << bound;
        throw SolverError(os.str());
    }

    SolutionPair s = SolutionPair::zero(sys.dofs);
    s.u = sys.dirichlet;
    const auto nf = static_cast<Eigen::Index>(sys.free_dofs.size());
    const auto np = static_cast<Eigen::Index>(sys.dofs->n_p());
    for (Eigen::Index i = 0; i < nf; ++i)
        s.u[sys.free_dofs[static_cast<std::size_t>(i)]] = x[i];
    s.p = x.segment(nf, np);
    s.multiplier = x[nf + np];
    s.residual = res;
    return s;
}

SolutionPair solve_vector_laplace(const StokesSystem& sys)
{
    const auto nf = static_cast<Eigen::Index>(sys.free_dofs.size());
    const SparseMatrix k = sys.kkt_matrix().topLeftCorner(nf, nf);
    const Eigen::VectorXd rhs = sys.kkt_rhs().head(nf);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(k);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("vector Laplace factorization failed");
    const Eigen::VectorXd x = ldlt.solve(rhs);
    SolutionPair s = SolutionPair::zero(sys.dofs);
    s.u = sys.dirichlet;
    for (Eigen::Index i = 0; i < nf; ++i)
        s.u[sys.free_dofs[static_cast<std::size_t>(i)]] = x[i];
    s.residual = (k * x - rhs).lpNorm<Eigen::Infinity>();
    return s;
}

namespace {

// Per-element {|grad e_u|^2, int e_p, int (e_p - shift)^2}; the pressure
// error is measured after removing its mean.
template <class ElementError>
ErrorNorms reduce_errors(const Partition& part, ElementError&& element_error)
{
    // two passes: the mean first, then the shifted square, to avoid cancellation
    std::vector<std::array<double, 3>> per(part.size());
    parallel_for(part.size(), [&](std::size_t i) { per[i] = element_error(i, 0.0); });
    double grad_sq = 0.0, p_int = 0.0, area = 0.0;
    for (std::size_t i = 0; i < part.size(); ++i) {
        grad_sq += per[i][0];
        p_int += per[i][1];
        area += part.area(i);
    }
    const double mean = p_int / area;
    parallel_for(part.size(), [&](std::size_t i) { per[i] = element_error(i, mean); });
    double p_sq = 0.0;
    for (std::size_t i = 0; i < part.size(); ++i)
        p_sq += per[i][2];
    return {std::sqrt(std::max(0.0, grad_sq)), std::sqrt(std::max(0.0, p_sq))};
}

} // namespace

ErrorNorms error_norms(const SolutionPair& sol, const ExactSolution& exact)
{
    const TriangleRule& rule = triangle_rule_6();
    return reduce_errors(sol.dofs->partition(), [&](std::size_t i, double shift) {
        const LocalSolution ls = local_solution(sol, i);
        std::array<double, 3> acc{0, 0, 0};
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const Bary& l = rule.points[q];
            const double w = rule.weights[q] * ls.geo.area;
            const Point x = ls.geo.point(l);
            const Mat2 ge = exact.grad_u(x) - ls.velocity_gradient(l);
            const double pe = (exact.p ? exact.p(x) : 0.0) - ls.pressure(l);
            acc[0] += w * ge.squaredNorm();
            acc[1] += w * pe;
            acc[2] += w * (pe - shift) * (pe - shift);
        }
        return acc;
    });
}

ErrorNorms difference_norms(const SolutionPair& a, const SolutionPair& b)
{
    if (a.dofs.get() != b.dofs.get() && !a.dofs->partition().same_leaves(b.dofs->partition()))
        throw InvalidArgument("difference_norms: pairs live on different partitions");
    SolutionPair diff = a;
    diff.u -= b.u;
    diff.p -= b.p;
    const TriangleRule& rule = triangle_rule_6();
    return reduce_errors(a.dofs->partition(), [&](std::size_t i, double shift) {
        const LocalSolution ls = local_solution(diff, i);
        std::array<double, 3> acc{0, 0, 0};
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const Bary& l = rule.points[q];
            const double w = rule.weights[q] * ls.geo.area;
            const double pe = ls.pressure(l);
            acc[0] += w * ls.velocity_gradient(l).squaredNorm();
            acc[1] += w * pe;
            acc[2] += w * (pe - shift) * (pe - shift);
        }
        return acc;
    });
}

double inf_sup_constant(const StokesSystem& sys)
{
    const std::size_t total = sys.dofs->n_u() + sys.dofs->n_p();
    if (total > 4000)
        throw InvalidArgument("inf_sup_constant: " + std::to_string(total) +
                              " dofs exceed the dense diagnostic budget of 4000");
    const auto nf = static_cast<Eigen::Index>(sys.free_dofs.size());
    const auto np = static_cast<Eigen::Index>(sys.dofs->n_p());
    const SparseMatrix k = sys.kkt_matrix();
    const SparseMatrix a_ff = k.topLeftCorner(nf, nf);
    const Eigen::MatrixXd bt = Eigen::MatrixXd(k.block(0, nf, nf, np)); // -B_f^T

    Eigen::SimplicialLDLT<SparseMatrix> ldlt(a_ff);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("inf_sup_constant: velocity stiffness factorization failed");
    const Eigen::MatrixXd x = ldlt.solve(bt);
    Eigen::MatrixXd s = bt.transpose() * x;
    s = 0.5 * (s + s.transpose());

    const Eigen::MatrixXd m = Eigen::MatrixXd(sys.M);
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    const Eigen::MatrixXd l = llt.matrixL();
    const Eigen::MatrixXd linv_s = l.triangularView<Eigen::Lower>().solve(s);
    Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(linv_s.transpose()).transpose();
    c = 0.5 * (c + c.transpose());

    // Zero mean in the mass-weighted coordinates: orthogonal to L^T 1.
    const Eigen::VectorXd w = l.transpose() * Eigen::VectorXd::Ones(np);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(np, np);
    const Eigen::MatrixXd z = q.rightCols(np - 1);
    const Eigen::MatrixXd reduced = z.transpose() * c * z;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced, Eigen::EigenvaluesOnly);
    const double lambda_min = eig.eigenvalues().minCoeff();
    return std::sqrt(std::max(0.0, lambda_min));
}

void dump_system(const StokesSystem& sys, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open system dump file: " + path);
    const SparseMatrix k = sys.kkt_matrix();
    out << std::setprecision(17);
    for (Eigen::Index c = 0; c < k.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(k, c); it; ++it)
            out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

} // namespace afem
