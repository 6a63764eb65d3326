#pragma once

// Extremal eigenpairs of large Hermitian operators.
//
// lowest_k() runs a thick-restart Lanczos iteration with full (two-pass
// classical Gram-Schmidt) reorthogonalization. Any type with
//     std::size_t dim() const;
//     void apply(const Vector& x, Vector& y) const;   // y = A x
// can be solved, so large operators never need to be stored explicitly.
//
// Single-vector Krylov methods see only one direction of an exactly degenerate
// eigenspace. After the main iteration converges, a probe run in the orthogonal
// complement of the converged vectors checks for missing members of the lowest
// clusters; found vectors are merged and the whole set is Rayleigh-Ritz refined.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ringsim/error.hpp"
#include "ringsim/parallel.hpp"

namespace ringsim::spectra {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;

template <typename Op>
concept HermitianOperator = requires(const Op& op, const Vector& x, Vector& y) {
    { op.dim() } -> std::convertible_to<std::size_t>;
    op.apply(x, y);
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    cplx value;
};

// Hermitian matrix stored as its upper triangle (row <= col). The lower triangle
// is implied by conjugation.
class SparseHermitian {
public:
    SparseHermitian() = default;

    SparseHermitian(std::size_t dim, std::vector<Triplet> upper) : dim_(dim) {
        for (auto& t : upper) {
            if (t.row >= dim || t.col >= dim)
                throw ParameterError("SparseHermitian: triplet index out of range");
            if (t.row > t.col) {
                std::swap(t.row, t.col);
                t.value = std::conj(t.value);
            }
        }
        std::sort(upper.begin(), upper.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        // merge duplicates by summation
        for (const auto& t : upper) {
            if (!triplets_.empty() && triplets_.back().row == t.row && triplets_.back().col == t.col)
                triplets_.back().value += t.value;
            else
                triplets_.push_back(t);
        }
        for (auto& t : triplets_)
            if (t.row == t.col) t.value = cplx(t.value.real(), 0.0);
        build_csr();
    }

    static SparseHermitian from_dense(const Eigen::MatrixXcd& a, double drop = 0.0) {
        if (a.rows() != a.cols()) throw ParameterError("from_dense: matrix not square");
        std::vector<Triplet> t;
        for (Eigen::Index c = 0; c < a.cols(); ++c)
            for (Eigen::Index r = 0; r <= c; ++r)
                if (std::abs(a(r, c)) > drop)
                    t.push_back({std::size_t(r), std::size_t(c), a(r, c)});
        return SparseHermitian(std::size_t(a.rows()), std::move(t));
    }

    std::size_t dim() const { return dim_; }
    const std::vector<Triplet>& triplets() const { return triplets_; }
    std::size_t stored_nonzeros() const { return triplets_.size(); }

    void apply(const Vector& x, Vector& y) const {
        if (std::size_t(x.size()) != dim_)
            throw ParameterError("SparseHermitian::apply: dimension mismatch");
        y.resize(Eigen::Index(dim_));
        parallel_chunks(dim_, [&](std::size_t b, std::size_t e) {
            for (std::size_t r = b; r < e; ++r) {
                cplx acc = 0.0;
                for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
                    acc += val_[p] * x[Eigen::Index(col_[p])];
                y[Eigen::Index(r)] = acc;
            }
        });
    }

    Eigen::MatrixXcd to_dense() const {
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(Eigen::Index(dim_), Eigen::Index(dim_));
        for (const auto& t : triplets_) {
            a(Eigen::Index(t.row), Eigen::Index(t.col)) = t.value;
            a(Eigen::Index(t.col), Eigen::Index(t.row)) = std::conj(t.value);
        }
        return a;
    }

private:
    void build_csr() {
        // full (both triangles) row storage so apply() is a pure gather
        std::vector<std::size_t> count(dim_ + 1, 0);
        for (const auto& t : triplets_) {
            ++count[t.row + 1];
            if (t.row != t.col) ++count[t.col + 1];
        }
        std::partial_sum(count.begin(), count.end(), count.begin());
        row_ptr_ = count;
        col_.assign(row_ptr_.back(), 0);
        val_.assign(row_ptr_.back(), 0.0);
        std::vector<std::size_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
        for (const auto& t : triplets_) {
            col_[fill[t.row]] = t.col;
            val_[fill[t.row]++] = t.value;
            if (t.row != t.col) {
                col_[fill[t.col]] = t.row;
                val_[fill[t.col]++] = std::conj(t.value);
            }
        }
    }

    std::size_t dim_ = 0;
    std::vector<Triplet> triplets_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_;
    std::vector<cplx> val_;
};

struct EigenResult {
    std::vector<double> values;    // ascending
    std::vector<Vector> vectors;   // unit norm, mutually orthogonal
    std::vector<double> residuals; // ||A v - lambda v||
    std::size_t iterations = 0;    // operator applications
    double norm_estimate = 0.0;
};

struct LanczosOptions {
    std::size_t k = 1;
    double tol = 1e-10;             // residual bound relative to ||A||_est
    std::size_t max_iter = 20000;   // operator applications, all phases together
    std::size_t krylov = 0;         // basis cap; 0 picks max(2k + 20, 40)
    std::uint64_t seed = 1;
    double cluster_tol = 1e-8;      // relative eigenvalue clustering threshold
    bool complete_clusters = true;
    std::vector<Vector> guess;      // optional warm start directions
};

template <HermitianOperator Op>
Vector matvec(const Op& a, const Vector& x) {
    if (std::size_t(x.size()) != a.dim()) throw ParameterError("matvec: dimension mismatch");
    Vector y(x.size());
    a.apply(x, y);
    return y;
}

inline Vector random_unit_vector(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double re = g(rng);
        const double im = g(rng);
        v[i] = cplx(re, im);
    }
    v.normalize();
    return v;
}

// Lower bound on the spectral norm from a few power iterations.
template <HermitianOperator Op>
double estimate_norm(const Op& a, int iterations = 8, std::uint64_t seed = 7) {
    Vector v = random_unit_vector(a.dim(), seed);
    Vector w(v.size());
    double est = 0.0;
    for (int i = 0; i < iterations; ++i) {
        a.apply(v, w);
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        est = std::max(est, n);
        v = w / n;
    }
    return est;
}

namespace detail {

// Columns of `basis` are orthonormal; remove their span from w (twice).
inline void project_out(const Eigen::MatrixXcd& basis, Eigen::Index ncols, Vector& w,
                        Eigen::VectorXcd* coeffs = nullptr) {
    if (ncols == 0) return;
    const auto b = basis.leftCols(ncols);
    Eigen::VectorXcd h = b.adjoint() * w;
    w.noalias() -= b * h;
    Eigen::VectorXcd h2 = b.adjoint() * w;
    w.noalias() -= b * h2;
    if (coeffs) *coeffs = h + h2;
}

// basis.leftCols(nkeep) <- basis.leftCols(ncur) * y.leftCols(nkeep), row block at a time
inline void rotate_in_place(Eigen::MatrixXcd& basis, Eigen::Index ncur, const Eigen::MatrixXcd& y,
                            Eigen::Index nkeep) {
    const Eigen::Index rows = basis.rows();
    const Eigen::Index block = 2048;
    Eigen::MatrixXcd tmp;
    for (Eigen::Index r = 0; r < rows; r += block) {
        const Eigen::Index nr = std::min(block, rows - r);
        tmp.noalias() = basis.block(r, 0, nr, ncur) * y.topLeftCorner(ncur, nkeep);
        basis.block(r, 0, nr, nkeep) = tmp;
    }
}

struct TrlOutcome {
    std::vector<double> values;
    std::vector<Vector> vectors;
    std::vector<double> ritz_residuals;
    bool converged = false;
};

// Thick-restart Lanczos for the nev lowest eigenpairs of A restricted to the
// orthogonal complement of `locked`.
template <HermitianOperator Op>
TrlOutcome thick_restart_lanczos(const Op& a, std::size_t nev, const Eigen::MatrixXcd& locked,
                                 Vector start, std::size_t krylov, double abs_tol,
                                 std::size_t& budget, std::uint64_t seed) {
    const std::size_t dim = a.dim();
    const auto nlocked = locked.cols();
    const std::size_t room = dim - std::size_t(nlocked);
    if (room == 0) return {{}, {}, {}, true};
    nev = std::min(nev, room);
    const Eigen::Index m = Eigen::Index(std::min(std::max(krylov, nev + 2), room));

    Eigen::MatrixXcd v(Eigen::Index(dim), m);
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(m, m);
    Vector w(static_cast<Eigen::Index>(dim));

    auto fresh = [&](Eigen::Index filled, std::uint64_t s) {
        Vector r = random_unit_vector(dim, s);
        project_out(locked, nlocked, r);
        project_out(v, filled, r);
        return r;
    };

    project_out(locked, nlocked, start);
    if (start.norm() < 1e-300) start = fresh(0, seed ^ 0x9e3779b97f4a7c15ULL);
    v.col(0) = start.normalized();

    Eigen::Index nkeep = 0;
    TrlOutcome out;
    std::uint64_t reseed = seed;
    while (true) {
        double beta = 0.0;
        Eigen::Index ncur = m;
        for (Eigen::Index j = nkeep; j < m; ++j) {
            if (budget == 0) {
                ncur = j;
                break;
            }
            a.apply(v.col(j), w);
            --budget;
            // three-term recurrence first; the full pass then only removes
            // rounding noise and a second pass is needed only on large cancellation
            Eigen::VectorXcd h = Eigen::VectorXcd::Zero(j + 1);
            if (j > nkeep) {
                h[j - 1] = t(j - 1, j);
                w.noalias() -= h[j - 1] * v.col(j - 1);
            }
            const cplx alpha = v.col(j).dot(w);
            h[j] += alpha;
            w.noalias() -= alpha * v.col(j);
            project_out(locked, nlocked, w);
            {
                const double before = w.norm();
                const auto b = v.leftCols(j + 1);
                Eigen::VectorXcd g = b.adjoint() * w;
                w.noalias() -= b * g;
                h += g;
                if (w.norm() < 0.7071 * before) {
                    g.noalias() = b.adjoint() * w;
                    w.noalias() -= b * g;
                    h += g;
                }
            }
            for (Eigen::Index i = 0; i <= j; ++i) {
                t(i, j) = h[i];
                t(j, i) = std::conj(h[i]);
            }
            t(j, j) = cplx(h[j].real(), 0.0);
            beta = w.norm();
            if (j + 1 < m && std::size_t(j + 1) >= nev) {
                // early exit once the wanted Ritz pairs are converged
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> peek(t.topLeftCorner(j + 1, j + 1));
                bool done = true;
                for (std::size_t i = 0; i < nev && done; ++i)
                    done = beta * std::abs(peek.eigenvectors()(j, Eigen::Index(i))) <= abs_tol;
                if (done) {
                    ncur = j + 1;
                    break;
                }
            }
            if (j + 1 < m) {
                if (beta <= 1e-13 * std::max(1.0, std::abs(t(j, j)))) {
                    // invariant subspace: continue with a decoupled direction
                    Vector r = fresh(j + 1, ++reseed * 0x2545F4914F6CDD1DULL);
                    if (r.norm() < 1e-12) {
                        ncur = j + 1;
                        beta = 0.0;
                        break;
                    }
                    v.col(j + 1) = r.normalized();
                    beta = 0.0;
                } else {
                    v.col(j + 1) = w / beta;
                }
                t(j + 1, j) = beta;
                t(j, j + 1) = beta;
            }
        }

        if (ncur == 0) return out;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(t.topLeftCorner(ncur, ncur));
        const Eigen::VectorXd& theta = es.eigenvalues();
        const Eigen::MatrixXcd& y = es.eigenvectors();
        const bool exhausted = std::size_t(ncur) == room;
        const std::size_t want = std::min<std::size_t>(nev, std::size_t(ncur));

        std::vector<double> res(want);
        bool ok = true;
        for (std::size_t i = 0; i < want; ++i) {
            res[i] = exhausted ? 0.0 : beta * std::abs(y(ncur - 1, Eigen::Index(i)));
            if (res[i] > abs_tol) ok = false;
        }
        if (ok || budget == 0 || ncur < m) {
            rotate_in_place(v, ncur, y, Eigen::Index(want));
            out.values.assign(theta.data(), theta.data() + want);
            out.ritz_residuals = res;
            out.converged = ok && want == nev;
            out.vectors.reserve(want);
            for (std::size_t i = 0; i < want; ++i) out.vectors.emplace_back(v.col(Eigen::Index(i)));
            return out;
        }

        // thick restart: keep the lowest Ritz vectors, continue from the residual
        nkeep = std::min<Eigen::Index>(m - 2, std::max<Eigen::Index>(Eigen::Index(nev) + 4, m / 2));
        rotate_in_place(v, ncur, y, nkeep);
        t.setZero();
        for (Eigen::Index i = 0; i < nkeep; ++i) t(i, i) = theta[i];
        if (beta > 0.0) {
            v.col(nkeep) = w / beta;
        } else {
            Vector r = fresh(nkeep, ++reseed * 0x2545F4914F6CDD1DULL);
            v.col(nkeep) = r.normalized();
        }
    }
}

}  // namespace detail

// The k lowest eigenpairs of a Hermitian operator. Deterministic for fixed
// (operator, options) at a fixed worker count.
template <HermitianOperator Op>
EigenResult lowest_k(const Op& a, const LanczosOptions& opt) {
    const std::size_t dim = a.dim();
    if (opt.k == 0) throw ParameterError("lowest_k: k must be positive");
    if (opt.k > dim) throw ParameterError("lowest_k: k exceeds dimension");
    const std::size_t krylov = opt.krylov ? opt.krylov : std::max<std::size_t>(2 * opt.k + 20, 40);

    EigenResult result;
    result.norm_estimate = estimate_norm(a, 8, opt.seed + 17);
    std::size_t budget = opt.max_iter;
    const std::size_t start_budget = budget;

    Vector start;
    if (!opt.guess.empty()) {
        start = Vector::Zero(Eigen::Index(dim));
        for (const auto& g : opt.guess) {
            if (std::size_t(g.size()) != dim) throw ParameterError("lowest_k: guess dimension mismatch");
            start += g.normalized();
        }
        start += 1e-4 * random_unit_vector(dim, opt.seed) * std::max(1.0, start.norm());
    } else {
        start = random_unit_vector(dim, opt.seed);
    }

    // grows if Ritz values exceed the running norm estimate
    auto abs_tol = [&](const std::vector<double>& vals) {
        double nrm = result.norm_estimate;
        for (double x : vals) nrm = std::max(nrm, std::abs(x));
        return opt.tol * std::max(nrm, 1e-300);
    };

    Eigen::MatrixXcd none(Eigen::Index(dim), 0);
    auto main = detail::thick_restart_lanczos(a, opt.k, none, start, krylov, opt.tol * result.norm_estimate,
                                              budget, opt.seed);
    if (!main.converged)
        throw ConvergenceError("lowest_k: Lanczos did not converge within max_iter", main.ritz_residuals);

    std::vector<Vector> found = std::move(main.vectors);
    std::vector<double> vals = std::move(main.values);

    if (opt.complete_clusters && found.size() < dim) {
        std::uint64_t probe_seed = opt.seed * 6364136223846793005ULL + 1442695040888963407ULL;
        while (found.size() < dim) {
            Eigen::MatrixXcd q(Eigen::Index(dim), Eigen::Index(found.size()));
            for (std::size_t i = 0; i < found.size(); ++i) q.col(Eigen::Index(i)) = found[i];
            ++probe_seed;
            auto probe = detail::thick_restart_lanczos(a, 1, q, random_unit_vector(dim, probe_seed),
                                                       std::min<std::size_t>(krylov, 40), abs_tol(vals),
                                                       budget, probe_seed);
            if (!probe.converged)
                throw ConvergenceError("lowest_k: cluster probe did not converge", probe.ritz_residuals);
            if (probe.values.empty()) break;
            const double mu = probe.values[0];
            const double top = vals.back();
            const double thresh = top + opt.cluster_tol * std::max(1.0, std::abs(top));
            if (mu > thresh) break;
            found.push_back(std::move(probe.vectors[0]));
            vals.push_back(mu);
            // keep the k lowest plus anything clustered with the k-th
            std::vector<std::size_t> order(vals.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return vals[i] < vals[j]; });
            std::vector<Vector> f2;
            std::vector<double> v2;
            for (std::size_t n = 0; n < order.size(); ++n) {
                const double kth = vals[order[std::min(opt.k, order.size()) - 1]];
                if (n < opt.k || vals[order[n]] <= kth + opt.cluster_tol * std::max(1.0, std::abs(kth))) {
                    f2.push_back(std::move(found[order[n]]));
                    v2.push_back(vals[order[n]]);
                }
            }
            found = std::move(f2);
            vals = std::move(v2);
        }
    }

    // Rayleigh-Ritz on the span of everything found
    const Eigen::Index nf = Eigen::Index(found.size());
    Eigen::MatrixXcd q(Eigen::Index(dim), nf);
    for (Eigen::Index i = 0; i < nf; ++i) q.col(i) = found[std::size_t(i)];
    {
        // re-orthonormalize (modified Gram-Schmidt, two passes)
        for (Eigen::Index i = 0; i < nf; ++i) {
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index j = 0; j < i; ++j) q.col(i) -= q.col(j).dot(q.col(i)) * q.col(j);
            q.col(i).normalize();
        }
    }
    Eigen::MatrixXcd aq(Eigen::Index(dim), nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        Vector y(static_cast<Eigen::Index>(dim));
        a.apply(q.col(i), y);
        aq.col(i) = y;
    }
    Eigen::MatrixXcd small = q.adjoint() * aq;
    small = 0.5 * (small + small.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(small);
    Eigen::MatrixXcd vecs = q * es.eigenvectors();
    Eigen::MatrixXcd avecs = aq * es.eigenvectors();

    for (Eigen::Index i = 0; i < nf; ++i) {
        const double lam = es.eigenvalues()[i];
        result.values.push_back(lam);
        result.vectors.emplace_back(vecs.col(i));
        result.residuals.push_back((avecs.col(i) - lam * vecs.col(i)).norm());
    }
    result.iterations = start_budget - budget + std::size_t(nf);
    return result;
}

// Full spectrum of a dense Hermitian matrix.
inline EigenResult dense_reference(const Eigen::MatrixXcd& a, std::size_t cap = 4096) {
    if (a.rows() != a.cols()) throw ParameterError("dense_reference: matrix not square");
    if (std::size_t(a.rows()) > cap)
        throw CapacityError("dense_reference: dimension " + std::to_string(a.rows()) + " exceeds cap " +
                            std::to_string(cap));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
    EigenResult r;
    r.norm_estimate = es.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        r.values.push_back(es.eigenvalues()[i]);
        r.vectors.emplace_back(es.eigenvectors().col(i));
        r.residuals.push_back((a * es.eigenvectors().col(i) - es.eigenvalues()[i] * es.eigenvectors().col(i)).norm());
    }
    return r;
}

inline EigenResult dense_reference(const SparseHermitian& a, std::size_t cap = 4096) {
    if (a.dim() > cap)
        throw CapacityError("dense_reference: dimension " + std::to_string(a.dim()) + " exceeds cap " +
                            std::to_string(cap));
    return dense_reference(a.to_dense(), cap);
}

// Groups of indices whose eigenvalues agree within rel_tol (relative to max(1, |value|)).
inline std::vector<std::vector<std::size_t>> clusters(const std::vector<double>& values, double rel_tol = 1e-8) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!out.empty()) {
            const double prev = values[out.back().back()];
            if (std::abs(values[i] - prev) <= rel_tol * std::max(1.0, std::abs(prev))) {
                out.back().push_back(i);
                continue;
            }
        }
        out.push_back({i});
    }
    return out;
}

// Eigenvector dump. Little-endian: uint64 dim, uint64 k, then k vectors of dim
// complex entries, each written as (real, imag) doubles.
inline void write_eigenvectors(const std::filesystem::path& path, const std::vector<Vector>& vectors) {
    static_assert(std::endian::native == std::endian::little, "eigenvector dump assumes a little-endian host");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_eigenvectors: cannot open " + path.string());
    const std::uint64_t dim = vectors.empty() ? 0 : std::uint64_t(vectors.front().size());
    const std::uint64_t k = vectors.size();
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&k), sizeof k);
    for (const auto& v : vectors) {
        if (std::uint64_t(v.size()) != dim) throw ParameterError("write_eigenvectors: ragged vectors");
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double re = v[i].real();
            const double im = v[i].imag();
            os.write(reinterpret_cast<const char*>(&re), sizeof re);
            os.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
    }
}

inline std::vector<Vector> read_eigenvectors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_eigenvectors: cannot open " + path.string());
    std::uint64_t dim = 0, k = 0;
    is.read(reinterpret_cast<char*>(&dim), sizeof dim);
    is.read(reinterpret_cast<char*>(&k), sizeof k);
    std::vector<Vector> out;
    for (std::uint64_t n = 0; n < k; ++n) {
        Vector v(static_cast<Eigen::Index>(dim));
        for (std::uint64_t i = 0; i < dim; ++i) {
            double re = 0, im = 0;
            is.read(reinterpret_cast<char*>(&re), sizeof re);
            is.read(reinterpret_cast<char*>(&im), sizeof im);
            v[Eigen::Index(i)] = cplx(re, im);
        }
        if (!is) throw std::runtime_error("read_eigenvectors: truncated file " + path.string());
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace ringsim::spectra
