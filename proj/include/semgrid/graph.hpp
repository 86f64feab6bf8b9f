#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "semgrid/common.hpp"

namespace semgrid {

/// Sparse cyber graph among DER agents. weights(j, m) is the communication
/// weight a_jm from agent m to agent j; zero means no link. Immutable after
/// construction, so spectral quantities can be cached by callers and
/// instances shared across threads freely.
struct CyberGraph {
    int n = 0;
    Mat weights;
    bool undirected = true;

    static CyberGraph from_weights(Mat w, bool undirected_decl = true) {
        CyberGraph g;
        g.n = w.rows();
        g.weights = std::move(w);
        g.undirected = undirected_decl;
        g.validate();
        return g;
    }

    static CyberGraph complete(int n, double weight = 1.0) {
        require(n >= 1, "graph: n must be >= 1");
        Mat w = Mat::square(n);
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m)
                if (j != m) w(j, m) = weight;
        return from_weights(std::move(w));
    }

    static CyberGraph ring(int n, double weight = 1.0) {
        require(n >= 1, "graph: n must be >= 1");
        Mat w = Mat::square(n);
        if (n > 1) {
            for (int j = 0; j < n; ++j) {
                w(j, (j + 1) % n) = weight;
                w(j, (j + n - 1) % n) = weight;
            }
        }
        return from_weights(std::move(w));
    }

    static CyberGraph line(int n, double weight = 1.0) {
        require(n >= 1, "graph: n must be >= 1");
        Mat w = Mat::square(n);
        for (int j = 0; j + 1 < n; ++j) {
            w(j, j + 1) = weight;
            w(j + 1, j) = weight;
        }
        return from_weights(std::move(w));
    }

    void validate() const {
        require(n >= 1, "graph: empty graph");
        require(weights.rows() == n && weights.cols() == n, "graph: weight matrix not n x n");
        for (int j = 0; j < n; ++j) {
            require(weights(j, j) == 0.0, "graph: nonzero diagonal entry (self-edge)");
            for (int m = 0; m < n; ++m)
                require(weights(j, m) >= 0.0 && finite(weights(j, m)),
                        "graph: weight must be finite and >= 0");
        }
        if (undirected)
            require(weights.symmetric(), "graph: declared undirected but weights asymmetric");
    }

    /// Neighbors of agent j with positive incoming weight, ascending by index.
    std::vector<std::pair<int, double>> neighbors(int j) const {
        require(j >= 0 && j < n, "graph: agent index out of range");
        std::vector<std::pair<int, double>> out;
        for (int m = 0; m < n; ++m)
            if (weights(j, m) > 0.0) out.emplace_back(m, weights(j, m));
        return out;
    }
};

struct LaplacianReport {
    Mat laplacian;
    double lambda_max = 0.0;
    double delay_bound_s = 0.0;
    bool bound_advisory = false;  // set for directed graphs; see laplacian_report()
};

namespace detail {

/// Cyclic Jacobi sweeps on a symmetric matrix; returns all eigenvalues
/// (unordered). Plenty accurate for the n <= 64 graphs this library sees.
inline std::vector<double> jacobi_eigenvalues(Mat a, int max_sweeps = 64) {
    const int n = a.rows();
    std::vector<double> eig(n);
    if (n == 1) {
        eig[0] = a(0, 0);
        return eig;
    }
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        double norm = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) norm += a(p, q) * a(p, q);
        if (off <= 1e-30 * std::max(norm, 1e-300) || off < 1e-280) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = 0.5 * (aqq - app) / apq;
                // Stable tangent of the rotation angle.
                double t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    for (int i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

/// Largest singular value of L via power iteration on L^T L. Used as the
/// directed-graph fallback; accuracy is the iteration tolerance, and for
/// non-normal L this is an upper envelope of |lambda_max| rather than the
/// eigenvalue itself.
inline double power_iteration_sigma_max(const Mat& l, int max_iters = 10000, double tol = 1e-12) {
    const int n = l.rows();
    Mat g = Mat::square(n);  // G = L^T L
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += l(k, i) * l(k, j);
            g(i, j) = s;
        }
    std::vector<double> v(n, 0.0);
    for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * i;  // deterministic start, not orthogonal to dominant
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> w(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) w[i] += g(i, j) * v[j];
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) return 0.0;
        for (double& x : w) x /= nrm;
        double lam = 0.0;
        for (int i = 0; i < n; ++i) {
            double gi = 0.0;
            for (int j = 0; j < n; ++j) gi += g(i, j) * w[j];
            lam += w[i] * gi;
        }
        const bool done = std::abs(lam - lambda) <= tol * std::max(1.0, std::abs(lam));
        lambda = lam;
        v = std::move(w);
        if (done && it > 2) break;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace detail

/// In-degree Laplacian L = D_in - A and its spectral quantities. The delay
/// bound pi / (2 lambda_max) is exact for undirected connected graphs; for
/// directed graphs the report is marked advisory since the bound's
/// derivation does not cover them.
inline LaplacianReport laplacian_report(const CyberGraph& g) {
    g.validate();
    Mat l = Mat::square(g.n);
    for (int j = 0; j < g.n; ++j) {
        double din = 0.0;
        for (int m = 0; m < g.n; ++m) din += g.weights(j, m);
        for (int m = 0; m < g.n; ++m) l(j, m) = -g.weights(j, m);
        l(j, j) = din;
    }

    LaplacianReport rep;
    rep.laplacian = l;
    if (g.undirected) {
        const auto eig = detail::jacobi_eigenvalues(l);
        rep.lambda_max = *std::max_element(eig.begin(), eig.end());
    } else {
        rep.lambda_max = detail::power_iteration_sigma_max(l);
        rep.bound_advisory = true;
    }
    if (rep.lambda_max < 0.0 && rep.lambda_max > -1e-12) rep.lambda_max = 0.0;
    if (!(rep.lambda_max > 0.0))
        throw std::domain_error("laplacian_report: lambda_max = 0 (edgeless graph), delay bound undefined");
    rep.delay_bound_s = kPi / (2.0 * rep.lambda_max);
    return rep;
}

}  // namespace semgrid
