// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"

namespace gpart {

Matrix kronecker(const Matrix& x, const Matrix& y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return out;
}

JacobianBlocks lora_jacobian_blocks(const Matrix& a, const Matrix& b) {
    const auto r = static_cast<std::size_t>(a.rows());
    const auto n = static_cast<std::size_t>(a.cols());
    const auto m = static_cast<std::size_t>(b.rows());
    if (static_cast<std::size_t>(b.cols()) != r || r == 0) {
        throw ParameterError("LoRA factors need B: m x r and A: r x n with r >= 1");
    }
    if (r > kDenseRankLimit || m > kDenseDimLimit || n > kDenseDimLimit) {
        throw ParameterError("dense Jacobian limited to r <= 4 and m, n <= 16");
    }
    const auto in = Matrix::Identity(a.cols(), a.cols());
    const auto im = Matrix::Identity(b.rows(), b.rows());
    return {kronecker(in, b), kronecker(a.transpose(), im)};
}

std::pair<Matrix, Matrix> gauge_transform(const Matrix& b, const Matrix& a, const Matrix& g) {
    if (g.rows() != g.cols() || g.rows() != b.cols()) {
        throw ParameterError("gauge matrix must be r x r");
    }
    const Eigen::PartialPivLU<Matrix> lu(g);
    return {b * lu.inverse(), g * a};
}

std::pair<Matrix, Matrix> scale_transform(const Matrix& b, const Matrix& a, double lambda) {
    if (lambda == 0.0) {
        throw ParameterError("scale transform needs λ != 0");
    }
    return {lambda * b, a / lambda};
}

Matrix random_invertible(std::size_t r, SplitMix64& rng, double max_condition) {
    const auto n = static_cast<Eigen::Index>(r);
    for (;;) {
        Matrix g(n, n);
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            g.data()[k] = rng.normal();
        }
        const Eigen::JacobiSVD<Matrix> svd(g);
        const auto& s = svd.singularValues();
        if (s(n - 1) > 0.0 && s(0) / s(n - 1) <= max_condition) {
            return g;
        }
    }
}

bool SymmetryReport::all_passed() const {
    for (const auto& c : checks) {
        if (!c.passed) {
            return false;
        }
    }
    return !checks.empty();
}

SymmetryReport symmetry_suite(const Matrix& a, const Matrix& b, const std::vector<std::uint64_t>& seeds) {
    if (b.cols() != a.rows() || a.rows() == 0) {
        throw ParameterError("symmetry suite needs B: m x r and A: r x n with r >= 1");
    }
    const Matrix product = b * a;
    const double scale = product.norm();
    auto relative = [&](const Matrix& other) {
        const double diff = (other - product).norm();
        return scale > 0.0 ? diff / scale : diff;
    };
    constexpr double kTol = 1e-10;
    SymmetryReport report;
    for (const auto seed : seeds) {
        SplitMix64 rng(seed);
        const Matrix g = random_invertible(static_cast<std::size_t>(a.rows()), rng);
        const auto [gb, ga] = gauge_transform(b, a, g);
        const double gauge = relative(gb * ga);
        report.checks.push_back({"gauge", seed, gauge, kTol, gauge <= kTol});
        for (const double lambda : {0.1, 10.0}) {
            const auto [sb, sa] = scale_transform(b, a, lambda);
            const double err = relative(sb * sa);
            report.checks.push_back({"scale(" + std::string(lambda < 1.0 ? "0.1" : "10") + ")", seed, err, kTol,
                                     err <= kTol});
        }

        // Distinct θ stay at least their own distance apart after P.
        const std::size_t total = static_cast<std::size_t>(product.size());
        const std::size_t dim = std::max<std::size_t>(1, total / 4);
        const PartitionMap pm = build_partition(seed, total, dim);
        std::vector<double> x(dim);
        std::vector<double> y(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = rng.normal();
            y[k] = rng.normal();
        }
        const WeightVector px = project(pm, x);
        const WeightVector py = project(pm, y);
        double gap = 0.0;
        double dist = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            gap += (px[i] - py[i]) * (px[i] - py[i]);
        }
        for (std::size_t k = 0; k < dim; ++k) {
            dist += (x[k] - y[k]) * (x[k] - y[k]);
        }
        const double ratio = std::sqrt(gap) / std::sqrt(dist);
        report.checks.push_back({"gpart_injective", seed, ratio, 1.0 - 1e-12, ratio >= 1.0 - 1e-12});
    }
    return report;
}

WeightDecayAudit weight_decay_audit(const GPartAdapter& adapter) {
    WeightDecayAudit audit;
    audit.theta_sq = squared_norm(adapter.params());
    audit.delta_sq = squared_norm(adapter.delta().span());
    audit.ratio = audit.theta_sq == 0.0 ? 1.0 : audit.delta_sq / audit.theta_sq;
    return audit;
}

}  // namespace gpart
