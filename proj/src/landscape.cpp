// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"
#include "gpart/report.hpp"
#include "gpart/rng.hpp"

namespace gpart {

void LandscapeSpec::validate() const {
    if (grid_size < 2) {
        throw ParameterError("landscape grid_size must be >= 2");
    }
    for (const auto* r : {&alpha, &beta}) {
        if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || !(r->lo < r->hi)) {
            throw ParameterError("landscape ranges must be finite and nonempty");
        }
    }
    if (direction_seeds.empty()) {
        throw ParameterError("landscape needs at least one direction seed");
    }
}

std::vector<double> grid_axis(const Interval& range, std::size_t grid_size) {
    std::vector<double> axis(grid_size);
    const double width = range.hi - range.lo;
    for (std::size_t k = 0; k < grid_size; ++k) {
        axis[k] = range.lo + width * static_cast<double>(k) / static_cast<double>(grid_size);
    }
    return axis;
}

std::optional<std::size_t> LandscapeGrid::zero_index(const std::vector<double>& axis) {
    for (std::size_t k = 0; k < axis.size(); ++k) {
        if (axis[k] == 0.0) {
            return k;
        }
    }
    return std::nullopt;
}

std::pair<std::vector<double>, std::vector<double>> random_directions(std::uint64_t seed,
                                                                      std::span<const double> theta_star) {
    const double n = norm2(theta_star);
    const double target = n > 0.0 ? n : 1.0;
    SplitMix64 rng(seed);
    auto draw = [&] {
        std::vector<double> v(theta_star.size());
        for (auto& x : v) {
            x = rng.normal();
        }
        const double scale = target / norm2(v);
        for (auto& x : v) {
            x *= scale;
        }
        return v;
    };
    auto d1 = draw();
    auto d2 = draw();
    return {std::move(d1), std::move(d2)};
}

namespace {

LandscapeGrid empty_grid(const LandscapeSpec& spec, std::span<const double> theta_star) {
    spec.validate();
    LandscapeGrid grid;
    grid.spec = spec;
    grid.alphas = grid_axis(spec.alpha, spec.grid_size);
    grid.betas = grid_axis(spec.beta, spec.grid_size);
    grid.theta_star.assign(theta_star.begin(), theta_star.end());
    return grid;
}

double dev_loss_or_nan(const Mlp& net, std::span<const double> w, const TaskData& task) {
    try {
        const double loss = evaluate(net, w, task, task.dev).loss;
        return std::isfinite(loss) ? loss : std::numeric_limits<double>::quiet_NaN();
    } catch (const NumericError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Fills `values(a, b) = cell(a, b)` for every cell, optionally across threads.
// Each cell writes only its own slot, so the result does not depend on scheduling.
template <typename Cell>
void fill_grid(Matrix& values, std::size_t g, std::size_t threads, Cell&& cell) {
    values.resize(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    const std::size_t cells = g * g;
    auto worker = [&](std::size_t first, std::size_t stride) {
        for (std::size_t c = first; c < cells; c += stride) {
            values(static_cast<Eigen::Index>(c / g), static_cast<Eigen::Index>(c % g)) = cell(c / g, c % g);
        }
    };
    if (threads <= 1) {
        worker(0, 1);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back(worker, t, threads);
    }
    for (auto& th : pool) {
        th.join();
    }
}

void finish(LandscapeGrid& grid) {
    const auto g = static_cast<Eigen::Index>(grid.spec.grid_size);
    grid.mean = Matrix::Zero(g, g);
    for (const auto& m : grid.per_seed) {
        grid.mean += m;
        grid.flagged += static_cast<std::size_t>((m.array() != m.array()).count());
    }
    grid.mean /= static_cast<double>(grid.per_seed.size());
}

}  // namespace

LandscapeGrid loss_landscape(const Adapter& adapter, const Mlp& net, const WeightVector& w0, const TaskData& task,
                             const LandscapeSpec& spec, std::size_t threads) {
    LandscapeGrid grid = empty_grid(spec, adapter.params());
    const auto theta = adapter.params();
    for (const auto seed : spec.direction_seeds) {
        const auto [d1, d2] = random_directions(seed, theta);
        Matrix values;
        fill_grid(values, spec.grid_size, threads, [&](std::size_t a, std::size_t b) {
            std::vector<double> p(theta.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] = theta[i] + grid.alphas[a] * d1[i] + grid.betas[b] * d2[i];
            }
            WeightVector w = adapter.delta_at(p);
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = w0[i] + w[i];
            }
            return dev_loss_or_nan(net, w.span(), task);
        });
        grid.per_seed.push_back(std::move(values));
    }
    finish(grid);
    return grid;
}

LandscapeGrid weight_space_landscape(const GPartAdapter& adapter, const Mlp& net, const WeightVector& w0,
                                     const TaskData& task, const LandscapeSpec& spec) {
    LandscapeGrid grid = empty_grid(spec, adapter.params());
    const WeightVector w_star = merge(adapter, w0);
    for (const auto seed : spec.direction_seeds) {
        const auto [d1, d2] = random_directions(seed, adapter.params());
        const WeightVector u = adapter.delta_at(d1);
        const WeightVector v = adapter.delta_at(d2);
        Matrix values;
        fill_grid(values, spec.grid_size, 1, [&](std::size_t a, std::size_t b) {
            WeightVector w(w_star.size());
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = w_star[i] + grid.alphas[a] * u[i] + grid.betas[b] * v[i];
            }
            return dev_loss_or_nan(net, w.span(), task);
        });
        grid.per_seed.push_back(std::move(values));
    }
    finish(grid);
    return grid;
}

void write_landscape_csv(const LandscapeGrid& grid, std::ostream& out) {
    out << "seed,alpha,beta,loss\n";
    auto block = [&](const std::string& label, const Matrix& values) {
        for (std::size_t a = 0; a < grid.alphas.size(); ++a) {
            for (std::size_t b = 0; b < grid.betas.size(); ++b) {
                out << label << ',' << format_number(grid.alphas[a]) << ',' << format_number(grid.betas[b]) << ','
                    << format_number(values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
            }
        }
    };
    for (std::size_t s = 0; s < grid.per_seed.size(); ++s) {
        block(std::to_string(grid.spec.direction_seeds[s]), grid.per_seed[s]);
    }
    block("mean", grid.mean);
}

}  // namespace gpart
