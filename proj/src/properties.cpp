// SPDX-License-Identifier: Apache-2.0
#include "gpart/properties.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <fmt/format.h>

#include "gpart/adapters.hpp"
#include "gpart/geometry.hpp"
#include "gpart/partition.hpp"
#include "gpart/rng.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

namespace {

using ProjectFn = WeightVector (*)(const PartitionMap&, std::span<const double>);

ProjectFn projector(const VerifyOptions& o) { return o.drop_projection_scale ? &project_unscaled : &project; }

std::vector<double> normals(std::size_t n, SplitMix64& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

PropertyResult verdict(std::string name, bool ok, std::string detail) {
    return {std::move(name), ok, std::move(detail)};
}

// Small random partitions shared by the partition-level properties.
struct RandomPartition {
    std::uint64_t seed;
    std::size_t total;
    std::size_t dim;
};

std::vector<RandomPartition> random_partitions(std::size_t count, std::size_t max_total, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<RandomPartition> out;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t total = 1 + rng.bounded(max_total);
        out.push_back({rng.next(), total, 1 + rng.bounded(total)});
    }
    return out;
}

// A small network and task for the trainer-level properties.
struct Toy {
    Mlp net{NetworkConfig{{6, 12, 10, 3}}};
    TaskData task;
    WeightVector w0;

    Toy() {
        TaskSpec spec;
        spec.seed = 3;
        spec.samples = 120;
        spec.features = 6;
        spec.classes = 3;
        spec.shift_angle = 0.8;
        task = make_task(spec).second;
        w0 = init_weights(net.config(), 5);
    }
};

double fd_relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

std::vector<Property> build_registry() {
    std::vector<Property> props;

    props.push_back({"manifest_offsets", [](const VerifyOptions&) {
        const auto m = build_manifest({{2, 3}, {4, 1}, {5, 5}});
        bool ok = m.layer(0).offset == 0 && m.total() == 6 + 4 + 25;
        for (std::size_t l = 1; l < m.layer_count(); ++l) {
            ok = ok && m.layer(l).offset == m.layer(l - 1).offset + m.layer(l - 1).size();
        }
        return verdict("manifest_offsets", ok, fmt::format("total={}", m.total()));
    }});

    props.push_back({"flatten_roundtrip", [](const VerifyOptions&) {
        const auto m = build_manifest({{3, 4}, {1, 7}, {5, 2}});
        SplitMix64 rng(1);
        const auto v = normals(m.total(), rng);
        const WeightVector back = flatten(unflatten(v, m), m);
        return verdict("flatten_roundtrip", back.values == v, "bit-exact");
    }});

    props.push_back({"partition_orthonormal", [](const VerifyOptions&) {
        double worst = 0.0;
        for (const auto& rp : random_partitions(30, 400, 11)) {
            const Matrix p = materialize(build_partition(rp.seed, rp.total, rp.dim));
            const Matrix gram = p.transpose() * p;
            worst = std::max(worst, (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
        }
        return verdict("partition_orthonormal", worst <= 1e-12, fmt::format("max |PᵀP - I| = {:.3e}", worst));
    }});

    props.push_back({"partition_isometry", [](const VerifyOptions& o) {
        double worst = 0.0;
        for (const auto& rp : random_partitions(20, 2000, 12)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed ^ 0xabc);
            for (int k = 0; k < 50; ++k) {
                const auto x = normals(rp.dim, rng);
                const auto y = normals(rp.dim, rng);
                const WeightVector px = projector(o)(pm, x);
                const WeightVector py = projector(o)(pm, y);
                double image = 0.0;
                double dist = 0.0;
                for (std::size_t i = 0; i < px.size(); ++i) image += (px[i] - py[i]) * (px[i] - py[i]);
                for (std::size_t j = 0; j < x.size(); ++j) dist += (x[j] - y[j]) * (x[j] - y[j]);
                worst = std::max(worst, std::abs(std::sqrt(image) - std::sqrt(dist)) / std::sqrt(dist));
            }
        }
        return verdict("partition_isometry", worst <= 1e-12, fmt::format("max relative distortion = {:.3e}", worst));
    }});

    props.push_back({"partition_left_inverse", [](const VerifyOptions& o) {
        double worst = 0.0;
        for (const auto& rp : random_partitions(20, 2000, 13)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed);
            const auto x = normals(rp.dim, rng);
            const ThetaVector back = pullback(pm, projector(o)(pm, x).span());
            double err = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) err += (back[j] - x[j]) * (back[j] - x[j]);
            worst = std::max(worst, std::sqrt(err) / norm2(x));
        }
        return verdict("partition_left_inverse", worst <= 1e-13, fmt::format("max relative error = {:.3e}", worst));
    }});

    props.push_back({"partition_projector_idempotent", [](const VerifyOptions& o) {
        double worst = 0.0;
        for (const auto& rp : random_partitions(20, 2000, 14)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed);
            const auto v = normals(rp.total, rng);
            const WeightVector once = projector(o)(pm, pullback(pm, v).span());
            const WeightVector twice = projector(o)(pm, pullback(pm, once.span()).span());
            double err = 0.0;
            for (std::size_t i = 0; i < once.size(); ++i) err = std::max(err, std::abs(once[i] - twice[i]));
            worst = std::max(worst, err);
        }
        return verdict("partition_projector_idempotent", worst <= 1e-12, fmt::format("max |PPᵀPPᵀv - PPᵀv| = {:.3e}", worst));
    }});

    props.push_back({"partition_gradient_norm_bound", [](const VerifyOptions& o) {
        bool ok = true;
        double worst_eq = 0.0;
        for (const auto& rp : random_partitions(20, 2000, 15)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed);
            const auto g = normals(rp.total, rng);
            ok = ok && norm2(pullback(pm, g).span()) <= norm2(g) * (1.0 + 1e-15);
            const auto x = normals(rp.dim, rng);
            const WeightVector in_image = projector(o)(pm, x);
            const double a = norm2(pullback(pm, in_image.span()).span());
            const double b = norm2(in_image.span());
            worst_eq = std::max(worst_eq, std::abs(a - b) / b);
        }
        return verdict("partition_gradient_norm_bound", ok && worst_eq <= 1e-12,
                       fmt::format("bound {}; equality gap on image(P) = {:.3e}", ok ? "holds" : "violated", worst_eq));
    }});

    props.push_back({"partition_determinism", [](const VerifyOptions&) {
        const auto a = build_partition(42, 5000, 77);
        const auto b = build_partition(42, 5000, 77);
        const auto golden = build_partition(42, 6, 3);
        const std::vector<std::uint32_t> expect{2, 1, 0, 1, 2, 0};
        const bool ok = a == b && std::equal(expect.begin(), expect.end(), golden.assignment().begin());
        return verdict("partition_determinism", ok, "repeat build and golden (42, 6, 3)");
    }});

    props.push_back({"partition_balance", [](const VerifyOptions&) {
        bool ok = true;
        for (const auto& rp : random_partitions(50, 3000, 16)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            const auto [lo, hi] = std::minmax_element(pm.group_sizes().begin(), pm.group_sizes().end());
            const auto sum = std::accumulate(pm.group_sizes().begin(), pm.group_sizes().end(), std::size_t{0});
            ok = ok && *lo >= 1 && *hi - *lo <= 1 && sum == rp.total;
        }
        return verdict("partition_balance", ok, "sizes differ by <= 1 and sum to N");
    }});

    props.push_back({"weight_decay_isometric", [](const VerifyOptions& o) {
        double worst = 0.0;
        for (const auto& rp : random_partitions(20, 2000, 17)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed);
            const auto theta = normals(rp.dim, rng);
            const double ratio = squared_norm(projector(o)(pm, theta).span()) / squared_norm(theta);
            worst = std::max(worst, std::abs(ratio - 1.0));
        }
        return verdict("weight_decay_isometric", worst <= 1e-12, fmt::format("max |ratio - 1| = {:.3e}", worst));
    }});

    props.push_back({"weight_decay_nonisometric", [](const VerifyOptions&) {
        bool ok = true;
        for (const auto& rp : random_partitions(20, 2000, 18)) {
            GPartAdapter adapter(build_manifest({{rp.total, 1}}), rp.dim, rp.seed, false);
            SplitMix64 rng(rp.seed);
            adapter.set_params(normals(rp.dim, rng));
            const double ratio = weight_decay_audit(adapter).ratio;
            const double lo = static_cast<double>(rp.total / rp.dim);
            const double hi = static_cast<double>((rp.total + rp.dim - 1) / rp.dim);
            ok = ok && ratio >= lo * (1 - 1e-12) && ratio <= hi * (1 + 1e-12);
        }
        return verdict("weight_decay_nonisometric", ok, "ratio within [floor(N/d), ceil(N/d)]");
    }});

    props.push_back({"gpart_injectivity", [](const VerifyOptions& o) {
        double worst = 1.0;
        for (const auto& rp : random_partitions(20, 500, 19)) {
            const auto pm = build_partition(rp.seed, rp.total, rp.dim);
            SplitMix64 rng(rp.seed);
            const auto x = normals(rp.dim, rng);
            auto y = x;
            y[rng.bounded(rp.dim)] += 1e-3;
            const WeightVector px = projector(o)(pm, x);
            const WeightVector py = projector(o)(pm, y);
            double gap = 0.0;
            for (std::size_t i = 0; i < px.size(); ++i) gap += (px[i] - py[i]) * (px[i] - py[i]);
            worst = std::min(worst, std::sqrt(gap) / 1e-3);
        }
        return verdict("gpart_injectivity", worst > 0.0, fmt::format("min image gap / θ gap = {:.6f}", worst));
    }});

    props.push_back({"lora_symmetries", [](const VerifyOptions&) {
        SplitMix64 rng(21);
        Matrix b(8, 3);
        Matrix a(3, 8);
        for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = rng.normal();
        for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = rng.normal();
        std::vector<std::uint64_t> seeds(20);
        std::iota(seeds.begin(), seeds.end(), 100);
        const auto report = symmetry_suite(a, b, seeds);
        double worst = 0.0;
        for (const auto& c : report.checks) {
            if (c.name != "gpart_injective") worst = std::max(worst, c.value);
        }
        return verdict("lora_symmetries", report.all_passed(),
                       fmt::format("{} checks, worst ΔW drift = {:.3e}", report.checks.size(), worst));
    }});

    props.push_back({"frobenius_chain", [](const VerifyOptions&) {
        SplitMix64 rng(22);
        bool ok = true;
        for (int k = 0; k < 200; ++k) {
            const auto m = static_cast<Eigen::Index>(1 + rng.bounded(10));
            const auto n = static_cast<Eigen::Index>(1 + rng.bounded(10));
            const auto r = static_cast<Eigen::Index>(1 + rng.bounded(4));
            Matrix b(m, r);
            Matrix a(r, n);
            for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
            const double ba = (b * a).norm();
            const double prod = b.norm() * a.norm();
            const double amgm = 0.5 * (a.squaredNorm() + b.squaredNorm());
            ok = ok && ba <= prod * (1 + 1e-14) && prod <= amgm * (1 + 1e-14);
        }
        return verdict("frobenius_chain", ok, "‖BA‖ ≤ ‖B‖‖A‖ ≤ ½(‖A‖²+‖B‖²)");
    }});

    props.push_back({"checkpoint_totality", [](const VerifyOptions&) {
        const auto manifest = build_manifest({{20, 10}, {5, 20}});
        GPartAdapter adapter(manifest, 37, 99);
        SplitMix64 rng(23);
        adapter.set_params(normals(37, rng));
        const auto w0 = WeightVector(normals(manifest.total(), rng));
        const auto path = std::filesystem::temp_directory_path() / "gpart_verify_checkpoint.gprt";
        save_checkpoint(adapter, path);
        const auto loaded = load_checkpoint(path, manifest);
        std::filesystem::remove(path);
        const bool ok = merge(loaded, w0) == merge(adapter, w0) && loaded.partition() == adapter.partition();
        return verdict("checkpoint_totality", ok, "merge(load(save(a)), w0) == merge(a, w0)");
    }});

    props.push_back({"trainer_gradient_chain", [](const VerifyOptions& o) {
        const Toy toy;
        const auto manifest = toy.net.manifest();
        const auto pm = build_partition(31, manifest.total(), 40);
        SplitMix64 rng(24);
        auto theta = normals(pm.dim(), rng);
        for (auto& t : theta) t *= 0.1;
        const auto& batch = toy.task.train;
        auto loss_at = [&](const std::vector<double>& th) {
            WeightVector w = projector(o)(pm, th);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += toy.w0[i];
            return evaluate(toy.net, w.span(), toy.task, batch).loss;
        };
        WeightVector w = projector(o)(pm, theta);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += toy.w0[i];
        const ThetaVector grad = pullback(pm, loss_and_grad(toy.net, w.span(), toy.task, batch).grad.span());
        double worst = 0.0;
        constexpr double h = 1e-5;
        for (std::size_t j = 0; j < pm.dim(); ++j) {
            auto plus = theta;
            auto minus = theta;
            plus[j] += h;
            minus[j] -= h;
            const double numeric = (loss_at(plus) - loss_at(minus)) / (2 * h);
            worst = std::max(worst, fd_relative_error(grad[j], numeric));
        }
        return verdict("trainer_gradient_chain", worst <= 1e-5, fmt::format("max relative FD error = {:.3e}", worst));
    }});

    props.push_back({"trainer_gradient_norm_per_step", [](const VerifyOptions&) {
        const Toy toy;
        GPartAdapter adapter(toy.net.manifest(), 30, 3);
        FinetuneOptions opts;
        opts.epochs = 3;
        opts.batch_size = 16;
        opts.seed = 4;
        bool ok = true;
        std::size_t steps = 0;
        finetune(adapter, toy.net, toy.w0, toy.task, opts, [&](const StepInfo& s) {
            ok = ok && s.grad_params_norm <= s.grad_w_norm * (1 + 1e-14);
            ++steps;
        });
        return verdict("trainer_gradient_norm_per_step", ok && steps > 0, fmt::format("{} steps", steps));
    }});

    props.push_back({"trainer_determinism_and_w0", [](const VerifyOptions&) {
        const Toy toy;
        const WeightVector w0_copy = toy.w0;
        FinetuneOptions opts;
        opts.epochs = 3;
        opts.batch_size = 16;
        opts.seed = 5;
        GPartAdapter a(toy.net.manifest(), 25, 8);
        GPartAdapter b(toy.net.manifest(), 25, 8);
        const auto ra = finetune(a, toy.net, toy.w0, toy.task, opts);
        const auto rb = finetune(b, toy.net, toy.w0, toy.task, opts);
        const bool same = ra.train_loss == rb.train_loss && ra.dev_loss == rb.dev_loss &&
                          std::equal(a.params().begin(), a.params().end(), b.params().begin());
        return verdict("trainer_determinism_and_w0", same && toy.w0 == w0_copy, "identical records; w0 untouched");
    }});

    props.push_back({"trainer_fullft_equivalence", [](const VerifyOptions& o) {
        Toy toy;
        const auto manifest = toy.net.manifest();
        FinetuneOptions opts;
        opts.epochs = 4;
        opts.batch_size = 16;
        opts.seed = 6;
        GPartAdapter gpart(manifest, manifest.total(), 41, !o.drop_projection_scale);
        FullFTAdapter full(manifest);
        std::vector<double> lg;
        std::vector<double> lf;
        finetune(gpart, toy.net, toy.w0, toy.task, opts, [&](const StepInfo& s) { lg.push_back(s.loss); });
        finetune(full, toy.net, toy.w0, toy.task, opts, [&](const StepInfo& s) { lf.push_back(s.loss); });
        double worst = lg.size() == lf.size() ? 0.0 : 1.0;
        for (std::size_t k = 0; k < std::min(lg.size(), lf.size()); ++k) worst = std::max(worst, std::abs(lg[k] - lf[k]));
        return verdict("trainer_fullft_equivalence", worst <= 1e-9, fmt::format("max loss gap = {:.3e} over {} steps", worst, lg.size()));
    }});

    props.push_back({"landscape_center_and_dual", [](const VerifyOptions&) {
        const Toy toy;
        GPartAdapter adapter(toy.net.manifest(), 20, 9);
        SplitMix64 rng(25);
        auto theta = normals(20, rng);
        for (auto& t : theta) t *= 0.2;
        adapter.set_params(theta);
        LandscapeSpec spec;
        spec.grid_size = 6;
        const auto grid = loss_landscape(adapter, toy.net, toy.w0, toy.task, spec);
        const auto dual = weight_space_landscape(adapter, toy.net, toy.w0, toy.task, spec);
        const double at_star = evaluate(toy.net, merge(adapter, toy.w0).span(), toy.task, toy.task.dev).loss;
        const auto ca = *LandscapeGrid::zero_index(grid.alphas);
        const auto cb = *LandscapeGrid::zero_index(grid.betas);
        bool center = true;
        double gap = 0.0;
        for (std::size_t s = 0; s < grid.per_seed.size(); ++s) {
            center = center && grid.per_seed[s](static_cast<Eigen::Index>(ca), static_cast<Eigen::Index>(cb)) == at_star;
            gap = std::max(gap, (grid.per_seed[s] - dual.per_seed[s]).cwiseAbs().maxCoeff());
        }
        return verdict("landscape_center_and_dual", center && gap <= 1e-12,
                       fmt::format("center exact: {}; dual gap = {:.3e}", center, gap));
    }});

    props.push_back({"lora_jacobian_fd", [](const VerifyOptions&) {
        SplitMix64 rng(26);
        Matrix b(5, 3);
        Matrix a(3, 4);
        for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = rng.normal();
        for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = rng.normal();
        const auto blocks = lora_jacobian_blocks(a, b);
        const double h = 1e-6;
        double worst = 0.0;
        auto vec = [](const Matrix& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); };
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            Matrix ap = a, am = a;
            ap.data()[k] += h;
            am.data()[k] -= h;
            const Eigen::VectorXd fd = (vec(b * ap) - vec(b * am)) / (2 * h);
            worst = std::max(worst, (fd - blocks.wrt_a.col(k)).norm() / std::max(1.0, blocks.wrt_a.col(k).norm()));
        }
        for (Eigen::Index k = 0; k < b.size(); ++k) {
            Matrix bp = b, bm = b;
            bp.data()[k] += h;
            bm.data()[k] -= h;
            const Eigen::VectorXd fd = (vec(bp * a) - vec(bm * a)) / (2 * h);
            worst = std::max(worst, (fd - blocks.wrt_b.col(k)).norm() / std::max(1.0, blocks.wrt_b.col(k).norm()));
        }
        return verdict("lora_jacobian_fd", worst <= 1e-7, fmt::format("max relative FD error = {:.3e}", worst));
    }});

    props.push_back({"distortion_iso_vs_lora", [](const VerifyOptions&) {
        DistortionContext ctx{build_manifest({{8, 8}}), 16, 2, 7};
        const auto iso = distortion_probe(MapKind::GPartIsometric, ctx, 200, 1);
        const auto lora = distortion_probe(MapKind::LoRA, ctx, 200, 1);
        return verdict("distortion_iso_vs_lora", iso.spread <= 1 + 1e-12 && lora.spread > 1.0,
                       fmt::format("gpart spread = {:.15f}, lora spread = {:.3f}", iso.spread, lora.spread));
    }});

    return props;
}

}  // namespace

const std::vector<Property>& property_registry() {
    static const std::vector<Property> registry = build_registry();
    return registry;
}

std::vector<PropertyResult> run_properties(const VerifyOptions& options) {
    std::vector<PropertyResult> out;
    for (const auto& p : property_registry()) {
        if (!options.filter.empty() && p.name.find(options.filter) == std::string::npos) {
            continue;
        }
        try {
            out.push_back(p.run(options));
        } catch (const std::exception& e) {
            out.push_back({p.name, false, std::string("threw: ") + e.what()});
        }
    }
    return out;
}

}  // namespace gpart
