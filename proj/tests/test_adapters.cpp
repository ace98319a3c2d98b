#include <doctest.h>

#include <cmath>

#include "gpart/adapters.hpp"
#include "gpart/errors.hpp"
#include "gpart/rng.hpp"

using namespace gpart;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

// L(p) = <G, delta(p)>, so dL/dp = pullback_at(p, G). Central differences on L.
double max_pullback_fd_error(const Adapter& adapter, std::span<const double> p, std::span<const double> g) {
    const auto analytic = adapter.pullback_at(p, g);
    std::vector<double> q(p.begin(), p.end());
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double keep = q[k];
        q[k] = keep + h;
        const double up = dot(adapter.delta_at(q).span(), g);
        q[k] = keep - h;
        const double down = dot(adapter.delta_at(q).span(), g);
        q[k] = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic[k]) / std::max(1.0, std::abs(fd)));
    }
    return worst;
}

const ModelManifest kManifest = build_manifest({{6, 5}, {3, 6}}, {"fc0", "head"});

}  // namespace

TEST_CASE("adapter kind names round-trip") {
    for (auto k : {AdapterKind::GPartIsometric, AdapterKind::GPartNonIsometric, AdapterKind::LoRA,
                   AdapterKind::UniLoRA, AdapterKind::FullFT}) {
        CHECK(parse_adapter_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_adapter_kind("adapterx"), ParameterError);
}

TEST_CASE("trainable counts") {
    CHECK(GPartAdapter(kManifest, 7, 1).count_trainable() == 7);
    CHECK(LoRAAdapter(kManifest, 2, 1).count_trainable() == 2 * (6 + 5) + 2 * (3 + 6));
    CHECK(UniLoRAAdapter(kManifest, 2, 9, 1, 2).count_trainable() == 9);
    CHECK(FullFTAdapter(kManifest).count_trainable() == kManifest.total());
}

TEST_CASE("fresh GPart, LoRA and FullFT adapters start at Δw = 0") {
    const WeightVector zero(kManifest.total());
    CHECK(GPartAdapter(kManifest, 5, 3).delta() == zero);
    CHECK(LoRAAdapter(kManifest, 2, 3).delta() == zero);
    CHECK(FullFTAdapter(kManifest).delta() == zero);
}

TEST_CASE("LoRA init: B = 0, A nonzero and seeded") {
    LoRAAdapter a(kManifest, 2, 5);
    LoRAAdapter b(kManifest, 2, 5);
    CHECK(a.factor_b(0).isZero(0.0));
    CHECK_FALSE(a.factor_a(0).isZero(0.0));
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
}

TEST_CASE("merge does not touch w0") {
    GPartAdapter a(kManifest, 4, 2);
    a.set_params(normals(4, 9));
    const WeightVector w0(normals(kManifest.total(), 10));
    const WeightVector copy = w0;
    const WeightVector merged = merge(a, w0);
    CHECK(w0 == copy);
    for (std::size_t i = 0; i < merged.size(); ++i) {
        CHECK(merged[i] == w0[i] + a.delta()[i]);
    }
}

TEST_CASE("non-isometric GPart is the unscaled partition") {
    GPartAdapter iso(kManifest, 4, 2, true);
    GPartAdapter flat(kManifest, 4, 2, false);
    const auto theta = normals(4, 1);
    const WeightVector di = iso.delta_at(theta);
    const WeightVector df = flat.delta_at(theta);
    const auto& pm = iso.partition();
    for (std::size_t i = 0; i < di.size(); ++i) {
        const auto n = static_cast<double>(pm.group_sizes()[pm.assignment()[i]]);
        CHECK(df[i] == doctest::Approx(di[i] * std::sqrt(n)).epsilon(1e-14));
    }
}

TEST_CASE("pullbacks match finite differences of <G, Δw>") {
    const auto g = normals(kManifest.total(), 77);
    SUBCASE("gpart") {
        GPartAdapter a(kManifest, 6, 4);
        CHECK(max_pullback_fd_error(a, normals(6, 1), g) < 1e-8);
    }
    SUBCASE("gpart non-isometric") {
        GPartAdapter a(kManifest, 6, 4, false);
        CHECK(max_pullback_fd_error(a, normals(6, 1), g) < 1e-8);
    }
    SUBCASE("lora") {
        LoRAAdapter a(kManifest, 2, 4);
        CHECK(max_pullback_fd_error(a, normals(a.count_trainable(), 2), g) < 1e-8);
    }
    SUBCASE("unilora") {
        UniLoRAAdapter a(kManifest, 2, 10, 5, 6);
        CHECK(max_pullback_fd_error(a, normals(10, 3), g) < 1e-8);
    }
    SUBCASE("fullft") {
        FullFTAdapter a(kManifest);
        CHECK(max_pullback_fd_error(a, normals(kManifest.total(), 4), g) < 1e-8);
    }
}

TEST_CASE("LoRA factor gradients are G Aᵀ and Bᵀ G") {
    const auto single = build_manifest({{4, 3}});
    LoRAAdapter a(single, 2, 1);
    a.set_params(normals(a.count_trainable(), 8));
    const auto g = normals(12, 9);
    const auto grad = a.pullback_grad(WeightVector(g));
    const Eigen::Map<const Matrix> gm(g.data(), 4, 3);
    const Matrix gb = gm * a.factor_a(0).transpose();
    const Matrix ga = a.factor_b(0).transpose() * gm;
    for (Eigen::Index k = 0; k < gb.size(); ++k) CHECK(grad[static_cast<std::size_t>(k)] == doctest::Approx(gb.data()[k]));
    for (Eigen::Index k = 0; k < ga.size(); ++k) CHECK(grad[8 + static_cast<std::size_t>(k)] == doctest::Approx(ga.data()[k]));
}

TEST_CASE("LoRA at B = 0 has zero A-gradient and nonzero B-gradient") {
    const auto single = build_manifest({{4, 3}});
    LoRAAdapter a(single, 2, 1);
    const auto grad = a.pullback_grad(WeightVector(normals(12, 2)));
    double gb = 0.0;
    double ga = 0.0;
    for (std::size_t k = 0; k < 8; ++k) gb += grad[k] * grad[k];
    for (std::size_t k = 8; k < grad.size(); ++k) ga += grad[k] * grad[k];
    CHECK(gb > 0.0);
    CHECK(ga == 0.0);
}

TEST_CASE("Uni-LoRA at θ = 0 has zero gradient") {
    UniLoRAAdapter a(kManifest, 2, 10, 5, 6);
    const std::vector<double> zero(10, 0.0);
    for (double x : a.pullback_at(zero, normals(kManifest.total(), 3))) {
        CHECK(x == 0.0);
    }
}

TEST_CASE("Uni-LoRA rejects d beyond the factor space") {
    const auto d_factor = 2 * (6 + 5) + 2 * (3 + 6);
    CHECK_NOTHROW(UniLoRAAdapter(kManifest, 2, d_factor, 1, 1));
    CHECK_THROWS_AS(UniLoRAAdapter(kManifest, 2, d_factor + 1, 1, 1), ParameterError);
}

TEST_CASE("length checks") {
    GPartAdapter a(kManifest, 4, 2);
    CHECK_THROWS_AS(a.set_params(std::vector<double>(5)), ManifestError);
    CHECK_THROWS_AS(a.pullback_grad(WeightVector(3)), ManifestError);
    CHECK_THROWS_AS(merge(a, WeightVector(3)), ManifestError);
    CHECK_THROWS_AS(LoRAAdapter(kManifest, 0, 1), ParameterError);
}

TEST_CASE("clone is independent") {
    GPartAdapter a(kManifest, 4, 2);
    auto b = a.clone();
    a.set_params(normals(4, 1));
    CHECK(b->delta() == WeightVector(kManifest.total()));
}
