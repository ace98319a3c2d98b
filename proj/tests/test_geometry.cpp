#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"
#include "gpart/rng.hpp"

using namespace gpart;

namespace {

struct Toy {
    Mlp net{NetworkConfig{{6, 10, 3}}};
    TaskData task;
    WeightVector w0;

    Toy() {
        TaskSpec spec;
        spec.seed = 6;
        spec.samples = 90;
        spec.features = 6;
        spec.classes = 3;
        spec.shift_angle = 1.0;
        task = make_task(spec).second;
        w0 = init_weights(net.config(), 2);
    }
};

Matrix random_matrix(Eigen::Index r, Eigen::Index c, SplitMix64& rng) {
    Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
    return m;
}

GPartAdapter trained_like(const Toy& toy, std::size_t d) {
    GPartAdapter a(toy.net.manifest(), d, 12);
    SplitMix64 rng(4);
    std::vector<double> theta(d);
    for (auto& x : theta) x = 0.3 * rng.normal();
    a.set_params(theta);
    return a;
}

}  // namespace

TEST_CASE("grid axis contains an exact zero at the center index") {
    const auto axis = grid_axis({-0.5, 0.5}, 30);
    REQUIRE(axis.size() == 30);
    CHECK(axis.front() == -0.5);
    CHECK(axis[15] == 0.0);
    CHECK(LandscapeGrid::zero_index(axis) == 15);
    CHECK_FALSE(LandscapeGrid::zero_index(grid_axis({0.1, 0.5}, 4)).has_value());
}

TEST_CASE("landscape spec validation") {
    LandscapeSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.grid_size = 1;
    CHECK_THROWS_AS(spec.validate(), ParameterError);
    spec = LandscapeSpec{};
    spec.alpha = {0.5, 0.5};
    CHECK_THROWS_AS(spec.validate(), ParameterError);
    spec = LandscapeSpec{};
    spec.direction_seeds.clear();
    CHECK_THROWS_AS(spec.validate(), ParameterError);
}

TEST_CASE("random directions are rescaled to the norm of θ*") {
    const std::vector<double> theta{3.0, 4.0, 0.0, 0.0};
    const auto [d1, d2] = random_directions(1, theta);
    CHECK(norm2(d1) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(norm2(d2) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(d1 != d2);
    CHECK(random_directions(1, theta).first == d1);
    const auto [z1, z2] = random_directions(2, std::vector<double>(4, 0.0));
    CHECK(norm2(z1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("default landscape: 30x30, exact center, dual agreement") {
    const Toy toy;
    const GPartAdapter a = trained_like(toy, 24);
    const std::vector<double> before(a.params().begin(), a.params().end());
    const auto grid = loss_landscape(a, toy.net, toy.w0, toy.task, LandscapeSpec{});
    CHECK(std::equal(before.begin(), before.end(), a.params().begin()));
    REQUIRE(grid.per_seed.size() == 3);
    CHECK(grid.mean.rows() == 30);
    CHECK(grid.mean.cols() == 30);
    CHECK(grid.flagged == 0);
    const double at_star = evaluate(toy.net, merge(a, toy.w0).span(), toy.task, toy.task.dev).loss;
    for (const auto& m : grid.per_seed) CHECK(m(15, 15) == at_star);

    const auto dual = weight_space_landscape(a, toy.net, toy.w0, toy.task, LandscapeSpec{});
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK((grid.per_seed[s] - dual.per_seed[s]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("threaded landscape is bit-identical and CSV is stable") {
    const Toy toy;
    const GPartAdapter a = trained_like(toy, 10);
    LandscapeSpec spec;
    spec.grid_size = 8;
    std::ostringstream one;
    std::ostringstream two;
    std::ostringstream threaded;
    write_landscape_csv(loss_landscape(a, toy.net, toy.w0, toy.task, spec), one);
    write_landscape_csv(loss_landscape(a, toy.net, toy.w0, toy.task, spec), two);
    write_landscape_csv(loss_landscape(a, toy.net, toy.w0, toy.task, spec, 3), threaded);
    CHECK(one.str() == two.str());
    CHECK(one.str() == threaded.str());
    CHECK(one.str().rfind("seed,alpha,beta,loss\n", 0) == 0);
    CHECK(one.str().find("\nmean,") != std::string::npos);
}

TEST_CASE("landscape works for every adapter kind") {
    const Toy toy;
    LandscapeSpec spec;
    spec.grid_size = 4;
    LoRAAdapter lora(toy.net.manifest(), 2, 1);
    UniLoRAAdapter uni(toy.net.manifest(), 2, 12, 1, 2);
    FullFTAdapter full(toy.net.manifest());
    CHECK(loss_landscape(lora, toy.net, toy.w0, toy.task, spec).flagged == 0);
    CHECK(loss_landscape(uni, toy.net, toy.w0, toy.task, spec).flagged == 0);
    CHECK(loss_landscape(full, toy.net, toy.w0, toy.task, spec).flagged == 0);
}

TEST_CASE("non-finite cells are flagged, not fatal") {
    Toy toy;
    const GPartAdapter a = trained_like(toy, 10);
    toy.task.inputs(static_cast<Eigen::Index>(toy.task.dev[0]), 0) = std::nan("");
    LandscapeSpec spec;
    spec.grid_size = 4;
    spec.direction_seeds = {1};
    const auto grid = loss_landscape(a, toy.net, toy.w0, toy.task, spec);
    CHECK(grid.flagged == 16);
    CHECK(std::isnan(grid.per_seed[0](0, 0)));
}

TEST_CASE("kronecker product") {
    Matrix x(1, 2);
    x << 1, 2;
    Matrix y(2, 1);
    y << 3, 4;
    Matrix expect(2, 2);
    expect << 3, 6,
              4, 8;
    CHECK(kronecker(x, y) == expect);
}

TEST_CASE("LoRA Jacobian blocks match finite differences") {
    SplitMix64 rng(2);
    const Matrix b = random_matrix(6, 2, rng);
    const Matrix a = random_matrix(2, 5, rng);
    const auto blocks = lora_jacobian_blocks(a, b);
    CHECK(blocks.wrt_a.rows() == 30);
    CHECK(blocks.wrt_a.cols() == 10);
    CHECK(blocks.wrt_b.cols() == 12);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        Matrix up = a;
        Matrix down = a;
        up.data()[k] += h;
        down.data()[k] -= h;
        const Matrix fd = (b * up - b * down) / (2 * h);
        CHECK((Eigen::Map<const Eigen::VectorXd>(fd.data(), fd.size()) - blocks.wrt_a.col(k)).cwiseAbs().maxCoeff() < 1e-7);
    }
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        Matrix up = b;
        Matrix down = b;
        up.data()[k] += h;
        down.data()[k] -= h;
        const Matrix fd = (up * a - down * a) / (2 * h);
        CHECK((Eigen::Map<const Eigen::VectorXd>(fd.data(), fd.size()) - blocks.wrt_b.col(k)).cwiseAbs().maxCoeff() < 1e-7);
    }
    CHECK_THROWS_AS(lora_jacobian_blocks(random_matrix(5, 17, rng), random_matrix(4, 5, rng)), ParameterError);
    CHECK_THROWS_AS(lora_jacobian_blocks(random_matrix(2, 3, rng), random_matrix(4, 3, rng)), ParameterError);
}

TEST_CASE("gauge and scale transforms") {
    SplitMix64 rng(3);
    const Matrix b = random_matrix(8, 2, rng);
    const Matrix a = random_matrix(2, 8, rng);
    CHECK_THROWS_AS(gauge_transform(b, a, Matrix::Identity(3, 3)), ParameterError);
    CHECK_THROWS_AS(scale_transform(b, a, 0.0), ParameterError);
    const Matrix g = random_invertible(2, rng);
    const auto [gb, ga] = gauge_transform(b, a, g);
    CHECK(((gb * ga) - b * a).norm() <= 1e-10 * (b * a).norm());
    CHECK_FALSE(ga.isApprox(a));

    std::vector<std::uint64_t> seeds(20);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 1000 + i;
    const auto report = symmetry_suite(a, b, seeds);
    CHECK(report.checks.size() == 80);
    CHECK(report.all_passed());
}

TEST_CASE("distortion: GPart is an isometry, LoRA is not") {
    const DistortionContext ctx{build_manifest({{8, 8}}), 16, 2, 7};
    const auto iso = distortion_probe(MapKind::GPartIsometric, ctx, 200, 1);
    CHECK(iso.ratios.size() == 200);
    CHECK(iso.spread <= 1.0 + 1e-12);
    CHECK(iso.min >= 1.0 - 1e-12);

    const auto flat = distortion_probe(MapKind::GPartNonIsometric, ctx, 200, 1);
    CHECK(flat.min >= 2.0 - 1e-12);  // every group has 64/16 = 4 entries
    CHECK(flat.max <= 2.0 + 1e-12);

    const auto lora = distortion_probe(MapKind::LoRA, ctx, 200, 1);
    const auto uni = distortion_probe(MapKind::UniLoRA, ctx, 200, 1);
    MESSAGE("lora spread ", lora.spread, ", unilora spread ", uni.spread);
    CHECK(lora.spread > 2.0);
    CHECK(uni.spread > 1.0 + 1e-6);
    CHECK_THROWS_AS(distortion_probe(MapKind::LoRA, ctx, 9, 1), ParameterError);

    std::ostringstream csv;
    write_distortion_csv(lora, MapKind::LoRA, csv);
    CHECK(csv.str().rfind("map,pair,ratio\nlora,0,", 0) == 0);
}

TEST_CASE("weight-decay audit") {
    const auto m = build_manifest({{10, 10}});
    GPartAdapter iso(m, 7, 1, true);
    GPartAdapter flat(m, 7, 1, false);
    CHECK(weight_decay_audit(iso).ratio == 1.0);  // θ = 0
    std::vector<double> theta{1, -2, 3, 0.5, 0.25, -1, 2};
    iso.set_params(theta);
    flat.set_params(theta);
    CHECK(weight_decay_audit(iso).ratio == doctest::Approx(1.0).epsilon(1e-12));
    const double r = weight_decay_audit(flat).ratio;
    CHECK(r >= 14.0);
    CHECK(r <= 15.0);
}

TEST_CASE("dimension sweep") {
    const Toy toy;
    FinetuneOptions opts;
    opts.epochs = 3;
    SweepContext ctx{toy.net, toy.w0, toy.task, opts, 5};
    const std::size_t n = toy.net.manifest().total();
    const auto rows = dim_sweep({1, 8, n}, ctx, 2);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.runs == 2);
        CHECK(r.failures == 0);
        CHECK(r.std_dev_acc >= 0.0);
    }
    CHECK_THROWS_AS(dim_sweep({n + 1}, ctx, 1), ParameterError);
    CHECK_THROWS_AS(dim_sweep({4}, ctx, 0), ParameterError);

    std::ostringstream csv;
    write_sweep_csv(rows, csv);
    CHECK(csv.str().rfind("d,mean_dev_acc,std_dev_acc,runs,failures\n1,", 0) == 0);

    ctx.options.lr = 1e300;
    ctx.options.schedule = Schedule::Constant;
    const auto broken = dim_sweep({4}, ctx, 2);
    CHECK(broken[0].failures == 2);
    CHECK(broken[0].runs == 0);
    CHECK(broken[0].errors.size() == 2);
}
