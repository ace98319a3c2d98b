#include <doctest.h>

#include "gpart/errors.hpp"
#include "gpart/weightspace.hpp"

using namespace gpart;

TEST_CASE("offsets are prefix sums of layer sizes") {
    const auto m = build_manifest({{2, 3}, {4, 1}, {1, 1}}, {"a", "b", "c"});
    CHECK(m.total() == 11);
    CHECK(m.layer(0).offset == 0);
    CHECK(m.layer(1).offset == 6);
    CHECK(m.layer(2).offset == 10);
    CHECK(m.layer(1).name == "b");
}

TEST_CASE("default layer names") {
    const auto m = build_manifest({{2, 2}, {3, 3}});
    CHECK(m.layer(0).name == "layer0");
    CHECK(m.layer(1).name == "layer1");
}

TEST_CASE("degenerate shapes and duplicate names are rejected") {
    CHECK_THROWS_AS(build_manifest({{0, 3}}), ManifestError);
    CHECK_THROWS_AS(build_manifest({{2, 2}, {2, 2}}, {"x", "x"}), ManifestError);
    CHECK_THROWS_AS(build_manifest({{2, 2}}, {"x", "y"}), ManifestError);
}

TEST_CASE("flatten is column-major vec") {
    const auto m = build_manifest({{2, 3}});
    Matrix w(2, 3);
    w << 1, 2, 3,
         4, 5, 6;
    const WeightVector v = flatten({w}, m);
    CHECK(v.values == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("flatten and unflatten round-trip exactly") {
    const auto m = build_manifest({{3, 2}, {1, 5}, {4, 4}});
    std::vector<double> v(m.total());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
    }
    const auto mats = unflatten(v, m);
    CHECK(flatten(mats, m).values == v);
    CHECK(mats[2](1, 3) == v[m.layer(2).offset + 3 * 4 + 1]);
}

TEST_CASE("shape mismatch names the layer") {
    const auto m = build_manifest({{2, 2}, {3, 3}}, {"enc", "dec"});
    try {
        flatten({Matrix::Zero(2, 2), Matrix::Zero(3, 2)}, m);
        FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
        CHECK(std::string(e.what()).find("dec") != std::string::npos);
    }
    CHECK_THROWS_AS(unflatten(std::vector<double>(12), m), ManifestError);
}

TEST_CASE("manifest text round-trip") {
    const auto m = build_manifest({{64, 16}, {4, 64}}, {"fc0", "head"});
    CHECK(m.serialize() == "fc0 64 16\nhead 4 64\n");
    CHECK(ModelManifest::parse(m.serialize()) == m);
    CHECK_THROWS_AS(ModelManifest::parse("fc0 64\n"), ManifestError);
}

TEST_CASE("layer_view aliases the flat storage") {
    const auto m = build_manifest({{2, 2}, {2, 3}});
    std::vector<double> v(m.total(), 0.0);
    layer_view(std::span<double>(v), m.layer(1))(1, 2) = 7.0;
    CHECK(v[4 + 2 * 2 + 1] == 7.0);
}
