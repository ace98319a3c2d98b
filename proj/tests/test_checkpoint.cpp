#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gpart/adapters.hpp"
#include "gpart/errors.hpp"
#include "gpart/rng.hpp"

using namespace gpart;

namespace {

// From tests/oracles/checkpoint_reference.py.
const std::vector<std::uint8_t> kExample{
    0x47, 0x50, 0x52, 0x54, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x07, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x64, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xe0, 0x3f,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xf4, 0xbf, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x40};

std::size_t offset_of_failure(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        return e.offset();
    }
    FAIL("expected FormatError");
    return 0;
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const char* name) : path(std::filesystem::temp_directory_path() / name) {}
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("64-byte example") {
    const auto bytes = encode_checkpoint({true, 7, 100, {0.5, -1.25, 2.0}});
    CHECK(bytes.size() == 64);
    CHECK(bytes == kExample);
    const auto back = decode_checkpoint(kExample);
    CHECK(back.isometric);
    CHECK(back.seed == 7);
    CHECK(back.total == 100);
    CHECK(back.theta == std::vector<double>{0.5, -1.25, 2.0});
}

TEST_CASE("non-isometric mode byte") {
    CHECK(encode_checkpoint({false, 7, 100, {0.5, -1.25, 2.0}})[8] == 1);
}

TEST_CASE("malformed files report byte offsets") {
    auto bad = kExample;
    bad[2] = 'X';
    CHECK(offset_of_failure(bad) == 0);
    bad = kExample;
    bad[4] = 2;
    CHECK(offset_of_failure(bad) == 4);
    bad = kExample;
    bad[8] = 5;
    CHECK(offset_of_failure(bad) == 8);
    bad = kExample;
    bad[12] = 1;
    CHECK(offset_of_failure(bad) == 12);
    bad = kExample;
    bad[24] = 0;
    CHECK(offset_of_failure(bad) == 24);
    bad = kExample;
    bad[24] = 101;
    CHECK(offset_of_failure(bad) == 24);
    CHECK(offset_of_failure({kExample.begin(), kExample.begin() + 20}) == 20);
    CHECK(offset_of_failure({kExample.begin(), kExample.end() - 1}) == 63);
    bad = kExample;
    bad.push_back(0);
    CHECK(offset_of_failure(bad) == 64);
}

TEST_CASE("encode rejects d outside [1, N]") {
    CHECK_THROWS_AS(encode_checkpoint({true, 1, 2, {}}), ParameterError);
    CHECK_THROWS_AS(encode_checkpoint({true, 1, 2, {1.0, 2.0, 3.0}}), ParameterError);
}

TEST_CASE("save, load, merge is bit-identical") {
    const auto manifest = build_manifest({{9, 7}, {2, 9}});
    GPartAdapter a(manifest, 11, 1234, false);
    SplitMix64 rng(5);
    std::vector<double> theta(11);
    for (auto& x : theta) x = rng.normal();
    a.set_params(theta);
    std::vector<double> w(manifest.total());
    for (auto& x : w) x = rng.normal();
    const WeightVector w0(w);

    TempFile f("gpart_test_roundtrip.gprt");
    save_checkpoint(a, f.path);
    CHECK(std::filesystem::file_size(f.path) == 40 + 8 * 11);
    const GPartAdapter b = load_checkpoint(f.path, manifest);
    CHECK_FALSE(b.isometric());
    CHECK(b.partition() == a.partition());
    CHECK(merge(b, w0) == merge(a, w0));
}

TEST_CASE("load against a different N is a compatibility error") {
    TempFile f("gpart_test_compat.gprt");
    write_checkpoint({true, 3, 50, {1.0, 2.0}}, f.path);
    CHECK_THROWS_AS(load_checkpoint(f.path, build_manifest({{7, 7}})), CompatibilityError);
    CHECK_NOTHROW(load_checkpoint(f.path, build_manifest({{5, 10}})));
}
