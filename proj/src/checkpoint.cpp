// SPDX-License-Identifier: Apache-2.0
#include "gpart/adapters.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gpart/errors.hpp"

namespace gpart {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'P', 'R', 'T'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
        bits = std::bit_cast<std::uint64_t>(value);
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    }
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
    if (data.theta.empty() || data.theta.size() > data.total) {
        throw ParameterError("checkpoint needs 1 <= d <= N");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kCheckpointHeaderBytes + 8 * data.theta.size());
    for (const auto c : kMagic) {
        out.push_back(c);
    }
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint8_t>(out, data.isometric ? 0 : 1);
    for (int i = 0; i < 7; ++i) {
        out.push_back(0);
    }
    put_le<std::uint64_t>(out, data.seed);
    put_le<std::uint64_t>(out, data.theta.size());
    put_le<std::uint64_t>(out, data.total);
    for (double v : data.theta) {
        put_le<double>(out, v);
    }
    return out;
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kCheckpointHeaderBytes) {
        throw FormatError("checkpoint truncated: header needs " + std::to_string(kCheckpointHeaderBytes) +
                              " bytes, file has " + std::to_string(bytes.size()),
                          bytes.size());
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic", 0);
    }
    const auto version = get_le(bytes, 4, 4);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const std::uint8_t mode = bytes[8];
    if (mode > 1) {
        throw FormatError("bad checkpoint mode " + std::to_string(mode), 8);
    }
    for (std::size_t i = 9; i < 16; ++i) {
        if (bytes[i] != 0) {
            throw FormatError("nonzero checkpoint padding", i);
        }
    }
    CheckpointData data;
    data.isometric = mode == 0;
    data.seed = get_le(bytes, 16, 8);
    const std::uint64_t dim = get_le(bytes, 24, 8);
    data.total = get_le(bytes, 32, 8);
    if (dim == 0 || dim > data.total) {
        throw FormatError("checkpoint dim " + std::to_string(dim) + " outside [1, N=" + std::to_string(data.total) +
                              "]",
                          24);
    }
    const std::uint64_t payload = bytes.size() - kCheckpointHeaderBytes;
    if (payload / 8 != dim || payload % 8 != 0) {
        const std::uint64_t expected = kCheckpointHeaderBytes + 8 * dim;
        throw FormatError("checkpoint length " + std::to_string(bytes.size()) + " != expected " +
                              std::to_string(expected),
                          std::min<std::uint64_t>(bytes.size(), expected));
    }
    data.theta.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        data.theta[j] = std::bit_cast<double>(get_le(bytes, kCheckpointHeaderBytes + 8 * j, 8));
    }
    return data;
}

void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(data);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

void save_checkpoint(const GPartAdapter& adapter, const std::filesystem::path& path) {
    const auto& pm = adapter.partition();
    const auto p = adapter.params();
    write_checkpoint(CheckpointData{adapter.isometric(), pm.seed(), pm.total(), {p.begin(), p.end()}}, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

GPartAdapter load_checkpoint(const std::filesystem::path& path, const ModelManifest& manifest) {
    CheckpointData data = read_checkpoint(path);
    if (data.total != manifest.total()) {
        throw CompatibilityError("checkpoint was written for N=" + std::to_string(data.total) +
                                 ", manifest has N=" + std::to_string(manifest.total()));
    }
    const std::size_t dim = data.theta.size();
    return GPartAdapter(manifest, build_partition(data.seed, manifest.total(), dim),
                        ThetaVector(std::move(data.theta)), data.isometric);
}

}  // namespace gpart
