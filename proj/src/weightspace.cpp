// SPDX-License-Identifier: Apache-2.0
#include "gpart/weightspace.hpp"

#include <cmath>
#include <sstream>

#include "gpart/errors.hpp"

namespace gpart {

ModelManifest build_manifest(const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                             const std::vector<std::string>& names) {
    if (shapes.empty()) {
        throw ManifestError("manifest needs at least one layer");
    }
    if (!names.empty() && names.size() != shapes.size()) {
        throw ManifestError("manifest: " + std::to_string(names.size()) + " names for " +
                            std::to_string(shapes.size()) + " layers");
    }
    ModelManifest m;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto [rows, cols] = shapes[i];
        std::string name = names.empty() ? "layer" + std::to_string(i) : names[i];
        if (rows == 0 || cols == 0) {
            throw ManifestError("layer '" + name + "' has a zero dimension (" + std::to_string(rows) + "x" +
                                std::to_string(cols) + ")");
        }
        if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
            throw ManifestError("layer " + std::to_string(i) + " name must be a non-empty token");
        }
        for (const auto& prev : m.layers_) {
            if (prev.name == name) {
                throw ManifestError("duplicate layer name '" + name + "'");
            }
        }
        m.layers_.push_back(LayerSpec{std::move(name), rows, cols, offset});
        offset += rows * cols;
    }
    m.total_ = offset;
    return m;
}

std::string ModelManifest::serialize() const {
    std::ostringstream out;
    for (const auto& l : layers_) {
        out << l.name << ' ' << l.rows << ' ' << l.cols << '\n';
    }
    return out.str();
}

ModelManifest ModelManifest::parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::vector<std::string> names;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream fields(line);
        std::string name;
        long long rows = 0;
        long long cols = 0;
        std::string extra;
        if (!(fields >> name >> rows >> cols) || (fields >> extra) || rows <= 0 || cols <= 0) {
            throw ManifestError("manifest line " + std::to_string(lineno) + ": expected `name rows cols`");
        }
        names.push_back(name);
        shapes.emplace_back(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    }
    return build_manifest(shapes, names);
}

WeightVector flatten(const std::vector<Matrix>& matrices, const ModelManifest& manifest) {
    if (matrices.size() != manifest.layer_count()) {
        throw ManifestError("flatten: got " + std::to_string(matrices.size()) + " matrices, manifest has " +
                            std::to_string(manifest.layer_count()) + " layers");
    }
    WeightVector out(manifest.total());
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        const auto& l = manifest.layer(i);
        const auto& mat = matrices[i];
        if (static_cast<std::size_t>(mat.rows()) != l.rows || static_cast<std::size_t>(mat.cols()) != l.cols) {
            throw ManifestError("flatten: layer '" + l.name + "' expects " + std::to_string(l.rows) + "x" +
                                std::to_string(l.cols) + ", got " + std::to_string(mat.rows()) + "x" +
                                std::to_string(mat.cols()));
        }
        std::copy(mat.data(), mat.data() + l.size(), out.values.begin() + static_cast<std::ptrdiff_t>(l.offset));
    }
    return out;
}

std::vector<Matrix> unflatten(std::span<const double> v, const ModelManifest& manifest) {
    if (v.size() != manifest.total()) {
        throw ManifestError("unflatten: vector length " + std::to_string(v.size()) + " != manifest total " +
                            std::to_string(manifest.total()));
    }
    std::vector<Matrix> out;
    out.reserve(manifest.layer_count());
    for (const auto& l : manifest.layers()) {
        out.emplace_back(layer_view(v, l));
    }
    return out;
}

Eigen::Map<const Matrix> layer_view(std::span<const double> v, const LayerSpec& layer) {
    return {v.data() + layer.offset, static_cast<Eigen::Index>(layer.rows), static_cast<Eigen::Index>(layer.cols)};
}

Eigen::Map<Matrix> layer_view(std::span<double> v, const LayerSpec& layer) {
    return {v.data() + layer.offset, static_cast<Eigen::Index>(layer.rows), static_cast<Eigen::Index>(layer.cols)};
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double norm2(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

}  // namespace gpart
