// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gpart {

// Column-major, like vec(). Flattening a layer is a straight copy of its storage.
using Matrix = Eigen::MatrixXd;

struct LayerSpec {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return rows * cols; }

    bool operator==(const LayerSpec&) const = default;
};

/// Ordered registry of adapted matrices and their slots in the flat space R^N.
class ModelManifest {
public:
    ModelManifest() = default;

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::size_t total() const { return total_; }
    std::size_t layer_count() const { return layers_.size(); }
    const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

    /// One `name rows cols` line per layer.
    std::string serialize() const;
    static ModelManifest parse(const std::string& text);

    bool operator==(const ModelManifest&) const = default;

private:
    friend ModelManifest build_manifest(const std::vector<std::pair<std::size_t, std::size_t>>&,
                                        const std::vector<std::string>&);
    std::vector<LayerSpec> layers_;
    std::size_t total_ = 0;
};

/// Builds a manifest from (rows, cols) pairs. Names default to `layer<i>`.
ModelManifest build_manifest(const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                             const std::vector<std::string>& names = {});

/// A point (or displacement, or gradient) in the flat weight space.
struct WeightVector {
    std::vector<double> values;

    WeightVector() = default;
    explicit WeightVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit WeightVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }

    bool operator==(const WeightVector&) const = default;
};

WeightVector flatten(const std::vector<Matrix>& matrices, const ModelManifest& manifest);
std::vector<Matrix> unflatten(std::span<const double> v, const ModelManifest& manifest);

/// Read-only view of one layer's block inside a flat vector.
Eigen::Map<const Matrix> layer_view(std::span<const double> v, const LayerSpec& layer);
Eigen::Map<Matrix> layer_view(std::span<double> v, const LayerSpec& layer);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_norm(std::span<const double> a);

}  // namespace gpart
