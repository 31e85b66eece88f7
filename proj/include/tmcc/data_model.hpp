#pragma once

#include "tmcc/expfam.hpp"
#include "tmcc/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tmcc {

/// Dense values with a 0/1 observation mask of the same shape. Unobserved
/// entries are stored as 0 so that no kernel ever sees a NaN.
struct MaskedMatrix {
    DenseMatrix values;
    DenseMatrix mask;

    MaskedMatrix() = default;
    MaskedMatrix(DenseMatrix v, DenseMatrix m) : values(std::move(v)), mask(std::move(m)) {}

    static MaskedMatrix fully_observed(const DenseMatrix& v);
    /// NaN marks a missing entry.
    static MaskedMatrix from_nan(const DenseMatrix& v);
    DenseMatrix to_nan() const;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
    Index observed_count() const;
};

/// mask o S
DenseMatrix apply_mask(const DenseMatrix& mask, const DenseMatrix& S);

struct TaskBlock {
    MaskedMatrix data;
    expfam::Family family;
};

/// Known linear information A X_* = B on the true features (A is q x n,
/// B is q x d).
struct CalibrationConstraint {
    DenseMatrix A;
    DenseMatrix B;
};

/// Column layout of the concatenated matrix [X, Z^(1), ..., Z^(S)].
struct BlockLayout {
    Index rows = 0;
    Index feature_cols = 0;
    std::vector<Index> task_offsets;
    std::vector<Index> task_widths;

    Index task_count() const { return static_cast<Index>(task_widths.size()); }
    Index total_cols() const;
    bool operator==(const BlockLayout&) const = default;
};

struct Dataset {
    MaskedMatrix features;
    std::vector<TaskBlock> tasks;
    std::optional<CalibrationConstraint> calibration;

    Index n() const { return features.rows(); }
    Index d() const { return features.cols(); }
    Index total_cols() const;
    BlockLayout layout() const;

    /// Copy with the calibration dropped.
    Dataset without_calibration() const;
    /// Copy holding only the task blocks (zero-width feature block).
    Dataset tasks_only() const;
};

/// FNV-1a over shapes, masks, values, families and calibration. Used to show
/// that methods in a trial consumed the same data.
std::uint64_t dataset_hash(const Dataset& ds);

struct Violation {
    std::string what;
    /// -1 for the feature matrix / calibration, otherwise a 0-based task index.
    int block = -1;
    Index row = -1;
    Index col = -1;

    std::string to_string() const;
};

/// Threshold for the smallest singular value of A.
inline constexpr double kCalibrationSigmaMin = 1e-10;

/// Every invariant breach found in ds, with coordinates. Empty means valid.
std::vector<Violation> validate(const Dataset& ds);

/// Working iterate M = [X, Z] together with its column layout.
struct ConcatMatrix {
    DenseMatrix M;
    BlockLayout layout;

    DenseMatrix slice_feature() const;
    /// s is 0-based.
    DenseMatrix slice_task(Index s) const;
    /// All task columns [Z^(1), ..., Z^(S)].
    DenseMatrix slice_targets() const;
};

BlockLayout make_layout(Index rows, Index feature_cols, const std::vector<Index>& task_widths);

ConcatMatrix concatenate(const DenseMatrix& features, const std::vector<DenseMatrix>& tasks);

}  // namespace tmcc
