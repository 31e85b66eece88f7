#include "tmcc/data_model.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tmcc {

MaskedMatrix MaskedMatrix::fully_observed(const DenseMatrix& v) {
    return {v, DenseMatrix::Ones(v.rows(), v.cols())};
}

MaskedMatrix MaskedMatrix::from_nan(const DenseMatrix& v) {
    MaskedMatrix out{DenseMatrix::Zero(v.rows(), v.cols()), DenseMatrix::Zero(v.rows(), v.cols())};
    for (Index j = 0; j < v.cols(); ++j) {
        for (Index i = 0; i < v.rows(); ++i) {
            if (!std::isnan(v(i, j))) {
                out.values(i, j) = v(i, j);
                out.mask(i, j) = 1.0;
            }
        }
    }
    return out;
}

DenseMatrix MaskedMatrix::to_nan() const {
    DenseMatrix out = values;
    for (Index j = 0; j < out.cols(); ++j) {
        for (Index i = 0; i < out.rows(); ++i) {
            if (mask(i, j) == 0.0) out(i, j) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

Index MaskedMatrix::observed_count() const {
    return static_cast<Index>((mask.array() != 0.0).count());
}

DenseMatrix apply_mask(const DenseMatrix& mask, const DenseMatrix& S) {
    return mask.cwiseProduct(S);
}

Index BlockLayout::total_cols() const {
    Index total = feature_cols;
    for (Index w : task_widths) total += w;
    return total;
}

BlockLayout make_layout(Index rows, Index feature_cols, const std::vector<Index>& task_widths) {
    BlockLayout layout;
    layout.rows = rows;
    layout.feature_cols = feature_cols;
    layout.task_widths = task_widths;
    Index offset = feature_cols;
    for (Index w : task_widths) {
        layout.task_offsets.push_back(offset);
        offset += w;
    }
    return layout;
}

Index Dataset::total_cols() const {
    Index total = d();
    for (const auto& t : tasks) total += t.data.cols();
    return total;
}

BlockLayout Dataset::layout() const {
    std::vector<Index> widths;
    widths.reserve(tasks.size());
    for (const auto& t : tasks) widths.push_back(t.data.cols());
    return make_layout(n(), d(), widths);
}

Dataset Dataset::without_calibration() const {
    Dataset out = *this;
    out.calibration.reset();
    return out;
}

Dataset Dataset::tasks_only() const {
    Dataset out;
    out.features = MaskedMatrix(DenseMatrix::Zero(n(), 0), DenseMatrix::Zero(n(), 0));
    out.tasks = tasks;
    return out;
}

namespace {

struct Fnv {
    std::uint64_t h = 1469598103934665603ULL;
    void bytes(const void* p, std::size_t len) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    }
    void index(Index v) {
        const auto x = static_cast<std::int64_t>(v);
        bytes(&x, sizeof x);
    }
    void real(double v) { bytes(&v, sizeof v); }
    void matrix(const DenseMatrix& m) {
        index(m.rows());
        index(m.cols());
        bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
};

}  // namespace

std::uint64_t dataset_hash(const Dataset& ds) {
    Fnv f;
    f.matrix(ds.features.values);
    f.matrix(ds.features.mask);
    f.index(static_cast<Index>(ds.tasks.size()));
    for (const auto& t : ds.tasks) {
        f.index(static_cast<Index>(t.family.kind));
        f.real(t.family.sigma2);
        f.matrix(t.data.values);
        f.matrix(t.data.mask);
    }
    f.index(ds.calibration ? 1 : 0);
    if (ds.calibration) {
        f.matrix(ds.calibration->A);
        f.matrix(ds.calibration->B);
    }
    return f.h;
}

std::string Violation::to_string() const {
    std::ostringstream os;
    if (block < 0) {
        os << "features";
    } else {
        os << "task " << block;
    }
    if (row >= 0) os << " (" << row << ", " << col << ")";
    os << ": " << what;
    return os.str();
}

namespace {

void check_masked(const MaskedMatrix& m, int block, const expfam::Family* fam, std::vector<Violation>& out) {
    if (m.values.rows() != m.mask.rows() || m.values.cols() != m.mask.cols()) {
        out.push_back({"values and mask shapes differ", block});
        return;
    }
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            const double r = m.mask(i, j);
            const double v = m.values(i, j);
            if (r != 0.0 && r != 1.0) {
                out.push_back({"mask entry is not 0 or 1", block, i, j});
            } else if (r == 1.0) {
                if (!std::isfinite(v)) {
                    out.push_back({"observed value is not finite", block, i, j});
                } else if (fam != nullptr && !expfam::in_support(*fam, v)) {
                    std::ostringstream os;
                    os << "observed value " << v << " outside " << expfam::to_string(*fam) << " support";
                    out.push_back({os.str(), block, i, j});
                }
            } else if (v != 0.0) {
                out.push_back({"unobserved entry is not stored as 0", block, i, j});
            }
        }
    }
}

}  // namespace

std::vector<Violation> validate(const Dataset& ds) {
    std::vector<Violation> out;
    check_masked(ds.features, -1, nullptr, out);
    for (std::size_t s = 0; s < ds.tasks.size(); ++s) {
        const auto& t = ds.tasks[s];
        const int block = static_cast<int>(s);
        if (t.data.rows() != ds.n()) {
            std::ostringstream os;
            os << "row count " << t.data.rows() << " differs from feature rows " << ds.n();
            out.push_back({os.str(), block});
        }
        if (t.family.kind == expfam::Kind::Gaussian && !(t.family.sigma2 > 0.0)) {
            out.push_back({"gaussian sigma2 must be positive", block});
        }
        check_masked(t.data, block, &t.family, out);
    }
    if (ds.calibration) {
        const auto& c = *ds.calibration;
        bool shapes_ok = true;
        if (c.A.cols() != ds.n()) {
            std::ostringstream os;
            os << "calibration A has " << c.A.cols() << " columns, expected " << ds.n();
            out.push_back({os.str()});
            shapes_ok = false;
        }
        if (c.B.rows() != c.A.rows() || c.B.cols() != ds.d()) {
            std::ostringstream os;
            os << "calibration B is " << c.B.rows() << "x" << c.B.cols() << ", expected " << c.A.rows()
               << "x" << ds.d();
            out.push_back({os.str()});
            shapes_ok = false;
        }
        if (!c.A.allFinite() || !c.B.allFinite()) {
            out.push_back({"calibration contains non-finite entries"});
            shapes_ok = false;
        }
        if (shapes_ok && c.A.size() > 0) {
            const double smin = linalg::sigma_min(c.A);
            if (!(smin > kCalibrationSigmaMin)) {
                std::ostringstream os;
                os << "sigma_min(A) below threshold (" << smin << " <= " << kCalibrationSigmaMin << ")";
                out.push_back({os.str()});
            }
        } else if (shapes_ok) {
            out.push_back({"calibration A is empty"});
        }
    }
    return out;
}

DenseMatrix ConcatMatrix::slice_feature() const {
    return M.leftCols(layout.feature_cols);
}

DenseMatrix ConcatMatrix::slice_task(Index s) const {
    if (s < 0 || s >= layout.task_count()) {
        throw std::out_of_range("slice_task: task index " + std::to_string(s) + " out of range");
    }
    return M.middleCols(layout.task_offsets[static_cast<std::size_t>(s)],
                        layout.task_widths[static_cast<std::size_t>(s)]);
}

DenseMatrix ConcatMatrix::slice_targets() const {
    return M.rightCols(M.cols() - layout.feature_cols);
}

ConcatMatrix concatenate(const DenseMatrix& features, const std::vector<DenseMatrix>& tasks) {
    std::vector<Index> widths;
    Index total = features.cols();
    for (const auto& t : tasks) {
        if (t.rows() != features.rows()) throw std::invalid_argument("concatenate: row count mismatch");
        widths.push_back(t.cols());
        total += t.cols();
    }
    ConcatMatrix out;
    out.layout = make_layout(features.rows(), features.cols(), widths);
    out.M.resize(features.rows(), total);
    out.M.leftCols(features.cols()) = features;
    for (std::size_t s = 0; s < tasks.size(); ++s) {
        out.M.middleCols(out.layout.task_offsets[s], widths[s]) = tasks[s];
    }
    return out;
}

}  // namespace tmcc
