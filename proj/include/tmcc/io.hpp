#pragma once

#include "tmcc/data_model.hpp"
#include "tmcc/evaluation.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmcc::io {

/// Malformed input. line is 1-based, 0 when the problem is not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, int line, const std::string& msg);
    const std::string& path() const { return path_; }
    int line() const { return line_; }

private:
    std::string path_;
    int line_;
};

/// 17 significant digits; "NaN", "inf", "-inf" for the non-finite values.
std::string format_double(double v);
/// Inverse of format_double. Throws std::invalid_argument.
double parse_double(const std::string& text);

/// Matrix file:
///
///   # matrix rows=R cols=C blocks=b1,b2,...
///   v,v,...        (R lines of C values, NaN = missing)
///
/// blocks is the column layout [X, Z^(1), ...] and is optional.
struct MatrixFile {
    DenseMatrix values;          // NaN where missing
    std::vector<Index> blocks;   // empty when the header has none
};

void write_matrix(const std::filesystem::path& path, const DenseMatrix& values,
                  const std::vector<Index>& blocks = {});
/// Masked entries become NaN.
void write_masked(const std::filesystem::path& path, const MaskedMatrix& m, const std::vector<Index>& blocks = {});
MatrixFile read_matrix(const std::filesystem::path& path);

/// Dataset bundle: one file holding [X, Y^(1), ...] with NaN for missing
/// entries, the families in the header, and A and B as trailing sections:
///
///   # dataset rows=n cols=D blocks=d,w1,... families=bernoulli,poisson,gaussian(1)
///   ...n lines...
///   # calibration_A rows=q cols=n
///   ...q lines...
///   # calibration_B rows=q cols=d
///   ...q lines...
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

/// CSV field quoting for free-text columns.
std::string csv_field(const std::string& text);
/// Splits one CSV line, honoring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

/// records.csv: deterministic columns only (no wall-clock times).
void write_records(const std::filesystem::path& path, const std::vector<TrialRecord>& records);
/// Reads what write_records wrote; traces and times are not part of the file.
std::vector<TrialRecord> read_records(const std::filesystem::path& path);

/// timings.csv: wall-clock and stage times per record.
void write_timings(const std::filesystem::path& path, const std::vector<TrialRecord>& records);

/// summary.csv: per (method, scenario) means and SEs. time_display shows
/// staged methods as "(stage1+stage2)".
void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

/// iteration,objective,momentum. Row k holds L(M^(k+1)) and the momentum
/// used to produce it (empty on row 0 or when no momentum is given).
void write_trace(const std::filesystem::path& path, const std::vector<double>& objective,
                 const std::vector<double>& momentum = {});

}  // namespace tmcc::io
