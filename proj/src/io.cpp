#include "tmcc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace tmcc::io {

namespace {

std::string where(const std::string& path, int line) {
    std::ostringstream os;
    os << path;
    if (line > 0) os << ":" << line;
    return os.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join_index(const std::vector<Index>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

// Line-oriented reader that keeps track of the 1-based line number.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
        if (!in_) throw std::runtime_error("cannot open " + path_ + " for reading");
    }

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_, line_, msg); }
    int line() const { return line_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    int line_ = 0;
};

struct Header {
    std::string kind;
    std::map<std::string, std::string> fields;
};

Header parse_header(LineReader& rd, const std::string& line) {
    const std::string body = trim(line);
    if (body.empty() || body[0] != '#') rd.fail("expected a '#' header line");
    std::istringstream ss(body.substr(1));
    Header h;
    if (!(ss >> h.kind)) rd.fail("header has no kind");
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) rd.fail("malformed header token '" + tok + "'");
        h.fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return h;
}

Index header_index(LineReader& rd, const Header& h, const std::string& key) {
    auto it = h.fields.find(key);
    if (it == h.fields.end()) rd.fail("header lacks '" + key + "'");
    Index v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0) rd.fail("bad value for '" + key + "': " + s);
    return v;
}

std::vector<Index> header_blocks(LineReader& rd, const Header& h, Index cols) {
    auto it = h.fields.find("blocks");
    if (it == h.fields.end()) return {};
    std::vector<Index> out;
    for (const auto& part : split(it->second, ',')) {
        Index v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || p != part.data() + part.size() || v < 0) rd.fail("bad block width '" + part + "'");
        out.push_back(v);
    }
    if (std::accumulate(out.begin(), out.end(), Index{0}) != cols) rd.fail("block widths do not sum to cols");
    return out;
}

DenseMatrix read_body(LineReader& rd, Index rows, Index cols) {
    DenseMatrix out(rows, cols);
    std::string line;
    for (Index i = 0; i < rows; ++i) {
        if (!rd.next(line)) rd.fail("expected " + std::to_string(rows) + " data rows, file ended after " + std::to_string(i));
        if (trim(line)[0] == '#') rd.fail("expected " + std::to_string(rows) + " data rows, found " + std::to_string(i));
        const auto cells = split(line, ',');
        if (static_cast<Index>(cells.size()) != cols) {
            rd.fail("expected " + std::to_string(cols) + " values, found " + std::to_string(cells.size()));
        }
        for (Index j = 0; j < cols; ++j) {
            try {
                out(i, j) = parse_double(trim(cells[static_cast<std::size_t>(j)]));
            } catch (const std::invalid_argument&) {
                rd.fail("column " + std::to_string(j + 1) + ": not a number '" + trim(cells[static_cast<std::size_t>(j)]) + "'");
            }
        }
    }
    return out;
}

void write_body(std::ostream& out, const DenseMatrix& values) {
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            if (j) out << ',';
            out << format_double(values(i, j));
        }
        out << '\n';
    }
}

// Parses a whole CSV file with a header row into field maps.
std::vector<std::map<std::string, std::string>> read_table(const std::filesystem::path& path,
                                                           const std::vector<std::string>& required) {
    LineReader rd(path);
    std::string line;
    if (!rd.next(line)) rd.fail("empty file");
    const auto cols = split_csv_line(line);
    for (const auto& r : required) {
        if (std::find(cols.begin(), cols.end(), r) == cols.end()) rd.fail("missing column '" + r + "'");
    }
    std::vector<std::map<std::string, std::string>> rows;
    while (rd.next(line)) {
        const auto cells = split_csv_line(line);
        if (cells.size() != cols.size()) {
            rd.fail("expected " + std::to_string(cols.size()) + " fields, found " + std::to_string(cells.size()));
        }
        std::map<std::string, std::string> row;
        for (std::size_t j = 0; j < cols.size(); ++j) row[cols[j]] = cells[j];
        row["#line"] = std::to_string(rd.line());
        rows.push_back(std::move(row));
    }
    return rows;
}

template <class F>
auto field(const std::filesystem::path& path, const std::map<std::string, std::string>& row, const std::string& key,
           F conv) {
    try {
        return conv(row.at(key));
    } catch (const std::exception&) {
        throw ParseError(path.string(), std::stoi(row.at("#line")), "bad value in column '" + key + "'");
    }
}

double to_d(const std::string& s) { return parse_double(s); }

long long to_ll(const std::string& s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("integer");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("unsigned");
    return v;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t from_hex64(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("hex");
    return v;
}

}  // namespace

ParseError::ParseError(const std::string& path, int line, const std::string& msg)
    : std::runtime_error(where(path, line) + ": " + msg), path_(path), line_(line) {}

std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text) {
    if (text == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (text.empty() || ec != std::errc() || p != e || std::isnan(v)) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return v;
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& values, const std::vector<Index>& blocks) {
    auto out = open_out(path);
    out << "# matrix rows=" << values.rows() << " cols=" << values.cols();
    if (!blocks.empty()) out << " blocks=" << join_index(blocks);
    out << '\n';
    write_body(out, values);
    close_out(out, path);
}

void write_masked(const std::filesystem::path& path, const MaskedMatrix& m, const std::vector<Index>& blocks) {
    write_matrix(path, m.to_nan(), blocks);
}

MatrixFile read_matrix(const std::filesystem::path& path) {
    LineReader rd(path);
    std::string line;
    if (!rd.next(line)) rd.fail("empty file");
    const Header h = parse_header(rd, line);
    if (h.kind != "matrix") rd.fail("expected a '# matrix' header, found '" + h.kind + "'");
    const Index rows = header_index(rd, h, "rows");
    const Index cols = header_index(rd, h, "cols");
    MatrixFile out;
    out.blocks = header_blocks(rd, h, cols);
    out.values = read_body(rd, rows, cols);
    if (rd.next(line)) rd.fail("unexpected content after " + std::to_string(rows) + " data rows");
    return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    const BlockLayout lay = ds.layout();
    std::vector<Index> blocks{lay.feature_cols};
    std::vector<DenseMatrix> parts;
    std::string families;
    for (const auto& t : ds.tasks) {
        blocks.push_back(t.data.cols());
        parts.push_back(t.data.to_nan());
        if (!families.empty()) families += ",";
        families += expfam::to_string(t.family);
    }
    const ConcatMatrix all = concatenate(ds.features.to_nan(), parts);

    auto out = open_out(path);
    out << "# dataset rows=" << all.M.rows() << " cols=" << all.M.cols() << " blocks=" << join_index(blocks);
    if (!families.empty()) out << " families=" << families;
    out << '\n';
    write_body(out, all.M);
    if (ds.calibration) {
        const auto& c = *ds.calibration;
        out << "# calibration_A rows=" << c.A.rows() << " cols=" << c.A.cols() << '\n';
        write_body(out, c.A);
        out << "# calibration_B rows=" << c.B.rows() << " cols=" << c.B.cols() << '\n';
        write_body(out, c.B);
    }
    close_out(out, path);
}

Dataset read_dataset(const std::filesystem::path& path) {
    LineReader rd(path);
    std::string line;
    if (!rd.next(line)) rd.fail("empty file");
    const Header h = parse_header(rd, line);
    if (h.kind != "dataset") rd.fail("expected a '# dataset' header, found '" + h.kind + "'");
    const Index rows = header_index(rd, h, "rows");
    const Index cols = header_index(rd, h, "cols");
    const auto blocks = header_blocks(rd, h, cols);
    if (blocks.empty()) rd.fail("dataset header lacks 'blocks'");

    std::vector<expfam::Family> fams;
    if (auto it = h.fields.find("families"); it != h.fields.end()) {
        for (const auto& f : split(it->second, ',')) {
            try {
                fams.push_back(expfam::parse_family(f));
            } catch (const std::exception& e) {
                rd.fail(e.what());
            }
        }
    }
    if (fams.size() + 1 != blocks.size()) rd.fail("need one family per task block");

    const DenseMatrix all = read_body(rd, rows, cols);
    Dataset ds;
    Index off = 0;
    ds.features = MaskedMatrix::from_nan(all.middleCols(off, blocks[0]));
    off += blocks[0];
    for (std::size_t s = 0; s < fams.size(); ++s) {
        ds.tasks.push_back({MaskedMatrix::from_nan(all.middleCols(off, blocks[s + 1])), fams[s]});
        off += blocks[s + 1];
    }

    if (rd.next(line)) {
        const Header ha = parse_header(rd, line);
        if (ha.kind != "calibration_A") rd.fail("expected '# calibration_A', found '" + ha.kind + "'");
        CalibrationConstraint c;
        c.A = read_body(rd, header_index(rd, ha, "rows"), header_index(rd, ha, "cols"));
        if (!rd.next(line)) rd.fail("calibration_A without calibration_B");
        const Header hb = parse_header(rd, line);
        if (hb.kind != "calibration_B") rd.fail("expected '# calibration_B', found '" + hb.kind + "'");
        c.B = read_body(rd, header_index(rd, hb, "rows"), header_index(rd, hb, "cols"));
        if (!c.A.allFinite() || !c.B.allFinite()) rd.fail("calibration entries must be finite");
        ds.calibration = std::move(c);
        if (rd.next(line)) rd.fail("unexpected content after calibration_B");
    }
    return ds;
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

void write_records(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
    auto out = open_out(path);
    out << "method,scenario,trial,seed,tau1,tau2,re_x,re_z,iterations,converged,failed,status,data_hash\n";
    for (const auto& r : records) {
        out << to_string(r.method) << ',' << csv_field(r.scenario) << ',' << r.trial << ',' << r.seed << ','
            << format_double(r.hp.tau1) << ',' << format_double(r.hp.tau2) << ',' << format_double(r.re_x) << ','
            << format_double(r.re_z) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
            << (r.failed ? 1 : 0) << ',' << csv_field(r.status) << ',' << hex64(r.data_hash) << '\n';
    }
    close_out(out, path);
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
    const auto rows = read_table(path, {"method", "scenario", "trial", "seed", "tau1", "tau2", "re_x", "re_z",
                                        "iterations", "converged", "failed", "status", "data_hash"});
    std::vector<TrialRecord> out;
    for (const auto& row : rows) {
        TrialRecord r;
        r.method = field(path, row, "method", parse_method);
        r.scenario = row.at("scenario");
        r.trial = static_cast<int>(field(path, row, "trial", to_ll));
        r.seed = field(path, row, "seed", to_u64);
        r.hp.tau1 = field(path, row, "tau1", to_d);
        r.hp.tau2 = field(path, row, "tau2", to_d);
        r.re_x = field(path, row, "re_x", to_d);
        r.re_z = field(path, row, "re_z", to_d);
        r.iterations = static_cast<int>(field(path, row, "iterations", to_ll));
        r.converged = field(path, row, "converged", to_ll) != 0;
        r.failed = field(path, row, "failed", to_ll) != 0;
        r.status = row.at("status");
        r.data_hash = field(path, row, "data_hash", from_hex64);
        out.push_back(std::move(r));
    }
    return out;
}

void write_timings(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
    auto out = open_out(path);
    out << "method,scenario,trial,wall_time,stage1_time,stage2_time\n";
    for (const auto& r : records) {
        out << to_string(r.method) << ',' << csv_field(r.scenario) << ',' << r.trial << ',' << format_double(r.wall_time)
            << ',';
        if (r.stage_times) out << format_double(r.stage_times->first) << ',' << format_double(r.stage_times->second);
        else out << ',';
        out << '\n';
    }
    close_out(out, path);
}

void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
    auto out = open_out(path);
    out << "method,scenario,trials,failed,re_x_mean,re_x_se,re_z_mean,re_z_se,time_mean,time_se,"
           "stage1_time_mean,stage1_time_se,stage2_time_mean,stage2_time_se,time_display\n";
    for (const auto& r : rows) {
        out << to_string(r.method) << ',' << csv_field(r.scenario) << ',' << r.trials << ',' << r.failed << ','
            << format_double(r.re_x.mean) << ',' << format_double(r.re_x.se) << ',' << format_double(r.re_z.mean)
            << ',' << format_double(r.re_z.se) << ',' << format_double(r.time.mean) << ','
            << format_double(r.time.se) << ',';
        char disp[96];
        if (r.stage_time) {
            out << format_double(r.stage_time->first.mean) << ',' << format_double(r.stage_time->first.se) << ','
                << format_double(r.stage_time->second.mean) << ',' << format_double(r.stage_time->second.se) << ',';
            std::snprintf(disp, sizeof disp, "(%.2f+%.2f)", r.stage_time->first.mean, r.stage_time->second.mean);
        } else {
            out << ",,,,";
            std::snprintf(disp, sizeof disp, "%.2f", r.time.mean);
        }
        out << csv_field(disp) << '\n';
    }
    close_out(out, path);
}

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
    const auto rows = read_table(path, {"method", "scenario", "trials", "failed", "re_x_mean", "re_x_se", "re_z_mean",
                                        "re_z_se", "time_mean", "time_se", "stage1_time_mean", "stage1_time_se",
                                        "stage2_time_mean", "stage2_time_se"});
    std::vector<SummaryRow> out;
    for (const auto& row : rows) {
        SummaryRow r;
        r.method = field(path, row, "method", parse_method);
        r.scenario = row.at("scenario");
        r.trials = static_cast<int>(field(path, row, "trials", to_ll));
        r.failed = static_cast<int>(field(path, row, "failed", to_ll));
        r.re_x = {field(path, row, "re_x_mean", to_d), field(path, row, "re_x_se", to_d)};
        r.re_z = {field(path, row, "re_z_mean", to_d), field(path, row, "re_z_se", to_d)};
        r.time = {field(path, row, "time_mean", to_d), field(path, row, "time_se", to_d)};
        if (!row.at("stage1_time_mean").empty()) {
            r.stage_time = std::make_pair(
                Stat{field(path, row, "stage1_time_mean", to_d), field(path, row, "stage1_time_se", to_d)},
                Stat{field(path, row, "stage2_time_mean", to_d), field(path, row, "stage2_time_se", to_d)});
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<double>& objective,
                 const std::vector<double>& momentum) {
    auto out = open_out(path);
    out << "iteration,objective,momentum\n";
    for (std::size_t k = 0; k < objective.size(); ++k) {
        out << k << ',' << format_double(objective[k]) << ',';
        if (k >= 1 && k - 1 < momentum.size()) out << format_double(momentum[k - 1]);
        out << '\n';
    }
    close_out(out, path);
}

}  // namespace tmcc::io
