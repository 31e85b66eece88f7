#include "tmcc/config.hpp"

#include "tmcc/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tmcc {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"scenario", {"n", "d", "m", "tasks", "rank", "transform", "missing_rate", "noise_sd", "seed"}},
        {"run", {"methods", "trials", "workers", "output_dir"}},
        {"solver", {"eta", "max_iters", "stop_kappa", "seed", "max_step_halvings", "divergence_window", "auto_step",
                    "step_scale"}},
        {"soft_impute", {"tau", "max_iters", "kappa0"}},
        {"tuning", {"tau2_mult", "tau1_mult", "tau1", "tau2"}},
    };
    return s;
}

std::string list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += io::format_double(v[i]);
    }
    return out;
}

std::string method_list(const std::vector<Method>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += to_string(v[i]);
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

class Reader {
public:
    Reader(const pt::ptree& tree, std::string origin) : tree_(tree), origin_(std::move(origin)) {}

    template <class T, class F>
    void get(const std::string& key, T& target, F conv) const {
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return;
        try {
            target = conv(*v);
        } catch (const std::exception& e) {
            throw ConfigError(origin_ + ": " + key + " = '" + *v + "': " + e.what());
        }
    }

    bool has(const std::string& key) const {
        return static_cast<bool>(tree_.get_optional<std::string>(pt::ptree::path_type(key, '.')));
    }

private:
    const pt::ptree& tree_;
    std::string origin_;
};

template <class T>
T integer(const std::string& s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected an integer");
    return v;
}

double real(const std::string& s) { return io::parse_double(s); }

bool boolean(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

std::vector<double> reals(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(io::parse_double(item));
    return out;
}

std::vector<Method> methods(const std::string& s) {
    std::vector<Method> out;
    for (const auto& item : split_list(s)) out.push_back(parse_method(item));
    if (out.empty()) throw std::invalid_argument("empty method list");
    return out;
}

}  // namespace

ExperimentConfig RunConfig::experiment() const {
    ExperimentConfig ec;
    ec.solver = solver;
    ec.auto_step = auto_step;
    ec.step_scale = step_scale;
    ec.workers = workers;
    return ec;
}

void check(const RunConfig& cfg) {
    check(cfg.scenario);
    check(cfg.solver);
    if (cfg.methods.empty()) throw ConfigError("run.methods must name at least one method");
    if (cfg.trials < 1) throw ConfigError("run.trials must be >= 1");
    if (cfg.workers < 1) throw ConfigError("run.workers must be >= 1");
    if (!(cfg.step_scale > 0.0)) throw ConfigError("solver.step_scale must be > 0");
    if (cfg.fixed) {
        check(*cfg.fixed);
    } else if (cfg.grid.tau2_mult.empty() || cfg.grid.tau1_mult.empty()) {
        throw ConfigError("tuning grid lists must be nonempty");
    }
}

std::string serialize(const RunConfig& cfg) {
    pt::ptree t;
    const auto& s = cfg.scenario;
    t.put("scenario.n", s.n);
    t.put("scenario.d", s.d);
    t.put("scenario.m", s.m);
    t.put("scenario.tasks", s.tasks);
    t.put("scenario.rank", s.rank);
    t.put("scenario.transform", to_string(s.transform));
    t.put("scenario.missing_rate", io::format_double(s.missing_rate));
    t.put("scenario.noise_sd", io::format_double(s.noise_sd));
    t.put("scenario.seed", s.seed);

    t.put("run.methods", method_list(cfg.methods));
    t.put("run.trials", cfg.trials);
    t.put("run.workers", cfg.workers);
    t.put("run.output_dir", cfg.output_dir);

    const auto& v = cfg.solver;
    t.put("solver.eta", io::format_double(v.eta));
    t.put("solver.max_iters", v.max_iters);
    t.put("solver.stop_kappa", io::format_double(v.stop_kappa));
    t.put("solver.seed", v.seed);
    t.put("solver.max_step_halvings", v.max_step_halvings);
    t.put("solver.divergence_window", v.divergence_window);
    t.put("solver.auto_step", cfg.auto_step ? "true" : "false");
    t.put("solver.step_scale", io::format_double(cfg.step_scale));

    t.put("soft_impute.tau", io::format_double(v.soft_impute.tau));
    t.put("soft_impute.max_iters", v.soft_impute.max_iters);
    t.put("soft_impute.kappa0", io::format_double(v.soft_impute.kappa0));

    t.put("tuning.tau2_mult", list(cfg.grid.tau2_mult));
    t.put("tuning.tau1_mult", list(cfg.grid.tau1_mult));
    if (cfg.fixed) {
        t.put("tuning.tau1", io::format_double(cfg.fixed->tau1));
        t.put("tuning.tau2", io::format_double(cfg.fixed->tau2));
    }

    std::ostringstream os;
    pt::write_ini(os, t);
    return os.str();
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    pt::ptree t;
    try {
        std::istringstream is(text);
        pt::read_ini(is, t);
    } catch (const pt::ini_parser_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.line() << ": " << e.message();
        throw ConfigError(os.str());
    }

    for (const auto& [section, body] : t) {
        auto sec = schema().find(section);
        if (sec == schema().end()) {
            throw ConfigError(origin + ": unknown section [" + section + "]");
        }
        if (body.empty() && !body.data().empty()) {
            throw ConfigError(origin + ": key '" + section + "' outside any section");
        }
        for (const auto& [key, value] : body) {
            if (!sec->second.count(key)) throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
        }
    }

    RunConfig cfg;
    Reader r(t, origin);
    auto& s = cfg.scenario;
    r.get("scenario.n", s.n, integer<Index>);
    r.get("scenario.d", s.d, integer<Index>);
    r.get("scenario.m", s.m, integer<Index>);
    r.get("scenario.tasks", s.tasks, integer<Index>);
    r.get("scenario.rank", s.rank, integer<Index>);
    r.get("scenario.transform", s.transform, parse_transform);
    r.get("scenario.missing_rate", s.missing_rate, real);
    r.get("scenario.noise_sd", s.noise_sd, real);
    r.get("scenario.seed", s.seed, integer<std::uint64_t>);

    r.get("run.methods", cfg.methods, methods);
    r.get("run.trials", cfg.trials, integer<int>);
    r.get("run.workers", cfg.workers, integer<int>);
    r.get("run.output_dir", cfg.output_dir, [](const std::string& v) { return v; });

    auto& v = cfg.solver;
    r.get("solver.eta", v.eta, real);
    r.get("solver.max_iters", v.max_iters, integer<int>);
    r.get("solver.stop_kappa", v.stop_kappa, real);
    r.get("solver.seed", v.seed, integer<std::uint64_t>);
    r.get("solver.max_step_halvings", v.max_step_halvings, integer<int>);
    r.get("solver.divergence_window", v.divergence_window, integer<int>);
    r.get("solver.auto_step", cfg.auto_step, boolean);
    r.get("solver.step_scale", cfg.step_scale, real);

    r.get("soft_impute.tau", v.soft_impute.tau, real);
    r.get("soft_impute.max_iters", v.soft_impute.max_iters, integer<int>);
    r.get("soft_impute.kappa0", v.soft_impute.kappa0, real);

    r.get("tuning.tau2_mult", cfg.grid.tau2_mult, reals);
    r.get("tuning.tau1_mult", cfg.grid.tau1_mult, reals);
    if (r.has("tuning.tau1") || r.has("tuning.tau2")) {
        Hyperparams hp;
        r.get("tuning.tau1", hp.tau1, real);
        r.get("tuning.tau2", hp.tau2, real);
        cfg.fixed = hp;
    }

    try {
        check(cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str(), path.string());
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << serialize(cfg);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace tmcc
