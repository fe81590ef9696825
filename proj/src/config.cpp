#include "traitlab/config.hpp"

#include <cmath>
#include <fstream>

#include "traitlab/errors.hpp"

namespace traitlab {

using nlohmann::json;

namespace {

const json& need(const json& j, const char* key, const char* section) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError(std::string("config: missing field '") + key + "' in section '" +
                          section + "'");
    }
    return *it;
}

double need_num(const json& j, const char* key, const char* section) {
    const json& v = need(j, key, section);
    if (!v.is_number()) {
        throw ConfigError(std::string("config: field '") + key + "' in '" + section +
                          "' must be a number");
    }
    return v.get<double>();
}

RateFunction parse_rate(const json& j, const char* which) {
    if (!j.is_object()) throw ConfigError(std::string("config: rates.") + which +
                                          " must be an object with a 'type'");
    std::string type = need(j, "type", which).get<std::string>();
    if (type == "constant") return RateFunction::constant(need_num(j, "value", which));
    if (type == "affine") {
        return RateFunction::affine(need_num(j, "intercept", which),
                                    need_num(j, "slope", which));
    }
    if (type == "gaussian_bump") {
        return RateFunction::gaussian_bump(need_num(j, "base", which),
                                           need_num(j, "height", which),
                                           need_num(j, "center", which),
                                           need_num(j, "width", which));
    }
    if (type == "table") {
        return RateFunction::table(need(j, "x", which).get<std::vector<double>>(),
                                   need(j, "v", which).get<std::vector<double>>());
    }
    throw ConfigError("config: unknown rate function type '" + type + "'");
}

KernelSpec parse_kernel(const json& j) {
    std::string type = need(j, "type", "kernel").get<std::string>();
    if (type == "gaussian") return KernelSpec::gaussian(need_num(j, "sigma", "kernel"));
    if (type == "expsq") {
        return KernelSpec::expsq(need_num(j, "scale", "kernel"),
                                 need_num(j, "power", "kernel"));
    }
    throw ConfigError("config: unknown kernel type '" + type +
                      "' (built-ins: gaussian, expsq; kernels without a declared "
                      "super-exponential tail bound are not supported)");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config: invalid JSON");
    return from_json(std::move(doc));
}

ExperimentConfig ExperimentConfig::from_json(json doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const char* sec : {"grid", "rates", "kernel", "initial", "run"}) {
        if (!doc.contains(sec)) {
            throw ConfigError(std::string("config: missing section '") + sec + "'");
        }
    }
    // normalize defaults so hashing is stable
    json& grid = doc["grid"];
    if (!grid.contains("delta")) grid["delta"] = 0.0;
    json& kernel = doc["kernel"];
    if (!kernel.contains("tail_tol")) kernel["tail_tol"] = 1e-10;
    json& initial = doc["initial"];
    if (!initial.contains("mode")) initial["mode"] = "poisson";
    json& run = doc["run"];
    if (!run.contains("base_seed")) run["base_seed"] = 1;
    if (!run.contains("replicates")) run["replicates"] = 1;
    if (!run.contains("boundary")) run["boundary"] = "absorb";
    if (!run.contains("max_population")) run["max_population"] = 100000000;
    if (!run.contains("workers")) run["workers"] = 0;
    if (!run.contains("regime")) run["regime"] = "auto";
    if (!run.contains("a")) run["a"] = 0.5;
    if (!run.contains("moments")) run["moments"] = false;
    if (!doc.contains("outputs")) doc["outputs"] = json::object();
    if (!doc["outputs"].contains("dir")) doc["outputs"]["dir"] = "out";

    ExperimentConfig c;
    c.doc_ = std::move(doc);
    // eager validation of the core sections
    c.grid();
    c.model();
    c.initial_mode();
    c.observation_times();
    return c;
}

std::string ExperimentConfig::canonical() const { return doc_.dump(); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

double ExperimentConfig::log_k() const {
    const json& g = doc_.at("grid");
    if (g.contains("log_k")) return need_num(g, "log_k", "grid");
    if (g.contains("k")) {
        double k = need_num(g, "k", "grid");
        if (!(k >= 2.0)) throw ConfigError("config: grid.k must be >= 2");
        return std::log(k);
    }
    throw ConfigError("config: grid needs either log_k or k");
}

TraitGrid ExperimentConfig::grid(double log_k_override) const {
    const json& g = doc_.at("grid");
    const json& win = need(g, "window", "grid");
    if (!win.is_array() || win.size() != 2) {
        throw ConfigError("config: grid.window must be [x_min, x_max]");
    }
    double lk = log_k_override > 0.0 ? log_k_override : log_k();
    return build_grid(lk, g.at("delta").get<double>(), win[0].get<double>(),
                      win[1].get<double>());
}

Model ExperimentConfig::model(double log_k_override) const {
    const json& r = doc_.at("rates");
    TraitGrid g = grid(log_k_override);
    return make_model(g, parse_rate(need(r, "birth", "rates"), "birth"),
                      parse_rate(need(r, "death", "rates"), "death"),
                      need_num(r, "p", "rates"), need_num(r, "bbar", "rates"),
                      need_num(r, "dbar", "rates"), parse_kernel(doc_.at("kernel")),
                      doc_.at("kernel").at("tail_tol").get<double>());
}

bool ExperimentConfig::has_u0() const { return doc_.at("initial").contains("u0"); }

std::function<double(double)> ExperimentConfig::u0() const {
    const json& init = doc_.at("initial");
    if (!init.contains("u0")) {
        throw ConfigError("config: initial.u0 is required for exponent-scale operations");
    }
    const json& j = init.at("u0");
    std::string type = need(j, "type", "initial.u0").get<std::string>();
    if (type == "constant") {
        double v = need_num(j, "value", "initial.u0");
        return [v](double) { return v; };
    }
    if (type == "abs_slope") {
        double level = need_num(j, "level", "initial.u0");
        double slope = need_num(j, "slope", "initial.u0");
        return [level, slope](double x) { return level + slope * std::abs(x); };
    }
    if (type == "poly2") {
        double c0 = need_num(j, "c0", "initial.u0");
        double c1 = j.value("c1", 0.0);
        double c2 = j.value("c2", 0.0);
        return [c0, c1, c2](double x) { return c0 + c1 * x + c2 * x * x; };
    }
    if (type == "table") {
        auto xs = need(j, "x", "initial.u0").get<std::vector<double>>();
        auto vs = need(j, "v", "initial.u0").get<std::vector<double>>();
        RateFunction t = RateFunction::table(std::move(xs), std::move(vs));
        return [t](double x) { return t.eval(x, 1e300); };
    }
    throw ConfigError("config: unknown initial.u0 type '" + type + "'");
}

std::vector<double> ExperimentConfig::u0_samples(const TraitGrid& g) const {
    auto f = u0();
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.x_at(i));
    return v;
}

std::vector<double> ExperimentConfig::initial_mean(const TraitGrid& g) const {
    const json& init = doc_.at("initial");
    if (init.contains("mean")) {
        const json& j = init.at("mean");
        std::string type = need(j, "type", "initial.mean").get<std::string>();
        std::vector<double> v(g.size());
        if (type == "constant") {
            double m = need_num(j, "value", "initial.mean");
            std::fill(v.begin(), v.end(), m);
            return v;
        }
        if (type == "table") {
            RateFunction t = RateFunction::table(need(j, "x", "initial.mean").get<std::vector<double>>(),
                                                 need(j, "v", "initial.mean").get<std::vector<double>>());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.eval(g.x_at(i), 1e300);
            return v;
        }
        throw ConfigError("config: unknown initial.mean type '" + type + "'");
    }
    auto f = u0();
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(g.log_k * f(g.x_at(i)));
    return v;
}

InitialMode ExperimentConfig::initial_mode() const {
    std::string m = doc_.at("initial").at("mode").get<std::string>();
    if (m == "poisson") return InitialMode::poisson;
    if (m == "deterministic") return InitialMode::deterministic;
    throw ConfigError("config: initial.mode must be poisson or deterministic");
}

std::vector<double> ExperimentConfig::observation_times() const {
    const json& run = doc_.at("run");
    if (run.contains("observation_times")) {
        auto v = run.at("observation_times").get<std::vector<double>>();
        if (v.empty()) throw ConfigError("config: run.observation_times must be non-empty");
        return v;
    }
    double te = t_end();
    std::vector<double> v;
    for (int k = 1; k <= 5; ++k) v.push_back(te * k / 5.0);
    return v;
}

double ExperimentConfig::t_end() const {
    const json& run = doc_.at("run");
    if (run.contains("t_end")) return need_num(run, "t_end", "run");
    if (run.contains("observation_times")) return observation_times().back();
    throw ConfigError("config: run needs t_end or observation_times");
}

std::uint64_t ExperimentConfig::replicates() const {
    return doc_.at("run").at("replicates").get<std::uint64_t>();
}

std::uint64_t ExperimentConfig::base_seed() const {
    return doc_.at("run").at("base_seed").get<std::uint64_t>();
}

BoundaryPolicy ExperimentConfig::boundary() const {
    std::string b = doc_.at("run").at("boundary").get<std::string>();
    if (b == "absorb") return BoundaryPolicy::absorb;
    if (b == "strict") return BoundaryPolicy::strict;
    throw ConfigError("config: run.boundary must be absorb or strict");
}

std::int64_t ExperimentConfig::max_population() const {
    return doc_.at("run").at("max_population").get<std::int64_t>();
}

unsigned ExperimentConfig::workers() const {
    return doc_.at("run").at("workers").get<unsigned>();
}

std::string ExperimentConfig::declared_regime() const {
    std::string r = doc_.at("run").at("regime").get<std::string>();
    if (r != "auto" && r != "subcritical" && r != "supercritical") {
        throw ConfigError("config: run.regime must be auto, subcritical or supercritical");
    }
    return r;
}

double ExperimentConfig::a_exponent() const { return doc_.at("run").at("a").get<double>(); }

bool ExperimentConfig::with_moments() const {
    return doc_.at("run").at("moments").get<bool>();
}

std::string ExperimentConfig::output_dir() const {
    return doc_.at("outputs").at("dir").get<std::string>();
}

}  // namespace traitlab
