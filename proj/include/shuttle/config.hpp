#pragma once

// Run configuration: TOML loading with strict key checking, and a fully
// resolved TOML snapshot that reproduces a run exactly.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <toml.hpp>

#include "shuttle/error.hpp"
#include "shuttle/io.hpp"
#include "shuttle/optimizer.hpp"
#include "shuttle/pipeline.hpp"
#include "shuttle/valley_map.hpp"

namespace shuttle {

struct MapSource {
    /// Load the map from this file instead of generating it.
    std::optional<std::string> file;
    ValleyMapParams params;
};

struct SingleRunSettings {
    /// Explicit schedule; otherwise the constant schedule below is used.
    std::optional<Genome> genome;
    std::optional<std::string> genome_file;
    int constant = 0;
    bool trace = true;
    /// Realisation index used to derive the noise seed.
    std::uint64_t realization = 0;
};

struct DispersionSettings {
    std::vector<double> velocities{5.0, 10.0, 15.0, 20.0};
    std::size_t n_noise = 50;
    /// Constant resistor index of the baseline schedule.
    int baseline = 0;
};

struct BandSweepSettings {
    std::vector<double> velocities{5.0, 12.0, 20.0};
    std::vector<std::pair<double, double>> bands{{1e5, 1e6}, {1e6, 1e7}, {1e7, 1e8}, {1e8, 1e9}};
    std::size_t n_noise = 50;
    int baseline = 0;
};

struct OptimizeSettings {
    std::vector<std::uint64_t> map_seeds{1, 2, 3, 4, 5};
    /// Held-out noise realisations per protocol and map.
    std::size_t n_eval = 50;
    double threshold = 1e-4;
    std::vector<int> baselines{0, 1, 2, 3};
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    Scenario scenario = default_scenario();
    MapSource map;
    GAConfig ga = default_ga();
    SingleRunSettings single;
    DispersionSettings dispersion;
    BandSweepSettings band_sweep;
    OptimizeSettings optimize;

    static Scenario default_scenario() {
        Scenario sc;
        sc.noise = NoiseSpec{};
        sc.noise.scale = 0.1;
        return sc;
    }
    static GAConfig default_ga() {
        GAConfig g;
        g.n_noise = 4;
        return g;
    }

    void validate() const {
        scenario.validate();
        scenario.noise.validate(scenario.grid());
        ga.validate();
        if (threads == 0)
            throw ConfigError("threads must be >= 1");
    }
};

namespace detail {

// Wraps one TOML table and remembers which keys were read, so that unknown
// (misspelt) keys can be reported.
class Section {
public:
    Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

    bool present() const { return t_ != nullptr; }

    Section sub(const std::string& key) {
        used_.insert(key);
        if (!t_)
            return {nullptr, qualified(key)};
        auto node = t_->get(key);
        if (!node)
            return {nullptr, qualified(key)};
        if (!node->is_table())
            throw ConfigError(qualified(key) + ": expected a table");
        return {node->as_table(), qualified(key)};
    }

    void get(const std::string& key, double& out) {
        if (auto n = node(key)) {
            if (auto v = n->value<double>())
                out = *v;
            else
                throw ConfigError(qualified(key) + ": expected a number");
        }
    }
    void get(const std::string& key, bool& out) {
        if (auto n = node(key)) {
            if (auto v = n->value<bool>())
                out = *v;
            else
                throw ConfigError(qualified(key) + ": expected true or false");
        }
    }
    void get(const std::string& key, std::string& out) {
        if (auto n = node(key)) {
            if (auto v = n->value<std::string>())
                out = *v;
            else
                throw ConfigError(qualified(key) + ": expected a string");
        }
    }
    void get(const std::string& key, std::optional<std::string>& out) {
        if (node(key)) {
            std::string s;
            get(key, s);
            out = s;
        }
    }
    void get(const std::string& key, int& out) {
        if (auto n = node(key)) {
            auto v = n->value_exact<std::int64_t>();
            if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
                throw ConfigError(qualified(key) + ": expected an integer");
            out = static_cast<int>(*v);
        }
    }
    void get(const std::string& key, std::size_t& out) {
        if (auto n = node(key)) {
            auto v = n->value_exact<std::int64_t>();
            if (!v || *v < 0)
                throw ConfigError(qualified(key) + ": expected a non-negative integer");
            out = static_cast<std::size_t>(*v);
        }
    }
    void get_seed(const std::string& key, std::uint64_t& out) {
        if (auto n = node(key))
            out = to_u64(*n, qualified(key));
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (auto n = node(key)) {
            out.clear();
            for (const auto& e : array(*n, key)) {
                auto v = e.value<double>();
                if (!v)
                    throw ConfigError(qualified(key) + ": expected an array of numbers");
                out.push_back(*v);
            }
        }
    }
    void get(const std::string& key, std::vector<int>& out) {
        if (auto n = node(key)) {
            out.clear();
            for (const auto& e : array(*n, key)) {
                auto v = e.value_exact<std::int64_t>();
                if (!v)
                    throw ConfigError(qualified(key) + ": expected an array of integers");
                out.push_back(static_cast<int>(*v));
            }
        }
    }
    void get(const std::string& key, std::vector<std::uint64_t>& out) {
        if (auto n = node(key)) {
            out.clear();
            for (const auto& e : array(*n, key))
                out.push_back(to_u64(e, qualified(key)));
        }
    }
    void get(const std::string& key, std::array<double, 4>& out) {
        std::vector<double> v;
        if (node(key)) {
            get(key, v);
            if (v.size() != 4)
                throw ConfigError(qualified(key) + ": expected exactly 4 values");
            std::copy(v.begin(), v.end(), out.begin());
        }
    }
    void get(const std::string& key, std::vector<std::pair<double, double>>& out) {
        if (auto n = node(key)) {
            out.clear();
            for (const auto& e : array(*n, key)) {
                auto a = e.as_array();
                if (!a || a->size() != 2)
                    throw ConfigError(qualified(key) + ": expected an array of [f_min, f_max] pairs");
                auto lo = (*a)[0].value<double>(), hi = (*a)[1].value<double>();
                if (!lo || !hi)
                    throw ConfigError(qualified(key) + ": band edges must be numbers");
                out.emplace_back(*lo, *hi);
            }
        }
    }

    void reject_unknown() const {
        if (!t_)
            return;
        for (const auto& [k, v] : *t_) {
            std::string key(k.str());
            if (!used_.count(key))
                throw ConfigError("unknown configuration key '" + qualified(key) + "'");
        }
    }

private:
    const toml::node* node(const std::string& key) {
        used_.insert(key);
        return t_ ? t_->get(key) : nullptr;
    }
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const toml::array& array(const toml::node& n, const std::string& key) const {
        auto a = n.as_array();
        if (!a)
            throw ConfigError(qualified(key) + ": expected an array");
        return *a;
    }

    static std::uint64_t to_u64(const toml::node& n, const std::string& what) {
        if (auto v = n.value_exact<std::int64_t>()) {
            if (*v < 0)
                throw ConfigError(what + ": seeds must be non-negative");
            return static_cast<std::uint64_t>(*v);
        }
        // Seeds above 2^63 - 1 are written as strings.
        if (auto s = n.value<std::string>()) {
            try {
                std::size_t pos = 0;
                auto v = std::stoull(*s, &pos);
                if (pos == s->size())
                    return v;
            } catch (const std::exception&) {
            }
        }
        throw ConfigError(what + ": expected a non-negative integer");
    }

    const toml::table* t_;
    std::string name_;
    std::set<std::string> used_;
};

inline WaveformMode parse_mode(const std::string& s) {
    if (s == "continuous")
        return WaveformMode::continuous;
    if (s == "analytic")
        return WaveformMode::analytic;
    throw ConfigError("waveform.mode must be \"continuous\" or \"analytic\", got \"" + s + "\"");
}
inline std::string mode_name(WaveformMode m) { return m == WaveformMode::analytic ? "analytic" : "continuous"; }

inline Integrator parse_integrator(const std::string& s) {
    if (s == "exponential")
        return Integrator::exponential;
    if (s == "rk4")
        return Integrator::rk4;
    throw ConfigError("propagation.integrator must be \"exponential\" or \"rk4\", got \"" + s + "\"");
}
inline std::string integrator_name(Integrator i) { return i == Integrator::rk4 ? "rk4" : "exponential"; }

inline NoiseNormalization parse_normalization(const std::string& s) {
    if (s == "constant-density")
        return NoiseNormalization::constant_density;
    if (s == "fixed-std")
        return NoiseNormalization::fixed_std;
    throw ConfigError("noise.normalization must be \"constant-density\" or \"fixed-std\", got \"" + s + "\"");
}
inline std::string normalization_name(NoiseNormalization n) {
    return n == NoiseNormalization::fixed_std ? "fixed-std" : "constant-density";
}

inline SeedSchedule parse_seed_schedule(const std::string& s) {
    if (s == "per-generation")
        return SeedSchedule::per_generation;
    if (s == "per-run")
        return SeedSchedule::per_run;
    throw ConfigError("ga.seed_schedule must be \"per-generation\" or \"per-run\", got \"" + s + "\"");
}
inline std::string seed_schedule_name(SeedSchedule s) { return s == SeedSchedule::per_run ? "per-run" : "per-generation"; }

} // namespace detail

/// Apply the keys of a parsed TOML document on top of `cfg`.
inline void apply_toml(RunConfig& cfg, const toml::table& doc) {
    detail::Section root(&doc, "");
    root.get_seed("seed", cfg.seed);
    root.get("threads", cfg.threads);

    auto& sc = cfg.scenario;
    {
        auto s = root.sub("physics");
        s.get("g_bar", sc.physics.g_bar);
        s.get("delta_g_over_g", sc.physics.delta_g_over_g);
        s.get("B_z", sc.physics.B_z);
        s.get("T_1v_ns", sc.physics.T_1v);
        s.reject_unknown();
    }
    {
        auto s = root.sub("geometry");
        s.get("l_pitch_nm", sc.geometry.l_pitch);
        s.get("distance_nm", sc.geometry.distance);
        s.reject_unknown();
    }
    {
        auto s = root.sub("waveform");
        s.get("v_avg", sc.v_avg);
        s.get("dt_ns", sc.dt);
        s.get("amplitude_V", sc.amplitude);
        s.get("v_bias_V", sc.v_bias);
        s.get("tau_set", sc.tau_set);
        std::array<double, 4> r{};
        std::vector<double> probe;
        s.get("resistors_ohm", probe);
        if (!probe.empty()) {
            s.get("resistors_ohm", r);
            sc.resistors = r;
        }
        s.get("capacitance_F", sc.capacitance);
        std::string mode = detail::mode_name(sc.mode);
        s.get("mode", mode);
        sc.mode = detail::parse_mode(mode);
        s.reject_unknown();
    }
    {
        auto s = root.sub("noise");
        s.get("scale", sc.noise.scale);
        s.get("sigma_V", sc.noise.sigma_V);
        s.get("f_min_Hz", sc.noise.f_min);
        s.get("f_max_Hz", sc.noise.f_max);
        std::string norm = detail::normalization_name(sc.noise.normalization);
        s.get("normalization", norm);
        sc.noise.normalization = detail::parse_normalization(norm);
        s.reject_unknown();
    }
    {
        auto s = root.sub("propagation");
        std::string integ = detail::integrator_name(sc.propagation.integrator);
        s.get("integrator", integ);
        sc.propagation.integrator = detail::parse_integrator(integ);
        s.get("substeps", sc.propagation.substeps);
        s.get("max_substep_rotation", sc.propagation.max_substep_rotation);
        s.get("degeneracy_eps", sc.propagation.degeneracy_eps);
        s.reject_unknown();
    }
    {
        auto s = root.sub("map");
        s.get("file", cfg.map.file);
        auto& p = cfg.map.params;
        s.get("mu_r", p.mu_r);
        s.get("mu_i", p.mu_i);
        s.get("sigma", p.sigma);
        s.get("corr_length_nm", p.corr_length);
        s.get("dx_nm", p.dx);
        s.get("x_start_nm", p.x_start);
        s.get("extent_nm", p.extent);
        s.get_seed("seed", p.seed);
        s.reject_unknown();
    }
    {
        auto s = root.sub("ga");
        auto& g = cfg.ga;
        s.get("generations", g.generations);
        s.get("population", g.population);
        s.get("parents", g.parents);
        s.get("mutation_prob", g.mutation_prob);
        s.get("elitism", g.elitism);
        s.get("tournament_size", g.tournament_size);
        s.get("lambda_sigma", g.lambda_sigma);
        s.get("n_noise", g.n_noise);
        std::string sched = detail::seed_schedule_name(g.seeds);
        s.get("seed_schedule", sched);
        g.seeds = detail::parse_seed_schedule(sched);
        s.get("stop_threshold", g.stop_threshold);
        s.reject_unknown();
    }
    {
        auto s = root.sub("single_run");
        auto& o = cfg.single;
        std::vector<int> genome;
        s.get("genome", genome);
        if (!genome.empty())
            o.genome = genome;
        s.get("genome_file", o.genome_file);
        s.get("constant", o.constant);
        s.get("trace", o.trace);
        s.get_seed("realization", o.realization);
        s.reject_unknown();
    }
    {
        auto s = root.sub("dispersion");
        auto& o = cfg.dispersion;
        s.get("velocities", o.velocities);
        s.get("n_noise", o.n_noise);
        s.get("baseline", o.baseline);
        s.reject_unknown();
    }
    {
        auto s = root.sub("band_sweep");
        auto& o = cfg.band_sweep;
        s.get("velocities", o.velocities);
        s.get("bands_Hz", o.bands);
        s.get("n_noise", o.n_noise);
        s.get("baseline", o.baseline);
        s.reject_unknown();
    }
    {
        auto s = root.sub("optimize");
        auto& o = cfg.optimize;
        s.get("map_seeds", o.map_seeds);
        s.get("n_eval", o.n_eval);
        s.get("threshold", o.threshold);
        s.get("baselines", o.baselines);
        s.reject_unknown();
    }
    root.reject_unknown();
}

inline RunConfig parse_config(std::string_view text, const std::string& source = "<config>") {
    RunConfig cfg;
    try {
        auto doc = toml::parse(text, source);
        apply_toml(cfg, doc);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ":" << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file '" + path.string() + "' does not exist");
    return parse_config(io::read_text(path), path.string());
}

namespace detail {

inline std::string toml_number(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::string s = io::format_number(v);
    // TOML floats need a fraction or exponent.
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string toml_seed(std::uint64_t v) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        return "\"" + std::to_string(v) + "\"";
    return std::to_string(v);
}

inline std::string toml_string(const std::string& s) {
    std::string o = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            o += '\\';
        o += c;
    }
    return o + "\"";
}

template <class R, class F>
std::string toml_array(const R& r, F f) {
    std::string s = "[";
    bool first = true;
    for (const auto& v : r) {
        s += (first ? "" : ", ") + f(v);
        first = false;
    }
    return s + "]";
}

} // namespace detail

/// Every setting, defaults included, with round-trip exact numbers.
inline std::string snapshot_toml(const RunConfig& cfg) {
    using namespace detail;
    auto num = [](double v) { return toml_number(v); };
    auto integer = [](auto v) { return std::to_string(v); };
    const auto& sc = cfg.scenario;
    std::ostringstream os;
    os << "seed = " << toml_seed(cfg.seed) << "\n";
    os << "threads = " << cfg.threads << "\n\n";

    os << "[physics]\n";
    os << "g_bar = " << num(sc.physics.g_bar) << "\n";
    os << "delta_g_over_g = " << num(sc.physics.delta_g_over_g) << "\n";
    os << "B_z = " << num(sc.physics.B_z) << "\n";
    os << "T_1v_ns = " << num(sc.physics.T_1v) << "\n\n";

    os << "[geometry]\n";
    os << "l_pitch_nm = " << num(sc.geometry.l_pitch) << "\n";
    os << "distance_nm = " << num(sc.geometry.distance) << "\n\n";

    os << "[waveform]\n";
    os << "v_avg = " << num(sc.v_avg) << "\n";
    os << "dt_ns = " << num(sc.dt) << "\n";
    os << "amplitude_V = " << num(sc.amplitude) << "\n";
    os << "v_bias_V = " << num(sc.v_bias) << "\n";
    os << "tau_set = " << toml_array(sc.tau_set, num) << "\n";
    if (sc.resistors)
        os << "resistors_ohm = " << toml_array(*sc.resistors, num) << "\n";
    os << "capacitance_F = " << num(sc.capacitance) << "\n";
    os << "mode = " << toml_string(mode_name(sc.mode)) << "\n\n";

    os << "[noise]\n";
    os << "scale = " << num(sc.noise.scale) << "\n";
    os << "sigma_V = " << num(sc.noise.sigma_V) << "\n";
    os << "f_min_Hz = " << num(sc.noise.f_min) << "\n";
    os << "f_max_Hz = " << num(sc.noise.f_max) << "\n";
    os << "normalization = " << toml_string(normalization_name(sc.noise.normalization)) << "\n\n";

    os << "[propagation]\n";
    os << "integrator = " << toml_string(integrator_name(sc.propagation.integrator)) << "\n";
    os << "substeps = " << sc.propagation.substeps << "\n";
    os << "max_substep_rotation = " << num(sc.propagation.max_substep_rotation) << "\n";
    os << "degeneracy_eps = " << num(sc.propagation.degeneracy_eps) << "\n\n";

    const auto& mp = cfg.map.params;
    os << "[map]\n";
    if (cfg.map.file)
        os << "file = " << toml_string(*cfg.map.file) << "\n";
    os << "mu_r = " << num(mp.mu_r) << "\n";
    os << "mu_i = " << num(mp.mu_i) << "\n";
    os << "sigma = " << num(mp.sigma) << "\n";
    os << "corr_length_nm = " << num(mp.corr_length) << "\n";
    os << "dx_nm = " << num(mp.dx) << "\n";
    os << "x_start_nm = " << num(mp.x_start) << "\n";
    os << "extent_nm = " << num(mp.extent) << "\n";
    os << "seed = " << toml_seed(mp.seed) << "\n\n";

    const auto& g = cfg.ga;
    os << "[ga]\n";
    os << "generations = " << g.generations << "\n";
    os << "population = " << g.population << "\n";
    os << "parents = " << g.parents << "\n";
    os << "mutation_prob = " << num(g.mutation_prob) << "\n";
    os << "elitism = " << g.elitism << "\n";
    os << "tournament_size = " << g.tournament_size << "\n";
    os << "lambda_sigma = " << num(g.lambda_sigma) << "\n";
    os << "n_noise = " << g.n_noise << "\n";
    os << "seed_schedule = " << toml_string(seed_schedule_name(g.seeds)) << "\n";
    os << "stop_threshold = " << num(g.stop_threshold) << "\n\n";

    const auto& s1 = cfg.single;
    os << "[single_run]\n";
    if (s1.genome)
        os << "genome = " << toml_array(*s1.genome, integer) << "\n";
    if (s1.genome_file)
        os << "genome_file = " << toml_string(*s1.genome_file) << "\n";
    os << "constant = " << s1.constant << "\n";
    os << "trace = " << (s1.trace ? "true" : "false") << "\n";
    os << "realization = " << toml_seed(s1.realization) << "\n\n";

    os << "[dispersion]\n";
    os << "velocities = " << toml_array(cfg.dispersion.velocities, num) << "\n";
    os << "n_noise = " << cfg.dispersion.n_noise << "\n";
    os << "baseline = " << cfg.dispersion.baseline << "\n\n";

    os << "[band_sweep]\n";
    os << "velocities = " << toml_array(cfg.band_sweep.velocities, num) << "\n";
    os << "bands_Hz = "
       << toml_array(cfg.band_sweep.bands,
                     [&](const std::pair<double, double>& b) { return "[" + num(b.first) + ", " + num(b.second) + "]"; })
       << "\n";
    os << "n_noise = " << cfg.band_sweep.n_noise << "\n";
    os << "baseline = " << cfg.band_sweep.baseline << "\n\n";

    os << "[optimize]\n";
    os << "map_seeds = " << toml_array(cfg.optimize.map_seeds, toml_seed) << "\n";
    os << "n_eval = " << cfg.optimize.n_eval << "\n";
    os << "threshold = " << num(cfg.optimize.threshold) << "\n";
    os << "baselines = " << toml_array(cfg.optimize.baselines, integer) << "\n";
    return os.str();
}

} // namespace shuttle
