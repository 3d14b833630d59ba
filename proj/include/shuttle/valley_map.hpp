#pragma once

// Synthetic complex intervalley-coupling maps Delta(x) = Delta_r + i Delta_i.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "shuttle/error.hpp"
#include "shuttle/spectral.hpp"

namespace shuttle {

struct ValleyMapParams {
    /// Mean of Delta_r and Delta_i in ueV.
    double mu_r = 20.0;
    double mu_i = 0.0;
    /// Pointwise standard deviation of each component in ueV.
    double sigma = 15.0;
    /// Correlation length of the squared-exponential kernel in nm.
    double corr_length = 15.0;
    double dx = 1.0;
    /// Map covers [x_start, x_start + extent].
    double x_start = -100.0;
    double extent = 10200.0;
    std::uint64_t seed = 1;
};

struct ValleyMap {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> delta_r;
    std::vector<double> delta_i;
    ValleyMapParams meta;

    std::size_t size() const { return delta_r.size(); }
    double x_at(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
    double x_end() const { return x_at(size() - 1); }

    /// Linear interpolation of Delta at x. Throws DomainError outside the map.
    std::complex<double> sample(double x) const {
        const double tol = 1e-9 * dx;
        if (size() == 0 || x < x0 - tol || x > x_end() + tol)
            throw DomainError("valley map sampled at x = " + std::to_string(x) + " nm outside [" +
                              std::to_string(x0) + ", " + std::to_string(x_end()) + "]");
        double s = std::clamp((x - x0) / dx, 0.0, static_cast<double>(size() - 1));
        auto i = static_cast<std::size_t>(s);
        if (i + 1 >= size())
            return {delta_r.back(), delta_i.back()};
        double w = s - static_cast<double>(i);
        return {delta_r[i] + w * (delta_r[i + 1] - delta_r[i]), delta_i[i] + w * (delta_i[i + 1] - delta_i[i])};
    }

    /// Local valley splitting E_v = 2 |Delta| in ueV.
    double valley_splitting(double x) const { return 2.0 * std::abs(sample(x)); }

    /// Fraction of grid nodes with E_v below `threshold` ueV.
    double fraction_below(double threshold) const {
        std::size_t count = 0;
        for (std::size_t i = 0; i < size(); ++i)
            if (2.0 * std::hypot(delta_r[i], delta_i[i]) < threshold)
                ++count;
        return size() ? static_cast<double>(count) / static_cast<double>(size()) : 0.0;
    }
};

/// Draw Delta_r and Delta_i as independent stationary Gaussian fields with
/// covariance sigma^2 exp(-d^2 / (2 l_c^2)) by circulant embedding.
inline ValleyMap generate_valley_map(const ValleyMapParams& p) {
    if (!(p.sigma >= 0))
        throw DomainError("valley map sigma must be non-negative");
    if (!(p.corr_length > 0))
        throw DomainError("valley map correlation length must be positive");
    if (!(p.dx > 0) || !(p.extent > 0))
        throw DomainError("valley map dx and extent must be positive");
    if (p.dx > p.corr_length / 4.0)
        throw DomainError("valley map dx must not exceed corr_length/4");

    const auto n = static_cast<std::size_t>(std::ceil(p.extent / p.dx - 1e-9)) + 1;
    ValleyMap map{p.x_start, p.dx, std::vector<double>(n, p.mu_r), std::vector<double>(n, p.mu_i), p};
    if (p.sigma == 0.0)
        return map;

    const auto reach = static_cast<std::size_t>(std::ceil(10.0 * p.corr_length / p.dx));
    const std::size_t m = spectral::next_pow2(2 * std::max(n, reach));
    spectral::cvec cov(m);
    const double s2 = p.sigma * p.sigma;
    for (std::size_t j = 0; j < m; ++j) {
        double d = static_cast<double>(std::min(j, m - j)) * p.dx / p.corr_length;
        cov[j] = s2 * std::exp(-0.5 * d * d);
    }
    auto lambda = spectral::forward(cov);

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    spectral::cvec xi(m);
    for (std::size_t k = 0; k < m; ++k) {
        double amp = std::sqrt(std::max(lambda[k].real(), 0.0) / static_cast<double>(m));
        double a = normal(rng);
        double b = normal(rng);
        xi[k] = amp * std::complex<double>(a, b);
    }
    auto field = spectral::forward(xi);
    for (std::size_t i = 0; i < n; ++i) {
        map.delta_r[i] += field[i].real();
        map.delta_i[i] += field[i].imag();
    }
    return map;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line, const std::string& field) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("field '" + field + "': cannot parse '" + std::string(s) + "' as a number", line);
    return v;
}

} // namespace detail

inline constexpr int valley_map_format_version = 1;

/// Versioned CSV: key=value metadata lines, a header row, then x,delta_r,delta_i rows.
inline void save_valley_map(const ValleyMap& map, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw Error("cannot open '" + path + "' for writing");
    using detail::format_double;
    os << "# valley map\n";
    os << "version=" << valley_map_format_version << "\n";
    os << "seed=" << map.meta.seed << "\n";
    os << "mu_r=" << format_double(map.meta.mu_r) << "\n";
    os << "mu_i=" << format_double(map.meta.mu_i) << "\n";
    os << "sigma=" << format_double(map.meta.sigma) << "\n";
    os << "corr_length=" << format_double(map.meta.corr_length) << "\n";
    os << "x0=" << format_double(map.x0) << "\n";
    os << "dx=" << format_double(map.dx) << "\n";
    os << "n=" << map.size() << "\n";
    os << "x,delta_r,delta_i\n";
    for (std::size_t i = 0; i < map.size(); ++i)
        os << format_double(map.x_at(i)) << ',' << format_double(map.delta_r[i]) << ','
           << format_double(map.delta_i[i]) << '\n';
    if (!os)
        throw Error("write to '" + path + "' failed");
}

inline ValleyMap parse_valley_map(std::istream& is) {
    std::map<std::string, std::string> meta;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        if (line == "x,delta_r,delta_i") {
            header = true;
            break;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key=value metadata, got '" + line + "'", lineno);
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end())
            throw ParseError("missing metadata key '" + key + "'", lineno);
        return it->second;
    };
    const auto& version = get("version");
    if (version != std::to_string(valley_map_format_version))
        throw UnsupportedVersionError("unsupported valley map version '" + version + "'");
    if (!header)
        throw ParseError("missing column header 'x,delta_r,delta_i'", lineno);

    ValleyMap map;
    map.x0 = detail::parse_double(get("x0"), 0, "x0");
    map.dx = detail::parse_double(get("dx"), 0, "dx");
    map.meta.mu_r = detail::parse_double(get("mu_r"), 0, "mu_r");
    map.meta.mu_i = detail::parse_double(get("mu_i"), 0, "mu_i");
    map.meta.sigma = detail::parse_double(get("sigma"), 0, "sigma");
    map.meta.corr_length = detail::parse_double(get("corr_length"), 0, "corr_length");
    map.meta.dx = map.dx;
    map.meta.x_start = map.x0;
    try {
        map.meta.seed = std::stoull(get("seed"));
    } catch (const std::logic_error&) {
        throw ParseError("field 'seed': not an unsigned integer");
    }
    std::size_t n = 0;
    try {
        n = std::stoull(get("n"));
    } catch (const std::logic_error&) {
        throw ParseError("field 'n': not an unsigned integer");
    }
    if (!(map.dx > 0) || n == 0)
        throw ParseError("dx must be positive and n non-zero");
    map.meta.extent = static_cast<double>(n - 1) * map.dx;
    map.delta_r.reserve(n);
    map.delta_i.reserve(n);

    static const char* names[3] = {"x", "delta_r", "delta_i"};
    while (map.delta_r.size() < n && std::getline(is, line)) {
        ++lineno;
        double vals[3];
        std::size_t start = 0;
        for (int f = 0; f < 3; ++f) {
            auto end = f < 2 ? line.find(',', start) : line.size();
            if (end == std::string::npos)
                throw ParseError("expected 3 comma-separated fields", lineno);
            vals[f] = detail::parse_double(std::string_view(line).substr(start, end - start), lineno, names[f]);
            start = end + 1;
        }
        double expect = map.x0 + static_cast<double>(map.delta_r.size()) * map.dx;
        if (std::abs(vals[0] - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
            throw ParseError("x does not match x0 + i*dx", lineno);
        map.delta_r.push_back(vals[1]);
        map.delta_i.push_back(vals[2]);
    }
    if (map.delta_r.size() != n)
        throw ParseError("truncated map: expected " + std::to_string(n) + " rows, found " +
                             std::to_string(map.delta_r.size()),
                         lineno);
    return map;
}

inline ValleyMap load_valley_map(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw Error("cannot open valley map '" + path + "'");
    try {
        return parse_valley_map(is);
    } catch (const UnsupportedVersionError& e) {
        throw UnsupportedVersionError(path + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace shuttle
