#pragma once

// CSV tables, genome files and small SVG charts.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "shuttle/error.hpp"
#include "shuttle/pipeline.hpp"

namespace shuttle::io {

/// Shortest round-trip representation; "nan" / "inf" for non-finite values.
inline std::string format_number(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

using Cell = std::variant<double, long long, std::string>;

inline std::string format_cell(const Cell& c) {
    if (auto d = std::get_if<double>(&c))
        return format_number(*d);
    if (auto i = std::get_if<long long>(&c))
        return std::to_string(*i);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"')
            q += '"';
        q += ch;
    }
    return q + "\"";
}

/// In-memory table written in one go, so partially written files never appear.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<Cell> row) {
        if (row.size() != header_.size())
            throw Error("csv row has " + std::to_string(row.size()) + " cells, header has " +
                        std::to_string(header_.size()));
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<Cell>>& rows() const { return rows_; }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < header_.size(); ++i)
            os << (i ? "," : "") << format_cell(header_[i]);
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i)
                os << (i ? "," : "") << format_cell(r[i]);
            os << '\n';
        }
        return os.str();
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw Error("cannot open '" + path.string() + "' for writing");
        os << str();
        if (!os)
            throw Error("write to '" + path.string() + "' failed");
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os)
        throw Error("write to '" + path.string() + "' failed");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// One resistor index per line.
inline void write_genome(const std::filesystem::path& path, const Genome& g) {
    std::string s;
    for (int a : g)
        s += std::to_string(a) + "\n";
    write_text(path, s);
}

inline Genome parse_genome(std::istream& is) {
    Genome g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string_view tok(line.data() + first, last - first + 1);
        int v = -1;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v < 0 || v > 3)
            throw ParseError("expected a resistor index in {0,1,2,3}, got '" + std::string(tok) + "'", lineno);
        g.push_back(v);
    }
    return g;
}

inline Genome read_genome(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw Error("cannot open genome file '" + path.string() + "'");
    try {
        return parse_genome(is);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline CsvTable waveform_table(const ElectrodeWaveforms& w) {
    CsvTable t({"t_ns", "V1", "V2", "V3", "V4"});
    for (std::size_t i = 0; i < w.grid.n_samples; ++i)
        t.add_row({w.grid.t(i), w.channels[0][i], w.channels[1][i], w.channels[2][i], w.channels[3][i]});
    return t;
}

inline CsvTable trajectory_table(const Trajectory& tr) {
    CsvTable t({"t_ns", "x_nm", "v_nm_per_ns"});
    for (std::size_t i = 0; i < tr.x.size(); ++i)
        t.add_row({tr.grid.t(i), tr.x[i], tr.v[i]});
    return t;
}

/// Per-step spin purity, excited-valley population and lab-frame Bloch vector.
inline CsvTable state_table(const Trajectory& tr, const ValleyMap& map, const std::vector<Mat4>& states) {
    CsvTable t({"t_ns", "x_nm", "spin_purity", "p_v", "bx", "by", "bz"});
    for (std::size_t i = 0; i < states.size(); ++i) {
        auto d = map.sample(tr.x[i]);
        double pv = std::numeric_limits<double>::quiet_NaN();
        try {
            pv = excited_valley_population(states[i], d.real(), d.imag());
        } catch (const ValleyDegeneracyError&) {
        }
        auto b = bloch_vector(reduce_to_spin(states[i]));
        t.add_row({tr.grid.t(i), tr.x[i], spin_purity(states[i]), pv, b[0], b[1], b[2]});
    }
    return t;
}

// ---------------------------------------------------------------------------
// SVG charts

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    /// Optional symmetric error bars.
    std::vector<double> err;
    bool markers = true;
    bool lines = true;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '&': o += "&amp;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

struct Axis {
    double lo = 0, hi = 1;
    bool log = false;

    double map(double v) const {
        double a = log ? std::log10(v) : v;
        return (a - lo) / (hi - lo);
    }
    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            for (double e = std::ceil(lo); e <= hi + 1e-9; e += 1.0)
                t.push_back(std::pow(10.0, e));
            return t;
        }
        double span = hi - lo;
        double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (span / (step * m) <= 7) {
                step *= m;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
            t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
        return t;
    }
};

inline Axis make_axis(const std::vector<double>& values, bool log) {
    Axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
        if (!std::isfinite(v) || (log && v <= 0))
            continue;
        double t = log ? std::log10(v) : v;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    if (!std::isfinite(lo)) {
        lo = 0;
        hi = 1;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    if (log) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
    } else {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

} // namespace detail

inline std::string render_svg(const Chart& c) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    const double W = 640, H = 420, ml = 80, mr = 150, mt = 40, mb = 60;
    const double pw = W - ml - mr, ph = H - mt - mb;

    std::vector<double> xs, ys;
    for (const auto& s : c.series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            double e = i < s.err.size() ? s.err[i] : 0.0;
            ys.push_back(s.y[i] + e);
            ys.push_back(c.log_y ? s.y[i] : s.y[i] - e);
        }
    }
    auto ax = detail::make_axis(xs, c.log_x);
    auto ay = detail::make_axis(ys, c.log_y);
    auto px = [&](double v) { return ml + pw * ax.map(v); };
    auto py = [&](double v) { return mt + ph * (1.0 - ay.map(v)); };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!c.log_x || x > 0) && (!c.log_y || y > 0);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << detail::xml_escape(c.title) << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        double x = px(t);
        os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\"" << mt + ph + 5
           << "\" stroke=\"black\"/><text x=\"" << x << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
           << detail::fmt(t) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        double y = py(t);
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
           << "\" stroke=\"black\"/><text x=\"" << ml - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
           << detail::fmt(t) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
       << detail::xml_escape(c.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::xml_escape(c.y_label) << "</text>\n";

    for (std::size_t k = 0; k < c.series.size(); ++k) {
        const auto& s = c.series[k];
        const char* col = palette[k % std::size(palette)];
        if (s.lines) {
            os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
                if (ok(s.x[i], s.y[i]))
                    os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            os << "\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!ok(s.x[i], s.y[i]))
                continue;
            if (i < s.err.size() && s.err[i] > 0) {
                double lo = s.y[i] - s.err[i];
                if (c.log_y && lo <= 0)
                    lo = std::pow(10.0, ay.lo);
                os << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(s.x[i]) << "\" y2=\""
                   << py(s.y[i] + s.err[i]) << "\" stroke=\"" << col << "\"/>\n";
            }
            if (s.markers)
                os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << col
                   << "\"/>\n";
        }
        double ly = mt + 14 + 18 * static_cast<double>(k);
        os << "<rect x=\"" << W - mr + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << col
           << "\"/><text x=\"" << W - mr + 30 << "\" y=\"" << ly + 1 << "\">" << detail::xml_escape(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::filesystem::path& path, const Chart& c) { write_text(path, render_svg(c)); }

} // namespace shuttle::io
