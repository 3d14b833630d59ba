#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shuttle/valley_map.hpp"

using namespace shuttle;
namespace fs = std::filesystem;

namespace {

ValleyMap tiny_map() {
    ValleyMap m;
    m.x0 = 0.0;
    m.dx = 2.0;
    m.delta_r = {3.0, 1.0, -2.0};
    m.delta_i = {4.0, 0.0, 0.5};
    return m;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("shuttle_test_" + name); }

struct Moments {
    double mean, sd, skew, kurt;
};

Moments moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x)
        m += v / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        double d = v - m;
        m2 += d * d / n;
        m3 += d * d * d / n;
        m4 += d * d * d * d / n;
    }
    return {m, std::sqrt(m2), m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

} // namespace

TEST(ValleyMap, ZeroSigmaIsConstant) {
    ValleyMapParams p;
    p.sigma = 0.0;
    p.mu_r = 7.0;
    p.mu_i = -2.0;
    auto m = generate_valley_map(p);
    for (double x : {-100.0, 0.0, 1234.5, 10000.0})
        EXPECT_EQ(m.sample(x), std::complex<double>(7.0, -2.0));
}

TEST(ValleyMap, SampleNodesAndMidpoints) {
    auto m = tiny_map();
    EXPECT_EQ(m.sample(2.0), std::complex<double>(1.0, 0.0));
    EXPECT_EQ(m.sample(1.0), std::complex<double>(2.0, 2.0));
    EXPECT_EQ(m.sample(3.0), std::complex<double>(-0.5, 0.25));
}

TEST(ValleyMap, SplittingIsTwiceModulus) {
    auto m = tiny_map();
    EXPECT_NEAR(m.valley_splitting(0.0), 10.0, 1e-12);
    ValleyMap z{0.0, 1.0, {0.0, 0.0}, {0.0, 0.0}, {}};
    EXPECT_EQ(z.valley_splitting(0.5), 0.0);
}

TEST(ValleyMap, OutOfRange) {
    auto m = tiny_map();
    EXPECT_THROW(m.sample(-0.1), DomainError);
    EXPECT_THROW(m.sample(4.01), DomainError);
}

TEST(ValleyMap, CoarseGridRejected) {
    ValleyMapParams p;
    p.dx = 5.0;
    EXPECT_THROW(generate_valley_map(p), DomainError);
}

TEST(ValleyMap, Reproducible) {
    ValleyMapParams p;
    p.extent = 2000.0;
    p.seed = 17;
    auto a = generate_valley_map(p);
    auto b = generate_valley_map(p);
    EXPECT_EQ(a.delta_r, b.delta_r);
    EXPECT_EQ(a.delta_i, b.delta_i);
    p.seed = 18;
    EXPECT_NE(generate_valley_map(p).delta_r, a.delta_r);
}

TEST(ValleyMap, FieldStatistics) {
    ValleyMapParams p;
    p.extent = 200000.0;
    p.mu_r = 20.0;
    p.mu_i = 0.0;
    p.sigma = 15.0;
    p.corr_length = 15.0;
    p.seed = 4;
    auto m = generate_valley_map(p);
    for (const auto* comp : {&m.delta_r, &m.delta_i}) {
        auto mo = moments(*comp);
        double mu = comp == &m.delta_r ? 20.0 : 0.0;
        EXPECT_NEAR(mo.mean, mu, 0.5);
        EXPECT_NEAR(mo.sd, 15.0, 0.5);
        EXPECT_NEAR(mo.skew, 0.0, 0.1);
        EXPECT_NEAR(mo.kurt, 3.0, 0.2);
    }
    // correlation at one correlation length: exp(-1/2)
    const auto lag = static_cast<std::size_t>(p.corr_length / p.dx);
    double c = 0.0;
    const std::size_t n = m.size() - lag;
    for (std::size_t i = 0; i < n; ++i)
        c += (m.delta_r[i] - 20.0) * (m.delta_r[i + lag] - 20.0);
    c /= static_cast<double>(n) * 225.0;
    EXPECT_NEAR(c, std::exp(-0.5), 0.05);
}

TEST(ValleyMap, SaveLoadRoundTrip) {
    ValleyMapParams p;
    p.extent = 500.0;
    p.seed = 99;
    auto m = generate_valley_map(p);
    auto path = temp_file("roundtrip.csv");
    save_valley_map(m, path.string());
    auto back = load_valley_map(path.string());
    EXPECT_EQ(back.delta_r, m.delta_r);
    EXPECT_EQ(back.delta_i, m.delta_i);
    EXPECT_EQ(back.x0, m.x0);
    EXPECT_EQ(back.dx, m.dx);
    EXPECT_EQ(back.meta.seed, 99u);
    EXPECT_EQ(back.meta.sigma, p.sigma);
    fs::remove(path);
}

TEST(ValleyMap, TruncatedFile) {
    auto m = tiny_map();
    auto path = temp_file("trunc.csv");
    save_valley_map(m, path.string());
    std::string text;
    {
        std::ifstream is(path);
        text.assign(std::istreambuf_iterator<char>(is), {});
    }
    text.erase(text.rfind("4,"));
    std::istringstream is(text);
    EXPECT_THROW(parse_valley_map(is), ParseError);
    fs::remove(path);
}

TEST(ValleyMap, VersionMismatch) {
    std::istringstream is("version=2\nx0=0\ndx=1\nn=1\nx,delta_r,delta_i\n0,1,1\n");
    EXPECT_THROW(parse_valley_map(is), UnsupportedVersionError);
}

TEST(ValleyMap, BadFieldReportsLine) {
    std::istringstream is("version=1\nseed=1\nmu_r=0\nmu_i=0\nsigma=0\ncorr_length=1\nx0=0\ndx=1\nn=2\n"
                          "x,delta_r,delta_i\n0,1,1\n1,abc,1\n");
    try {
        parse_valley_map(is);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 12u);
        EXPECT_NE(std::string(e.what()).find("delta_r"), std::string::npos);
    }
}

TEST(ValleyMap, MissingFileNamesPath) {
    try {
        load_valley_map("/nonexistent/map.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/map.csv"), std::string::npos);
    }
}

TEST(ValleyMap, FractionBelow) {
    auto m = tiny_map();
    EXPECT_NEAR(m.fraction_below(5.0), 2.0 / 3.0, 1e-12);
}
