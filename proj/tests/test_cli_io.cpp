#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmrg/commands.hpp"
#include "dmrg/errors.hpp"

using namespace dmrg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("dmrg_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> r;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST_CASE("expressions evaluate the fixed grammar") {
    ExprVars v;
    v.x = 2.0;
    v.t = 0.5;
    v.z = -1.0;
    v.y = {1.0, 3.0};
    CHECK(Expression::parse("x^2")(v) == 4.0);
    CHECK(Expression::parse("-x^2")(v) == -4.0);
    CHECK(Expression::parse("1 - 2*t + x/4")(v) == doctest::Approx(0.5));
    CHECK(Expression::parse("relu(x - 3) + abs(z) + max(t, 0.7) - min(1, pow(x, 3))")(v) == doctest::Approx(0.7));
    CHECK(Expression::parse("tanh(0) + sin(0)")(v) == 0.0);
    CHECK(Expression::parse("y + y2 - 0.1*y1")(v) == doctest::Approx(3.9));
    CHECK(Expression::parse("c:5")(v) == 5.0);
    CHECK(Expression::parse("2e-1*x")(v) == doctest::Approx(0.4));
    auto e = Expression::parse("-0.1*y2 + z");
    CHECK(e.max_component() == 2);
    CHECK(e.uses_z());
    CHECK_THROWS_AS(Expression::parse("x +"), InvalidInput);
    CHECK_THROWS_AS(Expression::parse("exp(x)"), InvalidInput);
    CHECK_THROWS_AS(Expression::parse("max(x)"), InvalidInput);
    CHECK_THROWS_AS(Expression::parse("(x"), InvalidInput);
    CHECK_THROWS_AS(Expression::parse("c:five"), InvalidInput);
}

TEST_CASE("config parsing") {
    RunConfig c = parse_config("# comment\ntime_steps = 12\ntol = 1e-9\ntruncation = 1, 3\n[component 1]\npayoff = tanh(x)\n"
                               "generator = -0.2*y\nlipschitz = 0.2\nlower = -1\nupper = 1 # trailing\n[component 2]\n"
                               "loss = sine\nloss_amplitude = 0.25\n");
    CHECK(c.time_steps == 12);
    CHECK(c.tol == 1e-9);
    CHECK(c.truncation == std::vector<double>{1.0, 3.0});
    REQUIRE(c.components.size() == 2);
    CHECK(c.components[0].payoff == "tanh(x)");
    CHECK(c.components[1].loss == "sine");
    CHECK(c.components[1].loss_amplitude == 0.25);

    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const InvalidInput& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("time_steps = 4\ncolour = red\n").find("line 2") != std::string::npos);
    CHECK(message("[component 1]\nseed = 3\n").find("unknown component key") != std::string::npos);
    CHECK(message("time_steps = many\n").find("time_steps") != std::string::npos);
    CHECK(message("[component 2]\n").find("numbered") != std::string::npos);
    CHECK(message("space_points = 100\n").find("odd") != std::string::npos);
    CHECK(message("payoff = x +\n").find("line 1") != std::string::npos);
    CHECK(message("preset = nope\n").find("unknown preset") != std::string::npos);
    CHECK(message("preset = interior\n[component 1]\n").find("preset") != std::string::npos);
    CHECK(message("regime = fancy\n").find("regime") != std::string::npos);
}

TEST_CASE("problems built from sections and tables") {
    RunConfig c = parse_config("time_steps = 4\nspace_points = 41\n[component 1]\npayoff = x\ngenerator = -0.1*y2\n"
                               "lipschitz = 0.1\n[component 2]\npayoff = 0\ngenerator = -0.1*y1\nlipschitz = 0.1\n");
    DMRProblem p = build_problem(c);
    CHECK(p.dimension() == 2);
    const double y[2] = {1.0, 2.0};
    CHECK(p.components[0].generator(0.0, y, 0.0) == doctest::Approx(-0.2));
    CHECK_NOTHROW(p.validate());

    RunConfig bad = parse_config("time_steps = 4\nspace_points = 41\n[component 1]\ngenerator = y3\n");
    CHECK_THROWS_AS(build_problem(bad), InvalidInput);
    RunConfig steep = parse_config("time_steps = 4\nspace_points = 41\n[component 1]\ngenerator = -2*y\nlipschitz = 0.1\n");
    CHECK_THROWS_AS(build_problem(steep), InvalidInput);

    fs::path dir = scratch("table");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "b.csv");
        f << "t,l,u\n0,0.1,1\n0.5,0,1\n1,-0.1,1\n";
    }
    RunConfig tab = parse_config("time_steps = 2\nspace_points = 41\n[component 1]\nbarriers_csv = b.csv\n", dir);
    DMRProblem q = build_problem(tab);
    CHECK(q.components[0].band.lower()[1] == 0.0);
    {
        std::ofstream f(dir / "b.csv");
        f << "t,l,u\n0,0.1,1\n0.4,0,1\n1,-0.1,1\n";
    }
    CHECK_THROWS_AS(build_problem(tab), InvalidInput);
}

TEST_CASE("gexp command rows") {
    fs::path out = scratch("gexp");
    std::ostringstream log;
    RunConfig c = parse_config("payoff = x^2\ntime_steps = 4\nspace_points = 401\nhalf_width = 16\n");
    CHECK(cmd_gexp(c, out, log) == exit_ok);
    CHECK(first_line(out / "gexp.csv") == "t,gexp,classical_lower,classical_upper,scenario_lower_bound");
    auto rows = csv_rows(out / "gexp.csv");
    REQUIRE(rows.size() == 5);
    CHECK(std::abs(rows.back()[1] - 4.0) <= 0.04);
    CHECK(rows.back()[2] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(rows.back()[4] <= rows.back()[1] + 1e-2);
    CHECK(rows.front()[1] == 0.0);

    c.payoff = "relu(x)";
    CHECK(cmd_gexp(c, out, log) == exit_ok);
    CHECK(std::abs(csv_rows(out / "gexp.csv").back()[1] - 0.79788) <= 0.008);
}

TEST_CASE("skorokhod command presets") {
    std::ostringstream log;
    RunConfig c;
    c.path_preset = "ramp";
    c.time_steps = 40;
    fs::path out = scratch("sk");
    CHECK(cmd_skorokhod(c, out, log) == exit_ok);
    CHECK(first_line(out / "skorokhod.csv") == "t,xbar,l,u,x,k,tv_k");
    for (const auto& r : csv_rows(out / "skorokhod.csv")) {
        CHECK(std::abs(r[5] + std::max(r[0] - 1.0, 0.0)) <= 1e-12);
        CHECK(std::abs(r[4] - std::min(r[0], 1.0)) <= 1e-12);
    }
    CHECK(slurp(out / "skorokhod.csv").find("# passed,1") != std::string::npos);

    c.path_preset = "interior";
    CHECK(cmd_skorokhod(c, out, log) == exit_ok);
    for (const auto& r : csv_rows(out / "skorokhod.csv")) CHECK(r[5] == 0.0);

    c.path_preset = "random";
    c.time_steps = 32;
    c.seed = 99;
    CHECK(cmd_skorokhod(c, out / "a", log) == exit_ok);
    CHECK(cmd_skorokhod(c, out / "b", log) == exit_ok);
    CHECK(slurp(out / "a" / "skorokhod.csv") == slurp(out / "b" / "skorokhod.csv"));
    c.seed = 100;
    CHECK(cmd_skorokhod(c, out / "c", log) == exit_ok);
    CHECK(slurp(out / "a" / "skorokhod.csv") != slurp(out / "c" / "skorokhod.csv"));

    RunConfig bwd = parse_config("direction = backward\ninput = -t\nanchor = 0\nlower = -0.25\nupper = 0.25\ntime_steps = 20\n");
    CHECK(cmd_skorokhod(bwd, out, log) == exit_ok);
    bwd.anchor = 1.0;
    CHECK(guarded([&] { return cmd_skorokhod(bwd, out, log); }, log) == exit_validation);
}

TEST_CASE("solve command bundle") {
    std::ostringstream log;
    fs::path out = scratch("solve");
    RunConfig c;
    c.preset = "lower_ramp";
    c.time_steps = 20;
    c.space_points = 61;
    CHECK(cmd_solve(c, out, log) == exit_ok);
    CHECK(first_line(out / "trace_1.csv") == "t,E_hbar,l,u,rho,TV_R,Y0,Z0");
    for (const auto& r : csv_rows(out / "trace_1.csv")) CHECK(std::abs(r[4] - (1.0 - r[0])) <= 1e-12);
    CHECK(first_line(out / "picard.csv") == "iteration,distance");
    const std::string cert = slurp(out / "cert.txt");
    CHECK(cert.find("label: certified") != std::string::npos);
    CHECK(cert.find("overall: pass") != std::string::npos);

    c.preset = "symmetric_pair";
    CHECK(cmd_solve(c, out, log) == exit_ok);
    auto a = csv_rows(out / "trace_1.csv"), b = csv_rows(out / "trace_2.csv");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i][1] - b[i][1]) <= 5e-8);

    c.preset = "interior";
    CHECK(cmd_solve(c, out, log) == exit_ok);
    for (const auto& r : csv_rows(out / "trace_1.csv")) {
        CHECK(std::abs(r[4]) <= 1e-12);
        CHECK(r[5] <= 1e-6);
    }

    c.preset = "quadratic_unbounded";
    CHECK(cmd_solve(c, out, log) == exit_ok);
    CHECK(slurp(out / "cert.txt").find("label: stabilized") != std::string::npos);
}

TEST_CASE("K diagnostic in the certificate") {
    std::ostringstream log;
    fs::path out = scratch("kdiag");
    RunConfig c;
    c.preset = "lipschitz";
    c.time_steps = 20;
    c.space_points = 101;
    c.k_paths = 4000;
    c.seed = 5;
    CHECK(cmd_solve(c, out, log) == exit_ok);
    const std::string cert = slurp(out / "cert.txt");
    const std::string key = "argmax volatility: mean K_T ";
    const auto at = cert.find(key);
    REQUIRE(at != std::string::npos);
    CHECK(std::abs(std::stod(cert.substr(at + key.size()))) <= 0.02);
    CHECK(cert.find("nonincreasing") != std::string::npos);
}

TEST_CASE("exit codes follow the error kind") {
    std::ostringstream err;
    CHECK(guarded([] { return 0; }, err) == exit_ok);
    CHECK(guarded([]() -> int { throw InvalidInput("x"); }, err) == exit_validation);
    CHECK(guarded([]() -> int { throw DegenerateBandError("x"); }, err) == exit_validation);
    CHECK(guarded([]() -> int { throw DivergenceError("x"); }, err) == exit_divergence);
    CHECK(guarded([]() -> int { throw ConvergenceError("x", {1.0}); }, err) == exit_nonconvergence);
    CHECK(guarded([]() -> int { throw InconclusiveError("x"); }, err) == exit_inconclusive);
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
}
