#include "dmrg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dmrg/errors.hpp"
#include "dmrg/presets.hpp"

namespace dmrg {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail_at(int line, const std::string& key, const std::string& msg) {
    throw InvalidInput("config line " + std::to_string(line) + " (" + key + "): " + msg);
}

double to_double(const std::string& v, int line, const std::string& key) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        fail_at(line, key, "expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(d)) fail_at(line, key, "expected a number, got '" + v + "'");
    return d;
}

template <class Int>
Int to_int(const std::string& v, int line, const std::string& key) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail_at(line, key, "expected an integer, got '" + v + "'");
    return out;
}

std::string checked_expr(const std::string& v, int line, const std::string& key) {
    try {
        Expression::parse(v);
    } catch (const InvalidInput& e) {
        fail_at(line, key, e.what());
    }
    return v;
}

using Setter = std::function<void(const std::string&, int, const std::string&)>;

std::map<std::string, Setter> global_keys(RunConfig& c) {
    auto num = [](double& f) { return [&f](const std::string& v, int l, const std::string& k) { f = to_double(v, l, k); }; };
    auto opt = [](std::optional<double>& f) {
        return [&f](const std::string& v, int l, const std::string& k) { f = to_double(v, l, k); };
    };
    auto integer = [](int& f) { return [&f](const std::string& v, int l, const std::string& k) { f = to_int<int>(v, l, k); }; };
    auto expr = [](std::string& f) {
        return [&f](const std::string& v, int l, const std::string& k) { f = checked_expr(v, l, k); };
    };
    return {
        {"preset", [&c](const std::string& v, int, const std::string&) { c.preset = v; }},
        {"sigma_lower", num(c.sigma_lower)},
        {"sigma_upper", num(c.sigma_upper)},
        {"horizon", num(c.horizon)},
        {"time_steps", integer(c.time_steps)},
        {"space_points", integer(c.space_points)},
        {"half_width", opt(c.half_width)},
        {"regime",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v == "lipschitz") c.regime = Regime::lipschitz;
             else if (v == "quadratic_bounded") c.regime = Regime::quadratic_bounded;
             else if (v == "quadratic_unbounded") c.regime = Regime::quadratic_unbounded;
             else fail_at(l, k, "unknown regime '" + v + "'");
         }},
        {"max_iters", integer(c.max_iters)},
        {"tol", num(c.tol)},
        {"window", opt(c.window)},
        {"initial", num(c.initial)},
        {"construction",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v == "upper") c.construction = Construction::upper;
             else if (v == "lower") c.construction = Construction::lower;
             else fail_at(l, k, "expected upper or lower");
         }},
        {"truncation",
         [&c](const std::string& v, int l, const std::string& k) {
             c.truncation.clear();
             std::stringstream ss(v);
             for (std::string item; std::getline(ss, item, ',');) c.truncation.push_back(to_double(trim(item), l, k));
         }},
        {"seed", [&c](const std::string& v, int l, const std::string& k) { c.seed = to_int<std::uint64_t>(v, l, k); }},
        {"k_paths", integer(c.k_paths)},
        {"payoff", expr(c.payoff)},
        {"path_preset",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v != "ramp" && v != "interior" && v != "random" && v != "custom") fail_at(l, k, "unknown path preset '" + v + "'");
             c.path_preset = v;
         }},
        {"direction",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v != "forward" && v != "backward") fail_at(l, k, "expected forward or backward");
             c.direction = v;
         }},
        {"input", expr(c.input)},
        {"lower", expr(c.lower)},
        {"upper", expr(c.upper)},
        {"anchor", num(c.anchor)},
    };
}

std::map<std::string, Setter> component_keys(ComponentConfig& c, const std::filesystem::path& base) {
    auto num = [](double& f) { return [&f](const std::string& v, int l, const std::string& k) { f = to_double(v, l, k); }; };
    auto expr = [](std::string& f) {
        return [&f](const std::string& v, int l, const std::string& k) { f = checked_expr(v, l, k); };
    };
    return {
        {"payoff", expr(c.payoff)},
        {"generator", expr(c.generator)},
        {"generator_kind",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v == "lipschitz") c.kind = GeneratorKind::lipschitz;
             else if (v == "quadratic") c.kind = GeneratorKind::quadratic;
             else fail_at(l, k, "expected lipschitz or quadratic");
         }},
        {"lipschitz", num(c.lipschitz)},
        {"lambda", num(c.lambda)},
        {"gamma", num(c.gamma)},
        {"loss",
         [&c](const std::string& v, int l, const std::string& k) {
             if (v != "identity" && v != "affine" && v != "sine") fail_at(l, k, "unknown loss '" + v + "'");
             c.loss = v;
         }},
        {"loss_scale", num(c.loss_scale)},
        {"loss_offset", num(c.loss_offset)},
        {"loss_amplitude", num(c.loss_amplitude)},
        {"lower", expr(c.lower)},
        {"upper", expr(c.upper)},
        {"barriers_csv", [&c, base](const std::string& v, int, const std::string&) { c.barriers_csv = base / v; }},
    };
}

void check_ranges(const RunConfig& c) {
    auto bad = [](const std::string& k, const std::string& msg) { throw InvalidInput("config (" + k + "): " + msg); };
    if (!(c.sigma_lower > 0.0) || !(c.sigma_upper >= c.sigma_lower)) bad("sigma_lower", "need 0 < sigma_lower <= sigma_upper");
    if (!(c.horizon > 0.0)) bad("horizon", "must be positive");
    if (c.time_steps < 1) bad("time_steps", "must be at least 1");
    if (c.space_points < 3 || c.space_points % 2 == 0) bad("space_points", "must be odd and at least 3");
    if (c.half_width && !(*c.half_width > 0.0)) bad("half_width", "must be positive");
    if (c.max_iters < 1) bad("max_iters", "must be at least 1");
    if (!(c.tol > 0.0)) bad("tol", "must be positive");
    if (c.window && !(*c.window > 0.0)) bad("window", "must be positive");
    if (c.k_paths < 0) bad("k_paths", "must be non-negative");
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base) {
    RunConfig cfg;
    auto globals = global_keys(cfg);
    std::vector<std::map<std::string, Setter>> sections;
    std::map<std::string, Setter>* current = &globals;
    cfg.components.reserve(9);

    std::istringstream in{std::string(text)};
    int line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail_at(line_no, line, "unterminated section header");
            std::istringstream hdr(line.substr(1, line.size() - 2));
            std::string word;
            int index = 0;
            if (!(hdr >> word >> index) || word != "component" || !(hdr >> std::ws).eof()) {
                fail_at(line_no, line, "expected [component N]");
            }
            if (index != static_cast<int>(cfg.components.size()) + 1) {
                fail_at(line_no, line, "components must be numbered 1, 2, ... in order");
            }
            if (index > 9) fail_at(line_no, line, "at most 9 components");
            cfg.components.emplace_back();
            sections.push_back(component_keys(cfg.components.back(), base));
            current = &sections.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail_at(line_no, line, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = current->find(key);
        if (it == current->end()) {
            fail_at(line_no, key, current == &globals ? "unknown key" : "unknown component key");
        }
        if (value.empty()) fail_at(line_no, key, "empty value");
        it->second(value, line_no, key);
    }
    check_ranges(cfg);
    if (cfg.preset) {
        const auto& names = preset_names();
        if (std::find(names.begin(), names.end(), *cfg.preset) == names.end()) {
            throw InvalidInput("config (preset): unknown preset '" + *cfg.preset + "'");
        }
        if (!cfg.components.empty()) throw InvalidInput("config: a preset cannot be combined with component sections");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

TimeGrid config_grid(const RunConfig& cfg) { return make_grid(cfg.horizon, cfg.time_steps); }

GEngine config_engine(const RunConfig& cfg) {
    VolatilityBand band(cfg.sigma_lower, cfg.sigma_upper);
    SpatialGrid space = cfg.half_width ? SpatialGrid(*cfg.half_width, cfg.space_points)
                                       : default_spatial_grid(band, cfg.horizon, cfg.space_points);
    return GEngine(band, space, config_grid(cfg));
}

PicardOptions config_picard(const RunConfig& cfg) {
    PicardOptions o;
    o.max_iters = cfg.max_iters;
    o.tol = cfg.tol;
    o.window = cfg.window;
    o.initial = cfg.initial;
    o.reflect.construction = cfg.construction;
    return o;
}

Band load_barrier_csv(const std::filesystem::path& path, const TimeGrid& grid) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read barrier table '" + path.string() + "'");
    std::string header;
    std::getline(in, header);
    std::string compact;
    for (char ch : header)
        if (!std::isspace(static_cast<unsigned char>(ch))) compact += ch;
    if (compact != "t,l,u") throw InvalidInput(path.string() + ": header must be t,l,u");
    std::vector<double> lo, hi;
    int row = 1;
    for (std::string line; std::getline(in, line);) {
        ++row;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell[3];
        for (auto& c : cell)
            if (!std::getline(ss, c, ',')) throw InvalidInput(path.string() + " row " + std::to_string(row) + ": need 3 columns");
        const std::string where = path.string() + " row " + std::to_string(row);
        const double t = to_double(trim(cell[0]), row, where);
        const std::size_t i = lo.size();
        if (static_cast<int>(i) >= grid.size() || std::abs(t - grid.node(static_cast<int>(i))) > 1e-9 * (1.0 + grid.horizon())) {
            throw InvalidInput(where + ": t does not match grid node " + std::to_string(i));
        }
        lo.push_back(to_double(trim(cell[1]), row, where));
        hi.push_back(to_double(trim(cell[2]), row, where));
    }
    if (static_cast<int>(lo.size()) != grid.size()) {
        throw InvalidInput(path.string() + ": expected " + std::to_string(grid.size()) + " rows");
    }
    return Band(GridCurve(grid, std::move(lo)), GridCurve(grid, std::move(hi)));
}

namespace {

LossFunction make_loss(const ComponentConfig& c) {
    if (c.loss == "affine") return LossFunction::affine(c.loss_scale, c.loss_offset);
    if (c.loss == "sine") return LossFunction::sine(c.loss_amplitude);
    return LossFunction::identity();
}

GeneratorSpec make_generator(const ComponentConfig& c, int dimension, int index) {
    const Expression e = Expression::parse(c.generator);
    if (e.max_component() > dimension) {
        throw InvalidInput("component " + std::to_string(index + 1) + ": generator uses y" +
                           std::to_string(e.max_component()) + " but the problem has " + std::to_string(dimension) +
                           " component(s)");
    }
    auto fn = [e](double t, std::span<const double> y, double z) {
        ExprVars v;
        v.t = t;
        v.z = z;
        std::copy(y.begin(), y.end(), v.y.begin());
        return e(v);
    };
    if (c.kind == GeneratorKind::quadratic) return GeneratorSpec::quadratic_kind(fn, c.lambda, c.gamma);
    return GeneratorSpec::lipschitz_kind(fn, c.lipschitz);
}

}  // namespace

DMRProblem build_problem(const RunConfig& cfg) {
    if (cfg.preset) {
        DMRProblem p = make_preset(*cfg.preset, PresetSize{cfg.time_steps, cfg.space_points});
        return p;
    }
    if (cfg.components.empty()) throw InvalidInput("config: no preset and no [component N] sections");
    GEngine engine = config_engine(cfg);
    const TimeGrid& grid = engine.time();
    const int dim = static_cast<int>(cfg.components.size());
    DMRProblem p{engine, {}, cfg.regime};
    for (int j = 0; j < dim; ++j) {
        const ComponentConfig& c = cfg.components[static_cast<std::size_t>(j)];
        const Expression payoff = Expression::parse(c.payoff);
        StateField terminal = StateField::sample(engine.space(), grid.horizon(), [&](double x) { return payoff(x, grid.horizon()); });
        Band band = [&] {
            if (c.barriers_csv) return load_barrier_csv(*c.barriers_csv, grid);
            const Expression lo = Expression::parse(c.lower), hi = Expression::parse(c.upper);
            return Band(GridCurve::sample(grid, [&](double t) { return lo(0.0, t); }),
                        GridCurve::sample(grid, [&](double t) { return hi(0.0, t); }));
        }();
        LossFunction loss = make_loss(c);
        loss.validate(grid, engine.space().x_max());
        GeneratorSpec generator = make_generator(c, dim, j);
        generator.validate(grid, dim, 5.0, dim <= 2 ? 9 : 3);
        p.components.push_back(Component{std::move(terminal), std::move(generator), std::move(loss), std::move(band)});
    }
    return p;
}

}  // namespace dmrg
