#include "dmrg/presets.hpp"

#include <cmath>

#include "dmrg/errors.hpp"

namespace dmrg {

namespace {

GEngine engine(PresetSize size, double lo = 1.0, double hi = 2.0) {
    VolatilityBand band(lo, hi);
    return GEngine(band, default_spatial_grid(band, 1.0, size.space_points), make_grid(1.0, size.time_steps));
}

Band band(const TimeGrid& g, double (*lower)(double), double (*upper)(double)) {
    return Band(GridCurve::sample(g, lower), GridCurve::sample(g, upper));
}

StateField payoff(const GEngine& e, double (*fn)(double)) { return StateField::sample(e.space(), e.time().horizon(), fn); }

double tanh_fn(double x) { return std::tanh(x); }
double binding_lower(double t) { return 0.3 - 0.6 * t; }
double loose_lower(double) { return -1.0; }
double loose_upper(double) { return 1.0; }

}  // namespace

DMRProblem interior_preset(PresetSize size) {
    GEngine e = engine(size);
    Component c{payoff(e, [](double x) { return std::abs(x); }), GeneratorSpec::zero(), LossFunction::identity(),
                band(e.time(), [](double) { return 1.0; }, [](double) { return 2.0; })};
    return DMRProblem{e, {c}, Regime::lipschitz};
}

DMRProblem lower_ramp_preset(PresetSize size) {
    GEngine e = engine(size);
    Component c{StateField::constant(e.space(), 1.0, 0.0), GeneratorSpec::zero(), LossFunction::identity(),
                band(e.time(), [](double t) { return 1.0 - t; }, [](double) { return 2.0; })};
    return DMRProblem{e, {c}, Regime::lipschitz};
}

DMRProblem lipschitz_preset(PresetSize size) {
    GEngine e = engine(size);
    auto f = GeneratorSpec::lipschitz_kind(
        GeneratorSpec::scalar([](double, double y, double z) { return -0.2 * y + 0.1 * z; }), 0.2);
    Component c{payoff(e, tanh_fn), f, LossFunction::identity(), band(e.time(), binding_lower, loose_upper)};
    return DMRProblem{e, {c}, Regime::lipschitz};
}

DMRProblem quadratic_bounded_preset(PresetSize size) {
    GEngine e = engine(size);
    auto f = GeneratorSpec::quadratic_kind(
        GeneratorSpec::scalar([](double, double y, double z) { return -0.1 * y + 0.1 * z * z; }), 0.1, 0.2);
    Component c{payoff(e, tanh_fn), f, LossFunction::sine(0.5), band(e.time(), binding_lower, [](double) { return 1.5; })};
    return DMRProblem{e, {c}, Regime::quadratic_bounded};
}

DMRProblem quadratic_unbounded_preset(PresetSize size) {
    GEngine e = engine(size);
    auto f = GeneratorSpec::quadratic_kind(GeneratorSpec::scalar([](double, double, double z) { return 0.1 * z * z; }),
                                           0.0, 0.2);
    Component c{payoff(e, [](double x) { return x; }), f, LossFunction::identity(),
                band(e.time(), [](double) { return -2.0; }, [](double) { return 2.0; })};
    return DMRProblem{e, {c}, Regime::quadratic_unbounded};
}

DMRProblem symmetric_pair_preset(PresetSize size) {
    GEngine e = engine(size);
    auto f1 = GeneratorSpec::lipschitz_kind([](double, std::span<const double> y, double) { return -0.1 * y[1]; }, 0.1);
    auto f2 = GeneratorSpec::lipschitz_kind([](double, std::span<const double> y, double) { return -0.1 * y[0]; }, 0.1);
    Band b = band(e.time(), loose_lower, loose_upper);
    return DMRProblem{e,
                      {Component{payoff(e, tanh_fn), f1, LossFunction::identity(), b},
                       Component{payoff(e, tanh_fn), f2, LossFunction::identity(), b}},
                      Regime::lipschitz};
}

DMRProblem binding_pair_preset(PresetSize size) {
    DMRProblem p = symmetric_pair_preset(size);
    p.components[0].band = band(p.engine.time(), binding_lower, loose_upper);
    return p;
}

DMRProblem decoupled_pair_preset(PresetSize size) {
    DMRProblem p = binding_pair_preset(size);
    p.components[0].generator = GeneratorSpec::lipschitz_kind(
        [](double, std::span<const double> y, double z) { return -0.2 * y[0] + 0.1 * z; }, 0.2);
    p.components[1].generator =
        GeneratorSpec::lipschitz_kind([](double, std::span<const double> y, double) { return -0.3 * y[1]; }, 0.3);
    return p;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"interior",          "lower_ramp",      "lipschitz",
                                                "quadratic_bounded", "quadratic_unbounded", "symmetric_pair",
                                                "binding_pair",      "decoupled_pair"};
    return names;
}

DMRProblem make_preset(const std::string& name, PresetSize size) {
    if (name == "interior") return interior_preset(size);
    if (name == "lower_ramp") return lower_ramp_preset(size);
    if (name == "lipschitz") return lipschitz_preset(size);
    if (name == "quadratic_bounded") return quadratic_bounded_preset(size);
    if (name == "quadratic_unbounded") return quadratic_unbounded_preset(size);
    if (name == "symmetric_pair") return symmetric_pair_preset(size);
    if (name == "binding_pair") return binding_pair_preset(size);
    if (name == "decoupled_pair") return decoupled_pair_preset(size);
    throw InvalidInput("unknown preset '" + name + "'");
}

}  // namespace dmrg
