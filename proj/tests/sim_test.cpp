#include "bondflow/dsl.hpp"
#include "bondflow/models.hpp"
#include "bondflow/sim.hpp"

#include "support/support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace bondflow;

namespace {

double lc_max_error(double dt) {
    const OdeSystem sys = compile(fixtures::lc_oscillator());
    SimConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 10.0;
    const Trajectory tr = simulate(sys, cfg);
    const int p = *sys.state_offset("L", StateKind::Momentum);
    const int q = *sys.state_offset("Cap", StateKind::Displacement);
    double err = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double t = tr.times[k];
        const auto row = static_cast<Eigen::Index>(k);
        err = std::max(err, std::fabs(tr.states(row, p) - std::cos(t)));
        err = std::max(err, std::fabs(tr.states(row, q) - std::sin(t)));
    }
    return err;
}

}  // namespace

TEST(SimConfig, Checks) {
    SimConfig c;
    EXPECT_NO_THROW(c.check());
    c.dt = 0;
    EXPECT_THROW(c.check(), Error);
    c = {};
    c.t_end = -1;
    EXPECT_THROW(c.check(), Error);
    c = {};
    c.record_every = 0;
    EXPECT_THROW(c.check(), Error);
}

TEST(Simulate, ZeroLcStaysZero) {
    const Trajectory tr = simulate(compile(fixtures::lc_oscillator(1, 1, 0, 0)), {});
    EXPECT_EQ(tr.states.norm(), 0.0);
    EXPECT_EQ(tr.efforts.norm(), 0.0);
    EXPECT_EQ(tr.flows.norm(), 0.0);
    const EnergyBalance b = energy_report(tr);
    EXPECT_EQ(b.supplied, 0.0);
    EXPECT_EQ(b.stored_delta, 0.0);
    EXPECT_EQ(b.dissipated, 0.0);
    EXPECT_EQ(b.residual, 0.0);
}

TEST(Simulate, LosslessLcMatchesHarmonicSolution) {
    EXPECT_LT(lc_max_error(1e-3), 1e-6);
}

TEST(Simulate, FourthOrderConvergence) {
    const double coarse = lc_max_error(0.1);
    const double fine = lc_max_error(0.05);
    const double ratio = coarse / fine;
    EXPECT_GE(ratio, 12.0) << coarse << " / " << fine;
    EXPECT_LE(ratio, 20.0) << coarse << " / " << fine;
}

TEST(Simulate, LcEnergyConserved) {
    const OdeSystem sys = compile(fixtures::lc_oscillator());
    SimConfig cfg;
    cfg.t_end = 4 * M_PI;
    cfg.dt = 1e-3;
    const EnergyBalance b = energy_report(simulate(sys, cfg));
    EXPECT_EQ(b.dissipated, 0.0);
    EXPECT_LT(std::fabs(b.stored_delta), 1e-6);
}

TEST(Simulate, RlStepResponse) {
    const OdeSystem sys = compile(fixtures::rl_step());
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.dt = 1e-3;
    const Trajectory tr = simulate(sys, cfg);
    const auto b = static_cast<Eigen::Index>(*sys.graph().bond_index("b3"));
    EXPECT_DOUBLE_EQ(tr.times.back(), 1.0);
    EXPECT_NEAR(tr.flows(static_cast<Eigen::Index>(tr.size() - 1), b), 1.0 - std::exp(-1.0), 1e-6);
}

TEST(Simulate, RlSuppliedEnergy) {
    const OdeSystem sys = compile(fixtures::rl_step());
    SimConfig cfg;
    cfg.t_end = 5.0;
    cfg.dt = 1e-3;
    const EnergyBalance b = energy_report(simulate(sys, cfg));
    EXPECT_NEAR(b.supplied, 5.0 - 1.0 + std::exp(-5.0), 1e-5);
}

TEST(Simulate, GridAndDecimation) {
    const OdeSystem sys = compile(fixtures::rl_step());
    SimConfig cfg;
    cfg.t_end = 0.105;
    cfg.dt = 0.01;
    cfg.record_every = 3;
    const Trajectory tr = simulate(sys, cfg);
    ASSERT_GE(tr.size(), 2u);
    EXPECT_EQ(tr.times.front(), 0.0);
    EXPECT_DOUBLE_EQ(tr.times.back(), 0.105);
    EXPECT_NEAR(tr.times[1], 0.03, 1e-15);
    const auto n = static_cast<Eigen::Index>(tr.size());
    EXPECT_EQ(tr.states.rows(), n);
    EXPECT_EQ(tr.efforts.rows(), n);
    EXPECT_EQ(tr.flows.rows(), n);
    EXPECT_EQ(tr.power.rows(), n);
    EXPECT_EQ(tr.supplied.size(), tr.size());
    EXPECT_EQ(tr.stored.size(), tr.size());
    EXPECT_EQ(tr.dissipated.size(), tr.size());
}

TEST(Simulate, ZeroHorizonRecordsInitialPoint) {
    SimConfig cfg;
    cfg.t_end = 0.0;
    const Trajectory tr = simulate(compile(fixtures::lc_oscillator()), cfg);
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr.states(0, 0) + tr.states(0, 1), 1.0);
}

TEST(Simulate, InputOverride) {
    const OdeSystem sys = compile(fixtures::rl_step());
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.inputs["src"] = [](double) { return 2.0; };
    const Trajectory tr = simulate(sys, cfg);
    const auto b = static_cast<Eigen::Index>(*sys.graph().bond_index("b3"));
    EXPECT_NEAR(tr.flows(static_cast<Eigen::Index>(tr.size() - 1), b), 2.0 * (1.0 - std::exp(-1.0)), 1e-6);
    cfg.inputs.clear();
    cfg.inputs["nope"] = [](double) { return 0.0; };
    EXPECT_THROW(simulate(sys, cfg), Error);
}

TEST(Simulate, RuntimeSingularityCarriesTime) {
    // The resistor receives the node effort, so its flow needs 1 / k.
    const OdeSystem sys = compile(load(
        "model sing\n"
        "element SE s { value = 1 }\n"
        "element 0 n\n"
        "element MR r { k = t - 0.5 }\n"
        "bond b1 s -> n\n"
        "bond b2 n -> r\n"));
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.dt = 0.1;
    try {
        simulate(sys, cfg);
        FAIL() << "expected a singular parameter";
    } catch (const EvalError& e) {
        EXPECT_EQ(e.element(), "r");
        EXPECT_NEAR(e.time(), 0.5, 1e-12);
    }
}

TEST(Simulate, DissipationNonNegativeAndMonotone) {
    for (const auto& m : corpus()) {
        const OdeSystem sys = compile(m.build());
        SimConfig cfg;
        cfg.t_end = 0.2;
        cfg.dt = 1e-4;
        const Trajectory tr = simulate(sys, cfg);
        for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_GE(tr.dissipated[k], tr.dissipated[k - 1]) << m.name;
        for (std::size_t e = 0; e < tr.element_kinds.size(); ++e) {
            if (tr.element_kinds[e] != ElementKind::Resistor) continue;
            EXPECT_GE(tr.power.col(static_cast<Eigen::Index>(e)).minCoeff(), -1e-12) << m.name;
        }
    }
}

TEST(Simulate, CorpusEnergyBalance) {
    for (const auto& m : corpus()) {
        SimConfig cfg;
        cfg.t_end = 1.0;
        cfg.dt = 1e-4;
        const EnergyBalance b = energy_report(simulate(compile(m.build()), cfg));
        EXPECT_LT(std::fabs(b.residual) / std::max(b.supplied, 1e-12), 1e-6) << m.name << " residual " << b.residual;
    }
}

TEST(Simulate, ResidualShrinksWithStep) {
    for (const auto& m : corpus()) {
        const OdeSystem sys = compile(m.build());
        SimConfig cfg;
        cfg.t_end = 0.2;
        cfg.dt = 4e-4;
        const double coarse = std::fabs(energy_report(simulate(sys, cfg)).residual);
        cfg.dt = 2e-4;
        const double fine = std::fabs(energy_report(simulate(sys, cfg)).residual);
        // At least linear: halving dt at least halves the residual, unless
        // both are already at round-off level.
        EXPECT_TRUE(fine <= 0.5 * coarse || fine < 1e-10) << m.name << ": " << coarse << " -> " << fine;
    }
}

TEST(Simulate, ActivatedBondDoesNotChangeTrajectory) {
    for (const auto& m : corpus()) {
        const BondGraph g = m.build();
        SimConfig cfg;
        cfg.t_end = 0.05;
        cfg.dt = 1e-4;
        const Trajectory base = simulate(compile(g), cfg);
        const Trajectory tapped = simulate(compile(fixtures::with_effort_tap(g, g.elements()[1].id)), cfg);
        EXPECT_EQ(base.states, tapped.states);
        EXPECT_EQ(base.efforts, tapped.efforts.leftCols(base.efforts.cols()));
    }
}

TEST(Csv, HeaderAndFormat) {
    const OdeSystem sys = compile(filter_chopper());
    SimConfig cfg;
    cfg.t_end = 1e-3;
    cfg.dt = 1e-4;
    std::ostringstream out;
    write_csv(out, simulate(sys, cfg));
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("t,e.b1,f.b1,e.b2,f.b2", 0), 0u);
    EXPECT_NE(header.find(",P.load"), std::string::npos);
    std::string row;
    std::getline(in, row);
    EXPECT_EQ(row.rfind("0,", 0), 0u);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
    EXPECT_EQ(format_fixed17(0.1), "0.10000000000000001");
}

TEST(Csv, VectorBondsExpand) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Identity(2, 2);
    const OdeSystem sys = compile(fixtures::two_port_fixture(ElementKind::Transformer, false, K, K));
    SimConfig cfg;
    cfg.t_end = 0.0;
    std::ostringstream out;
    write_csv(out, simulate(sys, cfg));
    EXPECT_EQ(out.str().rfind("t,e.b1[0],e.b1[1],f.b1[0],f.b1[1],", 0), 0u) << out.str();
}

TEST(Csv, Deterministic) {
    const OdeSystem sys = compile(solenoid());
    SimConfig cfg;
    cfg.t_end = 0.01;
    std::ostringstream a, b;
    write_csv(a, simulate(sys, cfg));
    write_csv(b, simulate(sys, cfg));
    EXPECT_EQ(a.str(), b.str());
}
