#pragma once

// Builders for the three reference systems: a hoist lifting a load, a
// gapped-core solenoid actuator, and a DC filter feeding a mean-value chopper.
// Default values are plausible SI magnitudes, not measured data.

#include "bondflow/graph.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bondflow {

/// Storage parameters follow the element relations: I takes an inertia or
/// mass, C takes a compliance (1 / stiffness), R a damping coefficient.
struct LiftParams {
    double J_M = 0.01;    // motor inertia [kg m^2]
    double J_D = 0.5;     // drum inertia [kg m^2]
    double K_FM = 0.05;   // motor friction [N m s]
    double K_FG = 0.05;   // gear/drum friction [N m s]
    double K_DS = 2.0;    // shaft damping [N m s]
    double K_SS = 1e-3;   // shaft compliance [rad / N m]
    double K_DR = 1e3;    // rope damping [N s / m]
    double K_SR = 1e-5;   // rope compliance [m / N]
    double i_G = 10.0;    // gear ratio, motor speed / drum speed
    double r_DR = 0.2;    // drum radius [m]
    double m_L = 100.0;   // load mass [kg]
    double F_g = 981.0;   // gravity force on the load [N]
    double T_M = 29.43;   // motor torque [N m]
    /// Rigid variant: no shaft or rope elasticity. Inertias given as 0 are
    /// left out, so a caller can merge them into J_M beforehand.
    bool rigid = false;

    /// Torque that holds the load at rest: F_g r_DR / i_G.
    double hang_torque() const { return F_g * r_DR / i_G; }
    void check() const;
};

struct SolenoidParams {
    double n = 400.0;        // coil turns
    double R = 4.0;          // coil resistance [ohm]
    double m = 0.5;          // armature mass [kg]
    double K_fric = 20.0;    // armature friction [N s / m]
    double A = 4e-4;         // limb cross section [m^2]
    double l_m = 0.2;        // iron path length [m]
    double mu_0 = 1.25663706212e-6;
    double mu_r = 2000.0;
    double x_0 = 0.01;       // initial air gap [m]
    double F_g = 4.905;      // gravity on the armature, opening the gap [N]
    double u = 12.0;         // supply voltage [V]

    void check() const;
};

struct FilterChopperParams {
    double C_F = 1e-3;   // [F]
    double L_F = 1e-2;   // [H]
    double R_f = 0.1;    // [ohm]
    double u_in = 48.0;  // supply [V]
    Expr m_ch = Expr::literal(0.5);  // duty ratio, mean-value model
    Expr i_out = Expr::literal(2.0); // load current [A]

    void check() const;
};

BondGraph lift_a_load(const LiftParams& p = {});
BondGraph solenoid(const SolenoidParams& p = {});
BondGraph filter_chopper(const FilterChopperParams& p = {});

struct CorpusModel {
    std::string name;  // also the corpus file stem
    std::string description;
    std::function<BondGraph()> build;
};

const std::vector<CorpusModel>& corpus();
std::optional<BondGraph> corpus_model(std::string_view name);

}  // namespace bondflow
