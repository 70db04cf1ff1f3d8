//! Modified Bessel values frozen from a 40-digit evaluation, on both sides
//! of the switch between the ascending series and the large-argument expansion.

#![allow(clippy::excessive_precision)]

use hypokernel::special::{bessel_i_scaled, gamma, ln_bessel_i_reduced, ln_gamma};

/// (ν, x, e^{−x}I_ν(x), ln(x^{−ν}I_ν(x)))
const TABLE: [(f64, f64, f64, f64); 40] = [
    (-0.9, 0.1, 1.4450829631448099189, -1.6041598498373179362),
    (-0.9, 1.0, 0.27388714060634976992, -0.29503915304362295374),
    (-0.9, 5.0, 0.16750428065407682958, 4.6617477492908639982),
    (-0.9, 20.0, 0.087933738897839334016, 20.264987331002568491),
    (-0.9, 29.9, 0.072266551178565686317, 30.330678736188365993),
    (-0.9, 30.1, 0.072030701243723924833, 30.533409809890824847),
    (-0.9, 50.0, 0.056100694897645943875, 50.640213625122437041),
    (-0.9, 100.0, 0.039782118368621751729, 100.92031541251723384),
    (-0.5, 0.1, 2.2944493559446366647, -0.2207996638230809021),
    (-0.5, 1.0, 0.45293324691462072989, 0.20798947783829975466),
    (-0.5, 5.0, 0.17842051152623320057, 4.0811068656945441229),
    (-0.5, 20.0, 0.089206205807638556106, 19.081061466795327262),
    (-0.5, 29.9, 0.072958260640694848388, 28.981061466795327258),
    (-0.5, 30.1, 0.072715470414516993654, 29.181061466795327258),
    (-0.5, 50.0, 0.056418958354775628695, 49.081061466795327258),
    (-0.5, 100.0, 0.039894228040143267794, 99.081061466795327258),
    (0.0, 0.1, 0.90710092578230109644, 0.0024984392338762433813),
    (0.0, 1.0, 0.4657596075936404365, 0.23591435850717864869),
    (0.0, 5.0, 0.18354081260932835307, 3.3046817758225334338),
    (0.0, 20.0, 0.089780311884826021596, 17.589610428244274291),
    (0.0, 29.9, 0.073269219046001905951, 27.286385310555095717),
    (0.0, 30.1, 0.073023294131060943593, 27.483023208951181836),
    (0.0, 50.0, 0.05656162664745419253, 47.127575501871804584),
    (0.0, 100.0, 0.039944379299096682648, 96.779732689942583717),
    (0.5, 0.1, 0.22868316607552338351, -0.22412524118114697185),
    (0.5, 1.0, 0.34495131388824462599, -0.064351991073531798753),
    (0.5, 5.0, 0.17840431170432102234, 2.4715781534008563944),
    (0.5, 20.0, 0.089206205807638555348, 16.085329193241336261),
    (0.5, 29.9, 0.072958260640694848388, 25.583202986398686515),
    (0.5, 30.1, 0.072715470414516993654, 25.776536295040497214),
    (0.5, 50.0, 0.056418958354775628695, 45.1690384613671812),
    (0.5, 100.0, 0.039894228040143267794, 94.47589128080723589),
    (2.0, 0.1, 0.0011319896061145962936, -2.0786082951327733001),
    (2.0, 1.0, 0.049938776894223538763, -1.9969574859357673329),
    (2.0, 5.0, 0.1179519058315114103, -0.35635414016609504995),
    (2.0, 20.0, 0.08102968966649715506, 11.495595800515834452),
    (2.0, 29.9, 0.068450933098719712898, 20.422644943695487121),
    (2.0, 30.1, 0.068252539689133080813, 20.606409022443328422),
    (2.0, 50.0, 0.054321901691738376544, 39.263126201851830008),
    (2.0, 100.0, 0.039149496238594077594, 87.549291903926844368),
];

#[test]
fn scaled_bessel_matches_reference() {
    for &(nu, x, scaled, _) in &TABLE {
        let v = bessel_i_scaled(nu, x).unwrap();
        let err = (v - scaled).abs() / scaled;
        assert!(err < 1e-12, "nu={nu} x={x}: {v} vs {scaled} ({err:e})");
    }
}

#[test]
fn reduced_log_bessel_matches_reference() {
    for &(nu, x, _, reduced) in &TABLE {
        let v = ln_bessel_i_reduced(nu, x).unwrap();
        let err = (v - reduced).abs() / reduced.abs().max(1.0);
        assert!(err < 1e-13, "nu={nu} x={x}: {v} vs {reduced} ({err:e})");
    }
}

#[test]
fn reduced_log_bessel_at_origin() {
    for nu in [-0.9, -0.5, 0.0, 0.5, 2.0] {
        let expected = -nu * std::f64::consts::LN_2 - ln_gamma(nu + 1.0);
        assert!((ln_bessel_i_reduced(nu, 0.0).unwrap() - expected).abs() < 1e-14);
    }
}

#[test]
fn gamma_reflection() {
    // Γ(x)Γ(1−x) = π/sin(πx)
    for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let lhs = gamma(x) * gamma(1.0 - x);
        let rhs = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
        assert!((lhs - rhs).abs() / rhs < 1e-13);
    }
}
