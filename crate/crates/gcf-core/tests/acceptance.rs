//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per check (run with `--nocapture` to see them all). Trajectories are
//! shared across criteria through the suite cache.

use gcf_core::suite;

fn report(criterion: usize, title: &str, checks: Vec<suite::CheckOutcome>) {
    println!("== criterion {criterion:2}: {title}");
    let mut all_pass = true;
    for c in &checks {
        println!("   {}", c.describe());
        all_pass &= c.pass;
    }
    assert!(
        all_pass,
        "criterion {criterion} failed:\n{}",
        checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.describe())
            .collect::<Vec<_>>()
            .join("\n")
    );
}

#[test]
fn criterion_01_ball_extinction() {
    report(
        1,
        "ball extinction times match the radius ODE",
        suite::criterion_ball_extinction(),
    );
}

#[test]
fn criterion_02_linear_volume_decay() {
    report(
        2,
        "volume decays at exactly -|S^{n-1}| per unit time",
        suite::criterion_volume_decay(),
    );
}

#[test]
fn criterion_03_duality_identity() {
    report(
        3,
        "pointwise duality product stays at one",
        suite::criterion_duality_identity(),
    );
}

#[test]
fn criterion_04_primal_dual_commutation() {
    report(
        4,
        "polar of the primal trajectory matches the dual flow",
        suite::criterion_commutation(),
    );
}

#[test]
fn criterion_05_primal_radial_consistency() {
    report(
        5,
        "radial and primal flows produce the same bodies",
        suite::criterion_radial_consistency(),
    );
}

#[test]
fn criterion_06_polar_hessian_relation() {
    report(
        6,
        "polar support Hessian matches the radial second form",
        suite::criterion_polar_hessian(),
    );
}

#[test]
fn criterion_07_chi_sign_preservation() {
    report(
        7,
        "chi stays negative along dual runs",
        suite::criterion_chi_sign(),
    );
}

#[test]
fn criterion_08_lambda_formula_values() {
    report(
        8,
        "coefficient threshold formula evaluates exactly",
        suite::criterion_lambda_values(),
    );
}

#[test]
fn criterion_09_scaling_bands() {
    report(
        9,
        "extinction-scaled tracks stay banded",
        suite::criterion_scaling_bands(),
    );
}

#[test]
fn criterion_10_asymptotic_roundness() {
    report(
        10,
        "ellipse roundness at 0.9 T_hat",
        suite::criterion_roundness(),
    );
}

#[test]
fn criterion_11_static_geometry_oracles() {
    report(
        11,
        "static geometry oracles",
        suite::criterion_static_oracles(),
    );
}
