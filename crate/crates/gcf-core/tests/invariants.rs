//! Cross-module invariants: flow monotonicity, truncated-run extrapolation,
//! and property tests over randomly perturbed balls.

use std::f64::consts::PI;

use gcf_core::*;
use proptest::prelude::*;

fn ellipse(grid: &std::sync::Arc<SphereGrid>) -> SupportField {
    build_support(
        grid,
        &BodySpec::Ellipsoid {
            semi_axes: vec![2.0, 1.0],
            center: None,
        },
    )
    .unwrap()
}

#[test]
fn primal_support_decreases_pointwise() {
    let mut config = FlowConfig::new(
        2,
        FlowKind::Primal,
        BodySpec::Ellipsoid {
            semi_axes: vec![2.0, 1.0],
            center: None,
        },
        vec![128],
    );
    config.t_end = Some(0.3);
    let traj = run_flow_from_config(&config).unwrap();
    for pair in traj.snapshots.windows(2) {
        for (later, earlier) in pair[1].support.values().iter().zip(pair[0].support.values()) {
            assert!(later <= &(earlier + 1e-12));
        }
    }
    // volume strictly decreasing
    for pair in traj.records.windows(2) {
        assert!(pair[1].volume < pair[0].volume);
    }
}

#[test]
fn dual_support_increases_pointwise() {
    let mut config = FlowConfig::new(
        2,
        FlowKind::Dual,
        BodySpec::Ellipsoid {
            semi_axes: vec![2.0, 1.0],
            center: None,
        },
        vec![128],
    );
    config.t_end = Some(0.3);
    let traj = run_flow_from_config(&config).unwrap();
    for pair in traj.snapshots.windows(2) {
        for (later, earlier) in pair[1].support.values().iter().zip(pair[0].support.values()) {
            assert!(later >= earlier);
        }
    }
}

#[test]
fn truncated_disc_run_extrapolates_to_the_same_extinction() {
    let mut config = FlowConfig::new(
        2,
        FlowKind::Primal,
        BodySpec::Ball { radius: 1.0 },
        vec![128],
    );
    config.t_end = Some(0.1);
    let traj = run_flow_from_config(&config).unwrap();
    assert_eq!(traj.termination, Termination::TimeLimit);
    let ext = traj.extinction.unwrap();
    assert!((ext.t_hat - 0.5).abs() < 0.005, "T_hat {}", ext.t_hat);
}

#[test]
fn zero_time_run_keeps_only_the_initial_snapshot() {
    let mut config = FlowConfig::new(
        2,
        FlowKind::Primal,
        BodySpec::Ball { radius: 1.0 },
        vec![64],
    );
    config.t_end = Some(0.0);
    let traj = run_flow_from_config(&config).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.termination, Termination::TimeLimit);
}

#[test]
fn convexity_loss_is_flagged_not_hidden() {
    // A saddle-heavy perturbation stays convex initially but the grid is too
    // coarse to carry it far; the run must end flagged rather than panic.
    let mut config = FlowConfig::new(
        2,
        FlowKind::Primal,
        BodySpec::PerturbedBall {
            modes: vec![(8, 0.014)],
        },
        vec![16],
    );
    config.cfl_factor = 1.0;
    let traj = run_flow_from_config(&config).unwrap();
    match traj.termination {
        Termination::StopRule | Termination::ConvexityLost { .. } => {}
        other => panic!("unexpected termination {other:?}"),
    }
}

#[test]
fn dual_runs_report_growing_minimum() {
    let mut config = FlowConfig::new(
        2,
        FlowKind::Dual,
        BodySpec::Ball { radius: 1.0 },
        vec![64],
    );
    config.t_end = Some(0.2);
    let traj = run_flow_from_config(&config).unwrap();
    let mins: Vec<f64> = traj.records.iter().map(|r| r.min_s).collect();
    for pair in mins.windows(2) {
        assert!(pair[1] > pair[0]);
    }
}

#[test]
fn cross_flow_agreement_on_the_ellipse() {
    // primal, radial and dual runs integrated to the same time agree
    let grid = make_grid(2, &[256]).unwrap();
    let body = ellipse(&grid);
    let mut primal = FlowConfig::new(
        2,
        FlowKind::Primal,
        support_to_spec(&body),
        vec![256],
    );
    primal.t_end = Some(0.1);
    let mut radial = primal.clone();
    radial.flow = FlowKind::Radial;
    let mut dual = primal.clone();
    dual.flow = FlowKind::Dual;

    let tp = run_flow_from_config(&primal).unwrap();
    let tr = run_flow_from_config(&radial).unwrap();
    let td = run_flow_from_config(&dual).unwrap();

    let p = &tp.snapshots.last().unwrap().support;
    let r = &tr.snapshots.last().unwrap().support;
    let d = &td.snapshots.last().unwrap().support;

    let sup = |a: &SupportField, b: &SupportField| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    assert!(sup(p, r) < 2e-3, "primal-radial {}", sup(p, r));
    let polar_p = polar(p).unwrap();
    assert!(sup(&polar_p, d) < 2e-3, "primal-dual {}", sup(&polar_p, d));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Polar is an involution on gently perturbed balls.
    #[test]
    fn polar_involution(a3 in -0.06f64..0.06, a4 in -0.03f64..0.03) {
        let grid = make_grid(2, &[128]).unwrap();
        let body = build_support(
            &grid,
            &BodySpec::PerturbedBall { modes: vec![(3, a3), (4, a4)] },
        )
        .unwrap();
        let back = polar(&polar(&body).unwrap()).unwrap();
        let worst = body
            .values()
            .iter()
            .zip(back.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        prop_assert!(worst < 1e-4, "involution error {}", worst);
    }

    /// Translation leaves curvature unchanged to stencil accuracy.
    #[test]
    fn sigma_translation_invariance(vx in -0.3f64..0.3, vy in -0.3f64..0.3) {
        let grid = make_grid(2, &[256]).unwrap();
        let body = build_support(
            &grid,
            &BodySpec::PerturbedBall { modes: vec![(3, 0.05)] },
        )
        .unwrap();
        let shifted = translate(&body, [vx, vy, 0.0]).unwrap();
        let s0 = sigma_from_support(&body).unwrap();
        let s1 = sigma_from_support(&shifted).unwrap();
        for (a, b) in s0.values().iter().zip(s1.values()) {
            prop_assert!((a - b).abs() < 1e-8, "sigma moved by {}", (a - b).abs());
        }
    }

    /// Scaling the body scales volume by c^n and sigma by c^{n-1}.
    #[test]
    fn scaling_laws(c in 0.5f64..2.0) {
        let grid = make_grid(2, &[128]).unwrap();
        let body = build_support(
            &grid,
            &BodySpec::PerturbedBall { modes: vec![(2, 0.05), (5, 0.01)] },
        )
        .unwrap();
        let scaled = body.scaled(c).unwrap();
        let v0 = volume(&body).unwrap();
        let v1 = volume(&scaled).unwrap();
        prop_assert!((v1 - c * c * v0).abs() < 1e-9 * v0.max(1.0));
        let s0 = sigma_from_support(&body).unwrap();
        let s1 = sigma_from_support(&scaled).unwrap();
        for (a, b) in s0.values().iter().zip(s1.values()) {
            prop_assert!((b - c * a).abs() < 1e-10 * c.max(1.0));
        }
    }

    /// gamma lies in (0, 1]; 1 is attained only with vanishing gradient.
    #[test]
    fn gamma_range(a2 in -0.1f64..0.1, a3 in -0.05f64..0.05) {
        let grid = make_grid(2, &[128]).unwrap();
        let body = build_support(
            &grid,
            &BodySpec::PerturbedBall { modes: vec![(2, a2), (3, a3)] },
        )
        .unwrap();
        let g = gamma_of(&body).unwrap();
        prop_assert!(g > 0.0 && g <= 1.0 + 1e-15);
        if a2.abs() > 1e-3 || a3.abs() > 1e-3 {
            prop_assert!(g < 1.0);
        }
    }

    /// Wherever chi is negative, the curvature bound |x|^{n-1} < lambda/K holds.
    #[test]
    fn chi_negative_implies_bound(lambda in 0.5f64..50.0) {
        let grid = make_grid(2, &[128]).unwrap();
        let body = build_support(
            &grid,
            &BodySpec::PerturbedBall { modes: vec![(3, 0.08)] },
        )
        .unwrap();
        let p = polar(&body).unwrap();
        let (chi, _) = chi_field(&p, lambda).unwrap();
        let f = p.as_scalar_field();
        let grad = p.grid().differentiate(&f).unwrap();
        let sigma = sigma_from_support(&p).unwrap();
        for i in 0..p.grid().node_count() {
            if chi.values()[i] < 0.0 {
                let s = p.values()[i];
                let w = (s * s + grad.norm_sq(i)).sqrt();
                prop_assert!(w < lambda * sigma.values()[i] + 1e-12);
            }
        }
    }
}

#[test]
fn quadrature_weight_sums() {
    let g2 = make_grid(2, &[256]).unwrap();
    let one = ScalarField::constant(g2.clone(), 1.0);
    assert!((g2.integrate(&one).unwrap() - 2.0 * PI).abs() < 1e-12);
    let g3 = make_grid(3, &[32, 64]).unwrap();
    let one = ScalarField::constant(g3.clone(), 1.0);
    assert!((g3.integrate(&one).unwrap() - 4.0 * PI).abs() < 1e-10);
}
