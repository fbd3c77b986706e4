//! Smoke-level runs of every theorem check plus the suite runner contract.
//! The acceptance suite runs the full-size criteria; these keep n small.

mod support;

use isop_core::geometry::{Domain, Hyperplane, Point, RasterSet};
use isop_core::harness::{
    check_carleman, check_dubinin, check_eigen_brunn_minkowski, check_faber_krahn,
    check_polarization_exit, check_star_dominance, check_survival_isoperimetric,
    check_wiener_sausage, run_suite, summary_csv, CarlemanChannel, EigenBmParams, Status,
};
use isop_core::stochastic::SimConfig;

fn cfg(dt: f64, max_time: f64, seed: u64) -> SimConfig {
    SimConfig {
        dt,
        max_time,
        eps_shell: 1e-6,
        seed,
        slit_eps: 1e-3,
    }
}

#[test]
fn survival_equality_case_ball() {
    // D already a centered ball: margin stays near zero, never a violation
    let d = Domain::ball(2, Point::ZERO, 1.0);
    let v = check_survival_isoperimetric(&d, 0.3, 2.0, 20_000, &cfg(2e-4, 3.0, 41), 2).unwrap();
    assert_ne!(v.status, Status::Violation, "{v:?}");
    assert!(
        v.margin.abs() < 6.0 * v.sigma + 1e-3,
        "margin {} sigma {}",
        v.margin,
        v.sigma
    );
}

#[test]
fn survival_rectangle_vs_disk_detects_margin() {
    // 2:1 rectangle of area pi against the unit disk at t = 0.3, alpha = 2
    let a = (std::f64::consts::PI / 2.0).sqrt();
    let rect = Domain::rect(2, Point::ZERO, Point::xy(a, 2.0 * a));
    let v = check_survival_isoperimetric(&rect, 0.3, 2.0, 30_000, &cfg(1e-4, 3.0, 42), 2).unwrap();
    assert_eq!(v.status, Status::Consistent);
    assert!(v.z > 3.0, "z {}", v.z);
}

#[test]
fn survival_stable_alpha_15_consistent() {
    let a = (std::f64::consts::PI / 2.0).sqrt();
    let rect = Domain::rect(2, Point::ZERO, Point::xy(a, 2.0 * a));
    let v = check_survival_isoperimetric(&rect, 0.3, 1.5, 20_000, &cfg(1e-4, 3.0, 43), 2).unwrap();
    assert_ne!(v.status, Status::Violation, "{v:?}");
}

#[test]
fn polarization_exit_symmetric_domain_is_equality() {
    // D symmetric under the reflection: D^s = D, margins pure noise
    let disk = RasterSet::from_fn(2, Point::xy(-1.0, -1.0), 2.0 / 128.0, [128, 128, 1], |p| {
        p.norm() < 0.95
    })
    .unwrap();
    let a = RasterSet::from_fn(2, Point::xy(-1.0, -1.0), 2.0 / 128.0, [128, 128, 1], |p| {
        p.norm() < 0.3
    })
    .unwrap();
    let h = Hyperplane::axis(1, 0.0);
    let v = check_polarization_exit(
        &disk,
        &h,
        Point::xy(0.2, 0.3),
        &a,
        0.2,
        20_000,
        &cfg(5e-4, 1.0, 44),
        2,
    )
    .unwrap();
    assert_ne!(v.status, Status::Violation);
    assert!(
        v.margin.abs() <= 5.0 * v.sigma + 1e-3,
        "margin {} sigma {}",
        v.margin,
        v.sigma
    );
}

#[test]
fn polarization_exit_bite_instance_consistent() {
    let v =
        isop_core::harness::polarization_exit_default(128, 0.25, 30_000, &cfg(5e-4, 1.0, 45), 2)
            .unwrap();
    assert_ne!(v.status, Status::Violation, "{v:?}");
}

#[test]
fn faber_krahn_square_beats_disk() {
    let square = Domain::square(1.0);
    let v = check_faber_krahn(&square, 60_000, &[], &cfg(2e-4, 2.0, 46), 2).unwrap();
    // analytic margin ~ 0.787
    assert!(v.margin > 0.0, "{v:?}");
    assert!(v.z > 1.0, "z {}", v.z);
    assert_ne!(v.status, Status::Violation);
}

#[test]
fn dubinin_equal_angles_is_equality_case() {
    let v = check_dubinin(
        &[0.0, std::f64::consts::PI],
        0.3,
        30_000,
        &cfg(2e-4, 20.0, 47),
        2,
    )
    .unwrap();
    assert_ne!(v.status, Status::Violation);
    assert!(
        v.margin.abs() < 5.0 * v.sigma + 1e-3,
        "margin {} sigma {}",
        v.margin,
        v.sigma
    );
}

#[test]
fn dubinin_clustered_slits_lose_measure() {
    let v = check_dubinin(
        &[0.0, std::f64::consts::PI / 6.0],
        0.3,
        40_000,
        &cfg(2e-4, 20.0, 48),
        2,
    )
    .unwrap();
    assert_eq!(v.status, Status::Consistent);
    assert!(v.z > 2.0, "margin {} z {}", v.margin, v.z);
}

#[test]
fn carleman_strip_bound_holds_and_funnel_is_tighter() {
    let strip = CarlemanChannel::strip();
    let v = check_carleman(&strip, 2.5, 30_000, &cfg(5e-4, 60.0, 49), 2).unwrap();
    assert_ne!(v.status, Status::Violation, "{v:?}");
    assert!(v.margin > 0.0);

    let funnel = CarlemanChannel::funnel();
    let vf = check_carleman(&funnel, 1.5, 30_000, &cfg(5e-4, 60.0, 50), 2).unwrap();
    assert_ne!(vf.status, Status::Violation, "{vf:?}");
    // the funnel bound at the same b is tighter than the strip bound
    let (xs, ls) = funnel.profile(2.5, 2001);
    let bf = isop_core::estimators::carleman_bound(&xs, &ls, funnel.m_width, funnel.r0).unwrap();
    let (xs, ls) = strip.profile(2.5, 2001);
    let bs = isop_core::estimators::carleman_bound(&xs, &ls, strip.m_width, strip.r0).unwrap();
    assert!(bf < bs, "funnel {bf} strip {bs}");
}

#[test]
fn eigen_brunn_minkowski_balls() {
    let p = EigenBmParams {
        r1: 1.0,
        r2: 2.0,
        gap: 0.8,
        n: 50_000,
        t_grid: vec![],
    };
    let vs = check_eigen_brunn_minkowski(&p, &cfg(5e-4, 40.0, 51), 2).unwrap();
    assert_eq!(vs.len(), 3);
    for v in &vs {
        assert_ne!(v.status, Status::Violation, "{v:?}");
    }
    // concentric-like analytic sanity: lambda(avg ball of r=1.5 shifted)
    // must sit well below the mean of the two ball eigenvalues
    assert!(vs[0].margin > 0.0, "{:?}", vs[0]);
    assert!(vs[1].margin > 0.0, "{:?}", vs[1]);
}

#[test]
fn wiener_sausage_box_vs_matched_ball() {
    let v = check_wiener_sausage(
        Point::new(1.0, 0.5, 0.25),
        2.0,
        60,
        96,
        &cfg(1e-2, 4.0, 52),
        2,
    )
    .unwrap();
    assert_ne!(v.status, Status::Violation, "{v:?}");
    assert!(
        v.margin > -2.0 * v.sigma,
        "margin {} sigma {}",
        v.margin,
        v.sigma
    );
}

#[test]
fn star_dominance_slit_disk() {
    let vs = check_star_dominance(0.55, 32, 3_000, &cfg(1e-3, 20.0, 53), 2).unwrap();
    assert_eq!(vs.len(), 2);
    for v in &vs {
        assert_ne!(v.status, Status::Violation, "{v:?}");
    }
}

#[test]
fn suite_runner_round_trip() {
    let manifest = r#"[
      {"id": "bll-quick", "seed": 5, "check": "bll_discrete", "instances": 50, "max_m": 2},
      {"id": "fk-quick", "seed": 6, "check": "faber_krahn",
       "domain": {"kind": "rect", "dim": 2, "min": [0,0,0], "max": [1,1,0]},
       "n": 20000, "t_grid": [], "dt": 4e-4}
    ]"#;
    let verdicts = run_suite(manifest, 2).unwrap();
    assert!(verdicts.len() >= 2);
    assert!(verdicts.iter().all(|v| v.status != Status::Violation));
    let csv = summary_csv(&verdicts);
    assert!(csv.starts_with("theorem_id,"));
    assert_eq!(csv.lines().count(), verdicts.len() + 1);
    assert!(csv.contains("bll-quick/"));
    // JSON verdict serialization round-trips
    let js = serde_json::to_string(&verdicts[0]).unwrap();
    let back: isop_core::harness::Verdict = serde_json::from_str(&js).unwrap();
    assert_eq!(back.theorem_id, verdicts[0].theorem_id);
}

#[test]
fn paired_seeds_beat_independent_arms_on_margin_noise() {
    // the sausage check couples both shapes to the same paths; its
    // per-path-difference sigma must be far below the independent-arms
    // combination of the two sides
    let v = check_wiener_sausage(
        Point::new(1.0, 0.5, 0.25),
        2.0,
        40,
        80,
        &cfg(1e-2, 4.0, 54),
        2,
    )
    .unwrap();
    let paired_sigma = v.sigma;
    let independent_sigma = (v.lhs.stderr.powi(2) + v.rhs.stderr.powi(2)).sqrt();
    assert!(
        paired_sigma < 0.9 * independent_sigma,
        "paired {paired_sigma} vs independent {independent_sigma}"
    );
}
