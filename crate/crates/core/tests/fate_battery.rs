//! Classification against integration on a battery of initial metrics.

use bachflow::analytics::{
    canonical_prediction, classify_fate, compare, curve_residuals, observe, stable_manifold_point, ClassifyOptions,
    Fate, S3Stratum,
};
use bachflow::integrator::{integrate, IntegratorOptions};
use bachflow::systems::make_system;
use bachflow::{DiagonalMetric4, ModelGeometry};
use ModelGeometry::*;

fn battery() -> Vec<(ModelGeometry, [f64; 4], f64)> {
    let long = 1e12;
    let collapse = 1e6;
    vec![
        (R3, [1.0, 2.0, 3.0, 4.0], 10.0),
        (H3, [0.5, 2.0, 2.0, 2.0], 10.0),
        (Nil, [1.0, 1.0, 1.0, 1.0], collapse),
        (Nil, [0.3, 2.0, 0.7, 5.0], collapse),
        (Solv, [1.0, 1.0, 2.0, 1.0], collapse),
        (Solv, [1.0, 1.0, 1.0, 1.0], collapse),
        (Solv, [2.0, 3.0, 0.5, 0.1], collapse),
        (E2, [1.0, 1.0, 2.0, 1.0], long),
        (E2, [0.4, 3.0, 0.2, 2.0], long),
        (E2, [1.0, 2.0, 2.0, 3.0], 10.0),
        (Sl2, [1.0, 1.0, 1.0, 1.0], collapse),
        (Sl2, [1.0, 0.5, 1.0, 3.0], collapse),
        (Sl2, [2.0, 3.0, 2.0, 0.5], collapse),
        (S3, [1.0, 1.0, 1.0, 1.0], 10.0),
        (S3, [1.0, 1.0, 1.0, 4.0], long),
        (S3, [2.0, 0.5, 0.5, 1.5], long),
        (S3, [1.0, 1.0, 2.0, 2.0], long),
        (S3, [0.5, 1.5, 3.0, 3.0], long),
        (S3, [1.0, 1.0, 4.0, 4.0], collapse),
        (S3, [1.0, 1.0, 9.0, 9.0], collapse),
        (S3, [3.0, 0.2, 1.5, 1.5], collapse),
        (S3, [1.0, 1.0, 1.2, 1.5], long),
        (S3, [1.0, 1.5, 1.2, 0.9], long),
        (S3, [1.0, 0.2, 2.0, 2.5], collapse),
        (S3, [0.5, 3.0, 0.3, 4.0], collapse),
        (Rxs2, [1.0, 1.0, 2.0, 2.0], collapse),
        (Rxh2, [1.0, 4.0, 2.0, 2.0], collapse),
        (R2xr2, [1.0, 2.0, 3.0, 4.0], 10.0),
        (R2xs2, [0.5, 2.0, 3.0, 3.0], collapse),
        (R2xh2, [2.0, 1.0, 1.0, 1.0], collapse),
        (S2xs2, [1.0, 1.0, 2.0, 2.0], long),
        (S2xs2, [2.0, 2.0, 2.0, 2.0], 10.0),
        (S2xh2, [3.0, 3.0, 0.5, 0.5], long),
        (H2xh2, [4.0, 4.0, 0.5, 0.5], long),
    ]
}

fn check(geom: ModelGeometry, g: [f64; 4], t_end: f64, side: Option<S3Stratum>) -> Fate {
    let h = DiagonalMetric4::new(g).unwrap();
    let sys = make_system(geom, &h).unwrap();
    let side = match side {
        Some(s) => Some(s),
        None => classify_fate(geom, &h, &ClassifyOptions::default()).unwrap().stratum,
    };
    let (fate, predicted) = canonical_prediction(&sys, side).unwrap();
    let traj = integrate(&sys, &h, &IntegratorOptions::until(t_end)).unwrap();
    let obs = observe(&sys, &traj, 1e-8).unwrap();
    let mismatches = compare(fate, &predicted, &obs, 1e-2);
    assert!(mismatches.is_empty(), "{geom} {g:?}: {mismatches:?}");
    assert!(traj.max_det_drift() <= 1e-9, "{geom} {g:?}: det drift {}", traj.max_det_drift());
    for (name, r) in curve_residuals(&sys, &traj).unwrap() {
        assert!(r <= 1e-6, "{geom} {g:?}: {name} residual {r}");
    }
    fate
}

#[test]
fn battery_matches_predictions() {
    let cases = battery();
    assert!(cases.len() >= 30);
    let mut seen = std::collections::BTreeSet::new();
    for (geom, g, t_end) in cases {
        seen.insert(format!("{:?}", check(geom, g, t_end, None)));
    }
    // Every fate except the D_S one is reached from the table above.
    assert_eq!(seen.len(), 6, "{seen:?}");
}

#[test]
fn s3_strata_are_all_covered() {
    let opts = ClassifyOptions::default();
    let mut seen = std::collections::BTreeSet::new();
    for (geom, g, _) in battery() {
        if geom == S3 {
            let r = classify_fate(geom, &DiagonalMetric4::new(g).unwrap(), &opts).unwrap();
            seen.insert(format!("{:?}", r.stratum.unwrap()));
        }
    }
    assert_eq!(seen.len(), 7, "{seen:?}");
}

#[test]
fn separatrix_runs_collapse_to_a_3_manifold() {
    for (det, cf, g00) in [(1.0, 1.2, 1.0), (1.0, 1.5, 0.5), (8.0, 1.3, 2.0)] {
        let c1 = (4.0f64 * det).cbrt();
        let c = cf * c1;
        let p = stable_manifold_point(det, c, 1e-13).unwrap();
        let k = f64::cbrt(g00);
        let g = [g00, det / (p.b * c) / k, p.b / k, c / k];
        assert_eq!(check(S3, g, 1e3, Some(S3Stratum::DS)), Fate::CollapseTo3Manifold);
    }
}
