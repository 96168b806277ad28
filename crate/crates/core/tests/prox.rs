use dstat::prox::ProxFn;
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = ProxFn> {
    prop_oneof![
        Just(ProxFn::Zero),
        (0.0..5.0f64).prop_map(ProxFn::L1),
        (0.0..5.0f64).prop_map(ProxFn::NegLog),
        Just(ProxFn::NonNeg),
        (-3.0..0.0f64, 0.0..3.0f64).prop_map(|(lo, hi)| ProxFn::Box(lo, hi)),
    ]
}

/// Root of `−a/x + (x − y)/γ` on `(0, ∞)` by bisection.
fn neg_log_oracle(a: f64, y: f64, gamma: f64) -> f64 {
    let g = |x: f64| -a / x + (x - y) / gamma;
    let (mut lo, mut hi) = (1e-300, y.abs() + (a * gamma).sqrt() + 1.0);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn neg_log_matches_numeric_stationarity() {
    let x = ProxFn::NegLog(3.0).prox_scalar(1.0, 2.0);
    assert!((x - neg_log_oracle(3.0, 1.0, 2.0)).abs() < 1e-12);
    assert!((x - 3.0f64).abs() < 1e-15);
}

proptest! {
    #[test]
    fn neg_log_solves_its_optimality_condition(a in 0.01..10.0f64, y in -10.0..10.0f64, g in 0.01..5.0f64) {
        let x = ProxFn::NegLog(a).prox_scalar(y, g);
        let o = neg_log_oracle(a, y, g);
        prop_assert!((x - o).abs() <= 1e-9 * (1.0 + o.abs()));
    }

    #[test]
    fn prox_is_nonexpansive(f in kinds(), y1 in prop::collection::vec(-10.0..10.0f64, 6),
                            y2 in prop::collection::vec(-10.0..10.0f64, 6), g in 0.01..5.0f64) {
        let p1 = f.prox(&y1, g);
        let p2 = f.prox(&y2, g);
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&p1, &p2) <= d(&y1, &y2) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn moreau_identity_holds(f in kinds(), x in prop::collection::vec(-10.0..10.0f64, 6), g in 0.05..5.0f64) {
        let c = f.prox_conjugate(&x, g);
        let scaled: Vec<f64> = x.iter().map(|v| v / g).collect();
        let p = f.prox(&scaled, 1.0 / g);
        for i in 0..x.len() {
            let back = c[i] + g * p[i];
            prop_assert!((back - x[i]).abs() <= 1e-12 * (1.0 + x[i].abs()), "{f:?}: {back} vs {}", x[i]);
        }
    }

    #[test]
    fn nonneg_projection_is_clamp(y in prop::collection::vec(-10.0..10.0f64, 8), g in 0.01..5.0f64) {
        let p = ProxFn::NonNeg.prox(&y, g);
        for (a, b) in p.iter().zip(&y) {
            prop_assert_eq!(a.to_bits(), b.max(0.0).to_bits());
        }
    }

    #[test]
    fn prox_minimizes_the_model(f in kinds(), y in -5.0..5.0f64, g in 0.05..3.0f64, d in -1.0..1.0f64) {
        let x = f.prox_scalar(y, g);
        let model = |v: f64| f.value_scalar(v) + (v - y).powi(2) / (2.0 * g);
        prop_assert!(model(x) <= model(x + d) + 1e-9);
    }
}
