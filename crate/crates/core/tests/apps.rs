use dstat::apps::{
    apg_steps, cox_gradient, cox_l1, cox_lipschitz, cox_log_likelihood, cox_objective, cox_synthetic, mc_pi,
    mc_pi_from, mds_fit, mds_points, nmf_apg, nmf_multiplicative, pairwise_distances, pet_default_steps,
    pet_mm_objective, pet_mm_ridge, pet_pdhg_tv, pet_pdhg_tv_dual, pet_spdhg_tv, pet_system, pet_toy, stress,
    CoxDataset, NmfState, PetProblem,
};
use dstat::distmat::{Csr, Mat};
use dstat::optim::{DistOperator, IterationTrace, LinearOperator, Sense, SolverConfig, MONOTONE_SLACK};
use dstat::{spawn_world, Communicator, DistMatrix, Error, Init, Partition, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solo<T: Send>(f: impl Fn(&Communicator) -> Result<T> + Sync) -> Result<T> {
    spawn_world(1, |c| f(&c)).map(|mut v| v.remove(0)).map_err(Error::into_root_cause)
}

fn assert_monotone(trace: &IterationTrace, sense: Sense) {
    let v = trace.monotone_violations(sense, MONOTONE_SLACK);
    assert!(v.is_empty(), "monotonicity broken at {v:?}");
}

fn assert_traces_agree(a: &IterationTrace, b: &IterationTrace, tol: f64) {
    let (fa, fb) = (a.objectives(), b.objectives());
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert!((x - y).abs() <= tol * x.abs().max(1.0), "{x} vs {y}");
    }
}

fn untimed(mut cfg: SolverConfig) -> SolverConfig {
    cfg.timing = false;
    cfg
}

fn dense_loss(x: &Mat<f64>, v: &Mat<f64>, w: &Mat<f64>) -> f64 {
    let vw = v.matmul(w).unwrap();
    x.as_slice().iter().zip(vw.as_slice()).map(|(a, b)| (a - b).powi(2)).sum()
}

// ---------------------------------------------------------------- NMF

#[test]
fn nmf_exact_factorization_is_a_fixed_point() {
    let u = Init::Uniform { lo: 0.5f64, hi: 1.5 };
    let v = dstat::distmat::seeded_matrix(8, 2, u, 1).unwrap();
    let w = dstat::distmat::seeded_matrix(2, 6, u, 2).unwrap();
    let x = v.matmul(&w).unwrap();
    let out = solo(|c| {
        let s = NmfState::new(
            c,
            DistMatrix::from_full(c, 0, Some(&x), 8, 6, Partition::ByRow)?,
            DistMatrix::from_full(c, 0, Some(&v), 8, 2, Partition::ByRow)?,
            DistMatrix::from_full(c, 0, Some(&w), 2, 6, Partition::ByCol)?,
            0.0,
        )?;
        let (m, t1) = nmf_multiplicative(c, s.clone(), &SolverConfig::every_iteration(20))?;
        let (a, t2) = nmf_apg(c, s, &SolverConfig::every_iteration(20))?;
        Ok::<(Mat<f64>, Mat<f64>, _, _), Error>((m.v.all_gather_full(c)?, a.w.all_gather_full(c)?, t1, t2))
    })
    .unwrap();
    for f in out.2.objectives().into_iter().chain(out.3.objectives()) {
        assert!(f < 1e-24, "objective {f}");
    }
    for (a, b) in out.0.as_slice().iter().zip(v.as_slice()) {
        assert!((a - b).abs() < 1e-12f64);
    }
    for (a, b) in out.1.as_slice().iter().zip(w.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn nmf_multiplicative_is_monotone_and_matches_dense_loss() {
    let (v, w, trace, x) = solo(|c| {
        let s = NmfState::<f64>::random(c, 20, 20, 3, 11)?;
        let x = s.x.all_gather_full(c)?;
        let (s, t) = nmf_multiplicative(c, s, &SolverConfig::every_iteration(500))?;
        Ok((s.v.all_gather_full(c)?, s.w.all_gather_full(c)?, t, x))
    })
    .unwrap();
    let f = trace.objectives();
    assert_eq!(f.len(), 501);
    assert_monotone(&trace, Sense::Minimize);
    assert!(f.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
    assert!(f[500] < 0.5 * f[0]);
    let direct = dense_loss(&x, &v, &w);
    assert!((direct - f[500]).abs() <= 1e-10 * direct);
    assert!(v.as_slice().iter().chain(w.as_slice()).all(|&e| e >= 0.0));
}

#[test]
fn nmf_zero_data_drives_factors_to_zero() {
    let trace = solo(|c| {
        let x = DistMatrix::<f64>::create(c, 6, 4, Partition::ByRow, Init::Zeros, 0)?;
        let v = DistMatrix::create(c, 6, 2, Partition::ByRow, Init::Uniform { lo: 0.0, hi: 1.0 }, 1)?;
        let w = DistMatrix::create(c, 2, 4, Partition::ByCol, Init::Uniform { lo: 0.0, hi: 1.0 }, 2)?;
        let (s, t) = nmf_multiplicative(c, NmfState::new(c, x, v, w, 0.0)?, &SolverConfig::every_iteration(5))?;
        assert!(s.v.norm_sq(c)? < 1e-30);
        Ok(t)
    })
    .unwrap();
    assert_monotone(&trace, Sense::Minimize);
    assert_eq!(trace.last_objective(), Some(0.0));
}

#[test]
fn nmf_rejects_negative_entries() {
    let r = solo(|c| {
        let x = DistMatrix::<f64>::create(c, 4, 4, Partition::ByRow, Init::Normal, 3)?;
        let v = DistMatrix::create(c, 4, 2, Partition::ByRow, Init::Ones, 0)?;
        let w = DistMatrix::create(c, 2, 4, Partition::ByCol, Init::Ones, 0)?;
        NmfState::new(c, x, v, w, 0.0)
    });
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn nmf_apg_catches_up_with_multiplicative() {
    let (fm, fa) = solo(|c| {
        let s = NmfState::<f64>::random(c, 20, 20, 3, 11)?;
        let cfg = SolverConfig::every_iteration(3000);
        let (_, tm) = nmf_multiplicative(c, s.clone(), &cfg)?;
        let (a, ta) = nmf_apg(c, s, &cfg)?;
        assert!(a.v.local_dense().as_slice().iter().all(|&e| e >= 0.0));
        Ok((tm.last_objective().unwrap(), ta.last_objective().unwrap()))
    })
    .unwrap();
    assert!((fa - fm).abs() <= 0.01 * fm, "apg {fa} vs multiplicative {fm}");
}

#[test]
fn apg_steps_satisfy_their_bound() {
    for eps in [0.0, 1e-3, 1.0] {
        let (sigma, tau, v, w) = solo(|c| {
            let s = NmfState::<f64>::random(c, 10, 8, 3, 4)?;
            let (sg, tu) = apg_steps(c, &s.v, &s.w, eps)?;
            Ok((sg, tu, s.v.all_gather_full(c)?, s.w.all_gather_full(c)?))
        })
        .unwrap();
        let frob = |g: Mat<f64>| {
            let n = g.rows();
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (g.get(i, j) + if i == j { eps } else { 0.0 }).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let wwt = frob(w.matmul(&w.transpose()).unwrap());
        let vtv = frob(v.transpose().matmul(&v).unwrap());
        assert!(sigma * 2.0 * wwt <= 1.0);
        assert!(tau * 2.0 * vtv <= 1.0);
        assert!(sigma * 2.0 * wwt > 1.0 - 1e-12);
    }
}

#[test]
fn nmf_world_size_does_not_change_traces() {
    let run = |world: usize| {
        spawn_world(world, |c| {
            let s = NmfState::<f64>::random(&c, 20, 20, 3, 5)?;
            let cfg = untimed(SolverConfig::every_iteration(100));
            let (_, t1) = nmf_multiplicative(&c, s.clone(), &cfg)?;
            let mut s = s;
            s.epsilon = 0.1;
            let (_, t2) = nmf_apg(&c, s, &cfg)?;
            Ok((t1, t2))
        })
        .unwrap()
        .remove(0)
    };
    let (a, b) = (run(1), run(4));
    assert_traces_agree(&a.0, &b.0, 1e-10);
    assert_traces_agree(&a.1, &b.1, 1e-10);
}

// ---------------------------------------------------------------- PET

/// Intersection length of `p → q` with each closed pixel, counted only
/// when the clipped piece's midpoint lies in the pixel's half-open square.
fn chord_lengths_by_clipping(p: (f64, f64), q: (f64, f64), g: usize) -> Vec<f64> {
    let mut out = vec![0.0; g * g];
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    for r in 0..g {
        for c in 0..g {
            let (x0, x1, y0, y1) = (c as f64, c as f64 + 1.0, r as f64, r as f64 + 1.0);
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            let mut empty = false;
            for (pk, qk) in [(-dx, p.0 - x0), (dx, x1 - p.0), (-dy, p.1 - y0), (dy, y1 - p.1)] {
                if pk == 0.0 {
                    empty |= qk < 0.0;
                } else if pk < 0.0 {
                    t0 = t0.max(qk / pk);
                } else {
                    t1 = t1.min(qk / pk);
                }
            }
            if empty || t1 <= t0 {
                continue;
            }
            let tm = 0.5 * (t0 + t1);
            let (mx, my) = (p.0 + tm * dx, p.1 + tm * dy);
            if mx >= x0 && mx < x1 && my >= y0 && my < y1 {
                out[r * g + c] = (t1 - t0) * dx.hypot(dy);
            }
        }
    }
    out
}

fn detector(g: usize, n_d: usize, k: usize) -> (f64, f64) {
    let a = 2.0 * std::f64::consts::PI * k as f64 / n_d as f64;
    let (c, r) = (g as f64 / 2.0, g as f64 / std::f64::consts::SQRT_2);
    (c + r * a.cos(), c + r * a.sin())
}

#[test]
fn difference_matrix_on_two_by_two_grid() {
    let (_, d) = pet_system::<f64>(2, 4).unwrap();
    assert_eq!((d.rows(), d.cols()), (4, 4));
    for i in 0..4 {
        let mut vals: Vec<f64> = d.row_entries(i).map(|(_, v)| v).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-1.0, 1.0]);
    }
    let pairs: Vec<Vec<usize>> = (0..4).map(|i| d.row_entries(i).map(|(j, _)| j).collect()).collect();
    assert_eq!(pairs, vec![vec![0, 1], vec![2, 3], vec![0, 2], vec![1, 3]]);
}

#[test]
fn system_columns_are_normalized() {
    for (g, n_d) in [(2, 4), (3, 8), (4, 12), (5, 7), (6, 16)] {
        let (e, _) = pet_system::<f64>(g, n_d).unwrap();
        assert_eq!(e.rows(), n_d * (n_d - 1) / 2);
        let mut sums = vec![0.0; g * g];
        for i in 0..e.rows() {
            for (j, v) in e.row_entries(i) {
                assert!(v >= 0.0);
                sums[j] += v;
            }
        }
        for s in sums {
            assert!((0.0..=1.0 + 1e-12).contains(&s), "g={g} n_d={n_d}: {s}");
        }
    }
    assert!(matches!(pet_system::<f64>(1, 8), Err(Error::Config(_))));
}

#[test]
fn system_matches_per_pixel_clipping() {
    for (g, n_d) in [(3, 8), (4, 10), (5, 13)] {
        let (e, _) = pet_system::<f64>(g, n_d).unwrap();
        let mut raw = vec![];
        for a in 0..n_d {
            for b in a + 1..n_d {
                raw.push(chord_lengths_by_clipping(detector(g, n_d, a), detector(g, n_d, b), g));
            }
        }
        let p = g * g;
        let totals: Vec<f64> = (0..p).map(|j| raw.iter().map(|r| r[j]).sum()).collect();
        for (i, row) in raw.iter().enumerate() {
            for j in 0..p {
                let want = if totals[j] > 0.0 { row[j] / totals[j] } else { 0.0 };
                assert!((e.get(i, j) - want).abs() < 1e-10, "g={g} chord {i} pixel {j}");
            }
        }
    }
}

#[test]
fn chord_missing_the_grid_gives_zero_row() {
    let (e, _) = pet_system::<f64>(3, 8).unwrap();
    // Detectors 0 and 1 sit at angle 0 and at the corner (3, 3).
    assert_eq!(e.row_entries(0).count(), 0);
    let raw = chord_lengths_by_clipping(detector(3, 8, 0), detector(3, 8, 1), 3);
    assert!(raw.iter().all(|&v| v == 0.0));
}

fn single_pixel() -> PetProblem<f64> {
    let e = Csr::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
    let d = Csr::from_triplets(0, 1, &[]).unwrap();
    PetProblem::new(e, d, vec![5.0], (1, 1)).unwrap()
}

fn two_pixels() -> PetProblem<f64> {
    let e = Csr::from_dense(&Mat::from_rows(&[vec![0.6, 0.2], vec![0.4, 0.8]]).unwrap());
    let d = Csr::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]).unwrap();
    PetProblem::new(e, d, vec![3.0, 5.0], (1, 2)).unwrap()
}

#[test]
fn pet_problem_invariants_are_checked() {
    let e = Csr::from_triplets(1, 1, &[(0, 0, 1.5)]).unwrap();
    let d = Csr::from_triplets(0, 1, &[]).unwrap();
    assert!(matches!(PetProblem::new(e, d.clone(), vec![1.0], (1, 1)), Err(Error::Contract(_))));
    let e = Csr::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
    assert!(matches!(PetProblem::new(e.clone(), d.clone(), vec![1.5], (1, 1)), Err(Error::Contract(_))));
    assert!(matches!(PetProblem::new(e, d, vec![1.0], (2, 2)), Err(Error::Shape(_))));
}

#[test]
fn poisson_ml_for_one_pixel_in_one_step() {
    let prob = single_pixel();
    let (lam, _) = solo(|c| pet_mm_ridge(c, &prob, 0.0, vec![1.0], &SolverConfig::every_iteration(1))).unwrap();
    assert_eq!(lam, vec![5.0]);
}

#[test]
fn mm_without_penalty_is_the_em_update() {
    let prob = two_pixels();
    let (lam, _) = solo(|c| pet_mm_ridge(c, &prob, 0.0, vec![1.0, 2.0], &SolverConfig::every_iteration(1))).unwrap();
    let l = [1.0, 2.0];
    let el = [0.6 * l[0] + 0.2 * l[1], 0.4 * l[0] + 0.8 * l[1]];
    let em = [
        l[0] * (0.6 * 3.0 / el[0] + 0.4 * 5.0 / el[1]),
        l[1] * (0.2 * 3.0 / el[0] + 0.8 * 5.0 / el[1]),
    ];
    for k in 0..2 {
        assert!((lam[k] - em[k]).abs() < 1e-14);
    }
}

#[test]
fn mm_and_pdhg_reach_the_ml_estimate() {
    // Eλ = y has the nonnegative solution (3.5, 4.5).
    let prob = two_pixels();
    let cfg = SolverConfig::every_iteration(20_000);
    let (mm, pd) = solo(|c| {
        let (mm, _) = pet_mm_ridge(c, &prob, 0.0, vec![1.0, 1.0], &cfg)?;
        let pd = pet_pdhg_tv(c, &prob, 0.0, &cfg)?;
        Ok((mm, pd.x))
    })
    .unwrap();
    for (k, want) in [3.5, 4.5].into_iter().enumerate() {
        assert!((mm[k] - want).abs() < 1e-6, "mm {mm:?}");
        assert!((pd[k] - want).abs() < 1e-6, "pdhg {pd:?}");
    }
    let one = single_pixel();
    let pd = solo(|c| pet_pdhg_tv(c, &one, 0.0, &cfg)).unwrap();
    assert!((pd.x[0] - 5.0).abs() < 1e-6);
}

#[test]
fn ridge_mm_ascends_on_four_by_four() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let run = |world: usize| {
        spawn_world(world, |c| {
            let n = prob.local_pixels(c.world_size())?;
            let (lam, t) = pet_mm_ridge(&c, &prob, 0.05, vec![1.0; n], &untimed(SolverConfig::every_iteration(600)))?;
            assert!(lam.iter().all(|&v| v >= 0.0));
            let f = pet_mm_objective(&c, &prob, 0.05, &lam)?;
            Ok((t, f))
        })
        .unwrap()
        .remove(0)
    };
    let (t1, f1) = run(1);
    assert_monotone(&t1, Sense::Maximize);
    let f = t1.objectives();
    assert!(f[600] > f[0]);
    assert_eq!(f1, f[600]);
    let (t4, _) = run(4);
    assert_traces_agree(&t1, &t4, 1e-10);
}

#[test]
fn pdhg_extrapolation_identity() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    solo(|c| {
        for n in [1, 2, 7, 30] {
            let prev = pet_pdhg_tv(c, &prob, 0.01, &SolverConfig::every_iteration(n))?;
            let next = pet_pdhg_tv(c, &prob, 0.01, &SolverConfig::every_iteration(n + 1))?;
            for ((b, p), x) in next.extrapolated.iter().zip(&prev.x).zip(&next.x) {
                assert!((b + p - 2.0 * x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
            }
        }
        Ok(())
    })
    .unwrap();
}

fn total_variation(prob: &PetProblem<f64>, lam: &[f64]) -> f64 {
    (0..prob.d.rows())
        .map(|i| prob.d.row_entries(i).map(|(j, v)| v * lam[j]).sum::<f64>().abs())
        .sum()
}

#[test]
fn large_tv_penalty_gives_flat_image() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let r = solo(|c| pet_pdhg_tv(c, &prob, 50.0, &SolverConfig::every_iteration(20_000))).unwrap();
    let (lo, hi) = r.x.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo < 1e-6, "spread {}", hi - lo);
    assert!(lo > 0.0);
}

#[test]
fn tv_shrinks_as_penalty_grows() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let cfg = SolverConfig::every_iteration(20_000);
    let tv: Vec<f64> = [0.0, 0.3, 1.0, 3.0]
        .iter()
        .map(|&rho| {
            let r = solo(|c| pet_pdhg_tv(c, &prob, rho, &cfg)).unwrap();
            total_variation(&prob, &r.x)
        })
        .collect();
    assert!(tv.windows(2).all(|w| w[0] >= w[1] - 1e-6), "{tv:?}");
    assert!(tv[0] > tv[3]);
}

#[test]
fn stochastic_pet_with_certain_updates_is_the_dual_form() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let cfg = untimed(SolverConfig::every_iteration(200));
    let (a, b) = solo(|c| Ok((pet_pdhg_tv_dual(c, &prob, 1e-3, &cfg)?, pet_spdhg_tv(c, &prob, 1e-3, 1.0, &cfg)?))).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn stochastic_pet_reaches_the_deterministic_objective() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let cfg = SolverConfig::every_iteration(30_000);
    let (det, sto) = solo(|c| Ok((pet_pdhg_tv_dual(c, &prob, 1e-3, &cfg)?, pet_spdhg_tv(c, &prob, 1e-3, 0.2, &cfg)?))).unwrap();
    let (fd, fs) = (det.trace.last_objective().unwrap(), sto.trace.last_objective().unwrap());
    assert!((fd - fs).abs() <= 1e-3 * fd.abs(), "{fd} vs {fs}");
}

#[test]
fn no_counts_drive_intensities_to_zero() {
    let mut prob = pet_toy(4, 12, 20.0, 3).unwrap();
    prob.y.iter_mut().for_each(|v| *v = 0.0);
    let r = solo(|c| pet_spdhg_tv(c, &prob, 1e-3, 0.5, &SolverConfig::every_iteration(2000))).unwrap();
    assert!(r.x.iter().all(|&v| v.abs() < 1e-8), "{:?}", r.x);
}

#[test]
fn pet_step_violation_is_rejected() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let cfg = SolverConfig {
        sigma: Some(2.0),
        tau: Some(2.0),
        ..SolverConfig::every_iteration(5)
    };
    assert!(matches!(solo(|c| pet_pdhg_tv(c, &prob, 0.1, &cfg)), Err(Error::Config(_))));
    assert!(matches!(solo(|c| pet_spdhg_tv(c, &prob, 0.1, 0.0, &SolverConfig::default())), Err(Error::Config(_))));
    assert_eq!(pet_default_steps(2.0), (1.0 / 3.0, 1.0 / 3.0));
    let (s, t) = pet_default_steps(4.0);
    assert!(s * t * 16.0 < 1.0);
}

#[test]
fn pet_operators_are_adjoint() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    for m in [&prob.e, &prob.d] {
        let y: Vec<f64> = (0..m.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = spawn_world(4, |c| {
            let k = DistMatrix::from_full(&c, 0, Some(&m.to_dense()), m.rows(), 16, Partition::ByCol)?.to_sparse();
            let op = DistOperator::new(&c, k);
            let xs = &x[c.rank() * 4..c.rank() * 4 + 4];
            let kx = op.forward(xs)?;
            let kty = op.adjoint(&y)?;
            let lhs: f64 = kx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs = c.all_reduce_scalar(kty.iter().zip(xs).map(|(a, b)| a * b).sum())?;
            Ok((lhs, rhs))
        })
        .unwrap();
        for (l, r) in out {
            assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));
        }
    }
}

#[test]
fn pet_traces_do_not_depend_on_world_size() {
    let prob = pet_toy(4, 12, 20.0, 3).unwrap();
    let cfg = untimed(SolverConfig::every_iteration(300));
    let run = |world: usize| {
        spawn_world(world, |c| Ok((pet_pdhg_tv(&c, &prob, 0.1, &cfg)?.trace, pet_spdhg_tv(&c, &prob, 0.1, 0.3, &cfg)?.trace)))
            .unwrap()
            .remove(0)
    };
    let (a, b) = (run(1), run(4));
    assert_traces_agree(&a.0, &b.0, 1e-10);
    assert_traces_agree(&a.1, &b.1, 1e-10);
    assert!(matches!(
        spawn_world(3, |c| pet_pdhg_tv(&c, &prob, 0.1, &cfg)),
        Err(Error::RankFailed { .. }) | Err(Error::Partition(_))
    ));
}

// ---------------------------------------------------------------- MDS

fn dense_distances(x: &Mat<f64>) -> Mat<f64> {
    let n = x.rows();
    Mat::from_fn(n, n, |i, j| x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

fn stress_oracle(y: &Mat<f64>, theta: &Mat<f64>) -> f64 {
    let d = dense_distances(theta);
    let n = y.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += (y.get(i, j) - d.get(i, j)).powi(2);
            }
        }
    }
    s
}

#[test]
fn pairwise_distance_examples() {
    let pts = Mat::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
    let d = solo(|c| pairwise_distances(c, &DistMatrix::from_full(c, 0, Some(&pts), 2, 2, Partition::ByRow)?)?.all_gather_full(c))
        .unwrap();
    assert_eq!(d.as_slice(), &[0.0, 5.0, 5.0, 0.0]);

    let same = Mat::filled(4, 3, 1.7);
    let d = spawn_world(2, |c| pairwise_distances(&c, &DistMatrix::from_full(&c, 0, Some(&same), 4, 3, Partition::ByRow)?)?.all_gather_full(&c))
        .unwrap();
    assert!(d[0].as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn pairwise_distances_are_world_size_invariant() {
    let x = dstat::distmat::seeded_matrix::<f64>(8, 3, Init::Normal, 9).unwrap();
    let oracle = dense_distances(&x);
    for world in [1, 2, 4] {
        let d = spawn_world(world, |c| pairwise_distances(&c, &DistMatrix::from_full(&c, 0, Some(&x), 8, 3, Partition::ByRow)?)?.all_gather_full(&c))
            .unwrap()
            .remove(0);
        for i in 0..8 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..8 {
                assert_eq!(d.get(i, j), d.get(j, i));
                assert!((d.get(i, j) - oracle.get(i, j)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn consistent_pair_is_a_fixed_point() {
    let theta = Mat::from_rows(&[vec![0.3, -1.1], vec![2.0, 0.7]]).unwrap();
    let out = solo(|c| {
        let t0 = DistMatrix::from_full(c, 0, Some(&theta), 2, 2, Partition::ByRow)?;
        let yd = pairwise_distances(c, &t0)?;
        let (t, _) = mds_fit(c, &yd, t0, &SolverConfig::every_iteration(1))?;
        t.all_gather_full(c)
    })
    .unwrap();
    assert_eq!(out, theta);
}

#[test]
fn exact_embedding_is_recovered() {
    let (s, trace) = solo(|c| {
        let pts = mds_points(c, 10, 2, 21)?;
        let y = pairwise_distances(c, &pts)?;
        let t0 = DistMatrix::create(c, 10, 2, Partition::ByRow, Init::Normal, 22)?;
        let cfg = SolverConfig {
            tol: 0.0,
            ..SolverConfig::every_iteration(10_000)
        };
        let (t, trace) = mds_fit(c, &y, t0, &cfg)?;
        Ok((stress(c, &y, &t)?, trace))
    })
    .unwrap();
    assert!(s < 1e-8, "stress {s}");
    assert_monotone(&trace, Sense::Minimize);
}

fn random_dissimilarities(q: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Mat::zeros(q, q);
    for i in 0..q {
        for j in i + 1..q {
            let v = rng.random_range(0.5..2.0);
            y.set(i, j, v);
            y.set(j, i, v);
        }
    }
    y
}

#[test]
fn stress_descends_on_random_dissimilarities() {
    let y = random_dissimilarities(30, 8);
    let (trace, theta) = solo(|c| {
        let yd = DistMatrix::from_full(c, 0, Some(&y), 30, 30, Partition::ByRow)?;
        let t0 = DistMatrix::create(c, 30, 2, Partition::ByRow, Init::Normal, 3)?;
        let (t, trace) = mds_fit(c, &yd, t0, &SolverConfig::every_iteration(600))?;
        Ok((trace, t.all_gather_full(c)?))
    })
    .unwrap();
    assert_monotone(&trace, Sense::Minimize);
    let f = trace.objectives();
    assert!(f[600] < f[0]);
    assert!((stress_oracle(&y, &theta) - f[600]).abs() <= 1e-10 * f[600]);
}

#[test]
fn coincident_points_do_not_break_the_update() {
    let y = random_dissimilarities(4, 1);
    let theta = Mat::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let (t, trace) = solo(|c| {
        let yd = DistMatrix::from_full(c, 0, Some(&y), 4, 4, Partition::ByRow)?;
        let t0 = DistMatrix::from_full(c, 0, Some(&theta), 4, 2, Partition::ByRow)?;
        let (t, trace) = mds_fit(c, &yd, t0, &SolverConfig::every_iteration(50))?;
        Ok((t.all_gather_full(c)?, trace))
    })
    .unwrap();
    assert!(t.as_slice().iter().all(|v| v.is_finite()));
    assert_monotone(&trace, Sense::Minimize);
}

#[test]
fn mds_traces_do_not_depend_on_world_size() {
    let y = random_dissimilarities(32, 4);
    let run = |world: usize| {
        spawn_world(world, |c| {
            let yd = DistMatrix::from_full(&c, 0, Some(&y), 32, 32, Partition::ByRow)?;
            let t0 = DistMatrix::create(&c, 32, 3, Partition::ByRow, Init::Normal, 6)?;
            Ok(mds_fit(&c, &yd, t0, &untimed(SolverConfig::every_iteration(200)))?.1)
        })
        .unwrap()
        .remove(0)
    };
    assert_traces_agree(&run(1), &run(4), 1e-10);
}

// ---------------------------------------------------------------- Cox

fn cox_toy(c: &Communicator) -> Result<CoxDataset<f64>> {
    let x = Mat::from_rows(&[vec![1.0], vec![3.0]])?;
    CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 2, 1, Partition::ByCol)?, vec![2.0, 1.0], vec![1.0, 1.0], 0.0)
}

/// `Σᵢ δᵢ [xᵢᵀβ − log Σ_{j: yⱼ ≥ yᵢ} exp(xⱼᵀβ)]` by direct double loop.
fn loglik_oracle(x: &Mat<f64>, y: &[f64], delta: &[f64], beta: &[f64]) -> f64 {
    let eta: Vec<f64> = (0..x.rows()).map(|i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let mut l = 0.0;
    for i in 0..x.rows() {
        if delta[i] == 0.0 {
            continue;
        }
        let risk: f64 = (0..x.rows()).filter(|&j| y[j] >= y[i]).map(|j| eta[j].exp()).sum();
        l += eta[i] - risk.ln();
    }
    l
}

fn sorted_synthetic(m: usize, p: usize, seed: u64) -> (Mat<f64>, Vec<f64>, Vec<f64>) {
    let (x, y, d) = cox_synthetic(m, p, seed).unwrap();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    (
        Mat::from_fn(m, p, |i, j| x.get(order[i], j)),
        order.iter().map(|&i| y[i]).collect(),
        order.iter().map(|&i| d[i]).collect(),
    )
}

#[test]
fn cox_toy_gradient_at_zero() {
    let (g, l) = solo(|c| {
        let data = cox_toy(c)?;
        Ok((cox_gradient(c, &data, &[0.0])?, cox_log_likelihood(c, &data, &[0.0])?))
    })
    .unwrap();
    assert!((g[0] - 1.0).abs() < 1e-15);
    assert!((l + 2f64.ln()).abs() < 1e-15);
    let h = 1e-6;
    let fd = solo(|c| {
        let data = cox_toy(c)?;
        Ok((cox_log_likelihood(c, &data, &[h])? - cox_log_likelihood(c, &data, &[-h])?) / (2.0 * h))
    })
    .unwrap();
    assert!((fd - 1.0).abs() < 1e-8);
}

#[test]
fn cox_objective_at_zero_counts_risk_sets() {
    let (x, y, d) = sorted_synthetic(12, 4, 3);
    let f = solo(|c| {
        let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 12, 4, Partition::ByCol)?, y.clone(), d.clone(), 0.7)?;
        cox_objective(c, &data, &[0.0; 4])
    })
    .unwrap();
    let want: f64 = d.iter().enumerate().map(|(i, di)| di * ((i + 1) as f64).ln()).sum();
    assert!((f - want).abs() < 1e-12);

    let single = solo(|c| {
        let x = Mat::from_rows(&[vec![2.0]])?;
        let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 1, 1, Partition::ByCol)?, vec![1.0], vec![1.0], 0.0)?;
        cox_log_likelihood(c, &data, &[0.0])
    })
    .unwrap();
    assert_eq!(single, 0.0);
}

#[test]
fn cumulative_sums_match_double_loop() {
    let (x, y, d) = sorted_synthetic(40, 8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let beta: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = spawn_world(4, |c| {
            let data = CoxDataset::new(DistMatrix::from_full(&c, 0, Some(&x), 40, 8, Partition::ByCol)?, y.clone(), d.clone(), 0.0)?;
            cox_log_likelihood(&c, &data, &beta[c.rank() * 2..c.rank() * 2 + 2])
        })
        .unwrap();
        let want = loglik_oracle(&x, &y, &d, &beta);
        for g in got {
            assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0), "{g} vs {want}");
        }
    }
}

#[test]
fn cox_gradient_matches_finite_differences() {
    let (x, y, d) = sorted_synthetic(50, 20, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let beta: Vec<f64> = (0..20).map(|_| rng.random_range(-0.3..0.3)).collect();
        let grad = solo(|c| {
            let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 50, 20, Partition::ByCol)?, y.clone(), d.clone(), 1e-3)?;
            cox_gradient(c, &data, &beta)
        })
        .unwrap();
        let h = 1e-5;
        for k in 0..20 {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (loglik_oracle(&x, &y, &d, &up) - loglik_oracle(&x, &y, &d, &dn)) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * grad[k].abs().max(1.0), "{fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn strong_penalty_keeps_beta_at_zero() {
    let (x, y, d) = sorted_synthetic(30, 6, 2);
    let (beta, g0) = solo(|c| {
        let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 30, 6, Partition::ByCol)?, y.clone(), d.clone(), 0.0)?;
        let g0 = cox_gradient(c, &data, &[0.0; 6])?;
        let lam = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let data = CoxDataset { lambda: lam, ..data };
        Ok((cox_l1(c, &data, vec![0.0; 6], &SolverConfig::every_iteration(50))?.0, g0))
    })
    .unwrap();
    assert!(beta.iter().all(|&b| b == 0.0));
    assert!(g0.iter().any(|&v| v != 0.0));
}

#[test]
fn unpenalized_covariates_escape_the_threshold() {
    let (x, y, d) = sorted_synthetic(60, 6, 8);
    let beta = solo(|c| {
        let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 60, 6, Partition::ByCol)?, y.clone(), d.clone(), 1e6)?
            .with_unpenalized(vec![0]);
        Ok(cox_l1(c, &data, vec![0.0; 6], &SolverConfig::every_iteration(200))?.0)
    })
    .unwrap();
    assert!(beta[0] != 0.0);
    assert!(beta[1..].iter().all(|&b| b == 0.0));
}

#[test]
fn cox_descends_and_is_world_size_invariant() {
    let (x, y, d) = cox_synthetic(50, 20, 13).unwrap();
    let run = |world: usize| {
        spawn_world(world, |c| {
            let data = CoxDataset::from_unsorted(&c, c.is_root().then_some(&x), 50, 20, &y, &d, 1e-3)?;
            let n = data.x.local_shape().1;
            Ok(cox_l1(&c, &data, vec![0.0; n], &untimed(SolverConfig::every_iteration(600)))?.1)
        })
        .unwrap()
        .remove(0)
    };
    let t1 = run(1);
    assert_monotone(&t1, Sense::Minimize);
    let f = t1.objectives();
    assert!(f[600] < f[0]);
    assert_traces_agree(&t1, &run(4), 1e-10);
}

#[test]
fn cox_lipschitz_matches_svd() {
    let (x, y, d) = sorted_synthetic(50, 20, 13);
    let l = solo(|c| {
        let data = CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 50, 20, Partition::ByCol)?, y.clone(), d.clone(), 0.0)?;
        cox_lipschitz(c, &data)
    })
    .unwrap();
    let s = DMatrix::from_row_slice(50, 20, x.as_slice()).singular_values().max();
    assert!((l - 2.0 * s * s).abs() <= 1e-6 * l);
}

#[test]
fn tied_or_unsorted_times_are_rejected() {
    let x = Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let r = solo(|c| CoxDataset::from_unsorted(c, Some(&x), 3, 1, &[1.0, 2.0, 1.0], &[1.0, 1.0, 0.0], 0.0));
    assert!(matches!(r, Err(Error::Contract(_))));
    let r = solo(|c| CoxDataset::new(DistMatrix::from_full(c, 0, Some(&x), 3, 1, Partition::ByCol)?, vec![1.0, 2.0, 3.0], vec![1.0; 3], 0.0));
    assert!(matches!(r, Err(Error::Contract(_))));
    let sorted = solo(|c| CoxDataset::from_unsorted(c, Some(&x), 3, 1, &[1.0, 3.0, 2.0], &[1.0, 0.0, 1.0], 0.0)).unwrap();
    assert_eq!(sorted.y, vec![3.0, 2.0, 1.0]);
    assert_eq!(sorted.delta, vec![0.0, 1.0, 1.0]);
    assert_eq!(sorted.x.local_dense().as_slice(), &[2.0, 3.0, 1.0]);
}

// ---------------------------------------------------------------- Monte Carlo π

#[test]
fn forced_points_give_extreme_estimates() {
    let inside = solo(|c| mc_pi_from(c, &[0.0; 10], &[0.0; 10])).unwrap();
    assert_eq!(inside, 4.0);
    let outside = solo(|c| mc_pi_from(c, &[1.0; 10], &[1.0; 10])).unwrap();
    assert_eq!(outside, 0.0);
    let boundary = solo(|c| mc_pi_from(c, &[1.0, 0.0], &[0.0, 1.0])).unwrap();
    assert_eq!(boundary, 0.0);
    assert!(matches!(solo(|c| mc_pi(c, 0, 1)), Err(Error::Config(_))));
}

#[test]
fn estimate_is_shared_and_close_to_pi() {
    let bound = 3.0 * (std::f64::consts::PI * (4.0 - std::f64::consts::PI) / 20_000.0).sqrt();
    let est = spawn_world(2, |c| mc_pi(&c, 10_000, 1000)).unwrap();
    assert_eq!(est[0], est[1]);
    assert!((est[0] - std::f64::consts::PI).abs() <= bound, "{}", est[0]);
}
