use dstat::distmat::Mat;
use dstat::optim::{
    admm, batch_gradient, check_steps, consensus_admm, minibatch_sgd, mm_drive, parallel_prox_linear_cd, pdhg,
    pdhg_dual, power_iteration, proximal_gradient, stochastic_pdhg, DenseOperator, DistOperator, FnObjective,
    GradTerm, Identity, LeastSquares, LinearOperator, Objective, ProxTerm, Quadratic, Sampling, Sense, SolverConfig,
    SquaredLoss, Stacked,
};
use dstat::prox::ProxFn;
use dstat::{spawn_world, DistMatrix, Error, Partition};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn to_na(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn difference_matrix(n: usize) -> Mat<f64> {
    Mat::from_fn(n - 1, n, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

fn tv_objective(x: &[f64], b: &[f64], lambda: f64) -> f64 {
    let fit: f64 = x.iter().zip(b).map(|(u, v)| 0.5 * (u - v).powi(2)).sum();
    let tv: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fit + lambda * tv
}

/// Minimizer of `½‖x − b‖² + λ Σ|x_{i+1} − x_i|` on a chain, found by
/// enumerating every segmentation into constant runs and every sign of the
/// jumps between runs. Each candidate satisfies the stationarity condition
/// of its own pattern, so the optimum is among them.
fn tv_oracle(b: &[f64], lambda: f64) -> Vec<f64> {
    let n = b.len();
    let mut best = (f64::INFINITY, vec![]);
    for cuts in 0u32..(1 << (n - 1)) {
        let mut runs = vec![];
        let mut start = 0;
        for i in 0..n - 1 {
            if cuts & (1 << i) != 0 {
                runs.push(start..i + 1);
                start = i + 1;
            }
        }
        runs.push(start..n);
        let k = runs.len();
        for signs in 0u32..(1 << (k - 1)) {
            let s = |j: usize| -> f64 {
                if j == 0 || j == k {
                    0.0
                } else if signs & (1 << (j - 1)) != 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut x = vec![0.0; n];
            for (j, r) in runs.iter().enumerate() {
                let len = r.len() as f64;
                let mean = b[r.clone()].iter().sum::<f64>() / len;
                let c = mean - lambda * (s(j) - s(j + 1)) / len;
                x[r.clone()].iter_mut().for_each(|v| *v = c);
            }
            let f = tv_objective(&x, b, lambda);
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    best.1
}

/// Cyclic coordinate descent for `½‖Ax − b‖² + λ‖x‖₁` with exact
/// coordinate minimization.
fn lasso_cd_oracle(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Vec<f64> {
    let p = a.ncols();
    let mut x = DVector::zeros(p);
    let mut r = b - a * &x;
    for _ in 0..20_000 {
        let mut moved = 0.0f64;
        for j in 0..p {
            let col = a.column(j);
            let nj = col.norm_squared();
            let rho = col.dot(&r) + nj * x[j];
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / nj;
            let d = new - x[j];
            if d != 0.0 {
                r -= col * d;
                x[j] = new;
                moved = moved.max(d.abs());
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    x.iter().copied().collect()
}

fn lasso_problem() -> (Mat<f64>, Vec<f64>, f64) {
    (random_mat(12, 5, 11), random_vec(12, 12), 0.3)
}

fn converge(max_iters: usize) -> SolverConfig {
    SolverConfig {
        max_iters,
        tol: 0.0,
        timing: false,
        ..SolverConfig::default()
    }
}

#[test]
fn power_iteration_on_diagonal_and_identity() {
    let d = DenseOperator::new(Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap());
    assert!((power_iteration(&d, 1e-8, 10_000).unwrap() - 3.0).abs() < 3e-8);
    let i = DenseOperator::new(Mat::<f64>::identity(5));
    assert!((power_iteration(&i, 1e-8, 10_000).unwrap() - 1.0).abs() < 1e-8);
    assert!((power_iteration::<f64, _>(&Identity(5), 1e-8, 10).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn power_iteration_matches_svd() {
    for seed in 0..5 {
        let a = random_mat(6, 4, seed);
        let want = to_na(&a).singular_values().max();
        let got = power_iteration(&DenseOperator::new(a), 1e-8, 100_000).unwrap();
        assert!((got - want).abs() / want < 1e-6, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn power_iteration_rejects_zero_and_reports_stalls() {
    let z = DenseOperator::new(Mat::<f64>::zeros(3, 3));
    assert!(matches!(power_iteration(&z, 1e-8, 100), Err(Error::Contract(_))));
    let close = DenseOperator::new(Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.999]]).unwrap());
    assert!(matches!(power_iteration(&close, 1e-12, 3), Err(Error::Numerical(_))));
}

#[test]
fn distributed_operators_agree_with_dense() {
    let a = random_mat(8, 6, 3);
    let want = power_iteration(&DenseOperator::new(a.clone()), 1e-10, 100_000).unwrap();
    let x = random_vec(6, 4);
    let y = random_vec(8, 5);
    let dense = DenseOperator::new(a.clone());
    let kx = dense.forward(&x).unwrap();
    let kty = dense.adjoint(&y).unwrap();
    for world in [1, 2] {
        for part in [Partition::ByRow, Partition::ByCol, Partition::Replicated] {
            let out = spawn_world(world, |c| {
                let k = DistMatrix::from_full(&c, 0, Some(&a), 8, 6, part)?;
                let op = DistOperator::new(&c, k);
                let xs = slice(&x, op.primal_local_len(), &op.primal_layout());
                let ys = slice(&y, op.dual_local_len(), &op.dual_layout());
                let fwd = c.all_gather(&op.forward(&xs)?)?;
                let adj = c.all_gather(&op.adjoint(&ys)?)?;
                let norm = power_iteration(&op, 1e-10, 100_000)?;
                Ok((fwd, adj, norm, op.dual_layout().dot(&op.forward(&xs)?, &ys)?, op.primal_layout().dot(&xs, &op.adjoint(&ys)?)?))
            })
            .unwrap();
            for (rank, (fwd, adj, norm, lhs, rhs)) in out.into_iter().enumerate() {
                let fwd = gathered(fwd, world, part != Partition::ByRow);
                let adj = gathered(adj, world, part != Partition::ByCol);
                assert!(max_abs_diff(&fwd, &kx) < 1e-12, "{part:?} world {world} rank {rank}");
                assert!(max_abs_diff(&adj, &kty) < 1e-12, "{part:?} world {world} rank {rank}");
                assert!((norm - want).abs() / want < 1e-8);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}

fn slice(v: &[f64], n: usize, layout: &dstat::optim::Layout<'_>) -> Vec<f64> {
    let off = layout.offset(n);
    v[off..off + n].to_vec()
}

/// Local pieces were all-gathered; replicated results appear once per rank.
fn gathered(v: Vec<f64>, world: usize, replicated: bool) -> Vec<f64> {
    if replicated {
        v[..v.len() / world].to_vec()
    } else {
        v
    }
}

#[test]
fn adjoint_identity_holds_for_dense_and_stacked() {
    let a = DenseOperator::new(random_mat(4, 5, 7));
    let d = DenseOperator::new(difference_matrix(5));
    let k = Stacked::new(&a, &d);
    assert_eq!(LinearOperator::<f64>::shape(&k), (8, 5));
    for seed in 0..10 {
        let x = random_vec(5, 100 + seed);
        let y = random_vec(8, 200 + seed);
        let lhs: f64 = k.forward(&x).unwrap().iter().zip(&y).map(|(u, v)| u * v).sum();
        let rhs: f64 = x.iter().zip(k.adjoint(&y).unwrap()).map(|(u, v)| u * v).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
    assert!(matches!(a.forward(&[1.0; 3]), Err(Error::Shape(_))));
}

#[test]
fn least_squares_gradient_matches_finite_differences() {
    let f = LeastSquares::new(random_mat(7, 4, 21), random_vec(7, 22)).unwrap();
    let x = random_vec(4, 23);
    let g = f.gradient(&x).unwrap();
    let h = 1e-6;
    for j in 0..4 {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[j] += h;
        dn[j] -= h;
        let fd = (f.value(&up).unwrap() - f.value(&dn).unwrap()) / (2.0 * h);
        assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0));
    }
}

#[test]
fn proximal_gradient_matches_lasso_oracle() {
    let (a, b, lambda) = lasso_problem();
    let want = lasso_cd_oracle(&to_na(&a), &DVector::from_vec(b.clone()), lambda);
    let f = LeastSquares::new(a, b).unwrap();
    let (x, trace) = proximal_gradient(&f, &ProxFn::L1(lambda), vec![0.0; 5], &converge(20_000)).unwrap();
    assert!(max_abs_diff(&x, &want) < 1e-6);
    assert!(trace.violations.is_empty());
    assert!(trace.monotone_violations(Sense::Minimize, 1e-10).is_empty());
}

#[test]
fn proximal_gradient_configuration_errors() {
    let q = Quadratic { center: vec![1.0, 2.0] };
    let cfg = SolverConfig {
        gamma: Some(2.5),
        ..converge(10)
    };
    assert!(matches!(proximal_gradient(&q, &ProxFn::Zero, vec![0.0; 2], &cfg), Err(Error::Config(_))));
    let no_grad = FnObjective::new(|x: &[f64]| Ok(x[0] * x[0])).with_lipschitz(2.0);
    assert!(matches!(
        proximal_gradient(&no_grad, &ProxFn::Zero, vec![1.0], &converge(10)),
        Err(Error::Contract(_))
    ));
    let (x, _) = proximal_gradient(&q, &ProxFn::Zero, vec![0.0; 2], &converge(1)).unwrap();
    assert_eq!(x, vec![1.0, 2.0]);
}

#[test]
fn stopping_rule_ends_runs_early() {
    let (a, b, lambda) = lasso_problem();
    let f = LeastSquares::new(a, b).unwrap();
    let cfg = SolverConfig {
        timing: false,
        ..SolverConfig::default()
    };
    let (_, trace) = proximal_gradient(&f, &ProxFn::L1(lambda), vec![0.0; 5], &cfg).unwrap();
    assert!(trace.converged);
    assert!(trace.last_iter() < cfg.max_iters);
    assert!(trace.records.iter().all(|r| r.iter % 100 == 0));
    let obj = trace.objectives();
    let n = obj.len();
    assert!((obj[n - 1] - obj[n - 2]).abs() / (obj[n - 1].abs() + 1.0) < 1e-5);
}

#[test]
fn pdhg_gradient_variant_reaches_center() {
    let c = vec![0.5, -1.0, 2.0];
    let g = GradTerm(Quadratic { center: c.clone() });
    let r = pdhg(&Identity(3), &ProxFn::Zero, &g, vec![0.0; 3], vec![0.0; 3], &converge(2000)).unwrap();
    assert!(max_abs_diff(&r.x, &c) < 1e-10);
}

#[test]
fn pdhg_solves_chain_tv_denoising() {
    let b = vec![1.0, 1.3, -0.2, 0.1, 2.0];
    let lambda = 0.4;
    let want = tv_oracle(&b, lambda);
    let d = DenseOperator::new(difference_matrix(5));
    let g = GradTerm(Quadratic { center: b.clone() });
    let f = ProxFn::L1(lambda);
    let r = pdhg(&d, &f, &g, vec![0.0; 5], vec![0.0; 4], &converge(20_000)).unwrap();
    assert!(max_abs_diff(&r.x, &want) < 1e-4, "{:?} vs {want:?}", r.x);
    let last = r.trace.residuals.last().unwrap();
    assert!(last.primal < 1e-8 && last.dual < 1e-8);

    let rd = pdhg_dual(&d, &f, &g, vec![0.0; 5], vec![0.0; 4], &converge(20_000)).unwrap();
    assert!(max_abs_diff(&rd.x, &r.x) < 1e-6);
    let obj = tv_objective(&r.x, &b, lambda);
    assert!((r.trace.last_objective().unwrap() - obj).abs() < 1e-12);
}

#[test]
fn pdhg_matches_hand_unrolled_step() {
    let k = Mat::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
    let (sigma, tau) = (0.3, 0.25);
    let x0 = vec![0.7, -0.4];
    let y0 = vec![0.9, -0.2];
    let cfg = SolverConfig {
        sigma: Some(sigma),
        tau: Some(tau),
        ..converge(1)
    };
    let r = pdhg(
        &DenseOperator::new(k),
        &ProxFn::L1(1.0),
        &ProxTerm(ProxFn::NonNeg),
        x0.clone(),
        y0.clone(),
        &cfg,
    )
    .unwrap();
    let kx = [x0[0] + 2.0 * x0[1], -x0[0] + 0.5 * x0[1]];
    let y1: Vec<f64> = (0..2).map(|i| (y0[i] + sigma * kx[i]).clamp(-1.0, 1.0)).collect();
    let kty = [y1[0] - y1[1], 2.0 * y1[0] + 0.5 * y1[1]];
    let x1: Vec<f64> = (0..2).map(|j| (x0[j] - tau * kty[j]).max(0.0)).collect();
    assert!(max_abs_diff(&r.y, &y1) < 1e-15);
    assert!(max_abs_diff(&r.x, &x1) < 1e-15);
}

#[test]
fn step_condition_is_enforced() {
    assert!(check_steps(0.5, 0.5, 1.9).is_ok());
    assert!(matches!(check_steps(0.5, 0.5, 2.0), Err(Error::Config(_))));
    let cfg = SolverConfig {
        sigma: Some(1.0),
        tau: Some(1.0),
        ..converge(5)
    };
    let d = DenseOperator::new(difference_matrix(5));
    let g = ProxTerm(ProxFn::Zero);
    assert!(matches!(
        pdhg(&d, &ProxFn::L1(1.0), &g, vec![0.0; 5], vec![0.0; 4], &cfg),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        pdhg(&d, &ProxFn::L1(1.0), &g, vec![0.0; 4], vec![0.0; 4], &converge(5)),
        Err(Error::Shape(_))
    ));
}

#[test]
fn stochastic_pdhg_at_full_probability_is_the_dual_form() {
    let b = vec![1.0, 1.3, -0.2, 0.1, 2.0];
    let d = DenseOperator::new(difference_matrix(5));
    let g = GradTerm(Quadratic { center: b });
    let f = ProxFn::L1(0.4);
    let cfg = SolverConfig {
        eval_every: 7,
        ..converge(200)
    };
    let det = pdhg_dual(&d, &f, &g, vec![0.0; 5], vec![0.0; 4], &cfg).unwrap();
    let sto = stochastic_pdhg(&d, &f, &g, vec![0.0; 5], vec![0.0; 4], 1.0, 1..3, &cfg).unwrap();
    assert_eq!(det.x, sto.x);
    assert_eq!(det.y, sto.y);
    assert_eq!(det.trace.records, sto.trace.records);
}

#[test]
fn stochastic_pdhg_half_probability() {
    let d = DenseOperator::new(difference_matrix(5));
    let zero = GradTerm(Quadratic { center: vec![0.0; 5] });
    let r = stochastic_pdhg(&d, &ProxFn::L1(0.4), &zero, vec![0.0; 5], vec![0.0; 4], 0.5, 0..4, &converge(50)).unwrap();
    assert!(r.x.iter().chain(&r.y).all(|&v| v == 0.0));

    let b = vec![1.0, 1.3, -0.2, 0.1, 2.0];
    let want = tv_oracle(&b, 0.4);
    let g = GradTerm(Quadratic { center: b.clone() });
    let norm = power_iteration(&d, 1e-10, 10_000).unwrap();
    let cfg = SolverConfig {
        sigma: Some(0.6 / norm),
        tau: Some(0.6 / norm),
        seed: 9,
        ..converge(40_000)
    };
    let r = stochastic_pdhg(&d, &ProxFn::L1(0.4), &g, vec![0.0; 5], vec![0.0; 4], 0.5, 0..4, &cfg).unwrap();
    assert!(max_abs_diff(&r.x, &want) < 1e-4);

    for bad in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(matches!(
            stochastic_pdhg(&d, &ProxFn::L1(0.4), &g, vec![0.0; 5], vec![0.0; 4], bad, 0..4, &cfg),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn distributed_pdhg_matches_single_worker() {
    let b = vec![1.0, 1.3, -0.2, 0.1, 2.0, 0.4, -0.6, 0.9, 1.1];
    let dm = difference_matrix(9);
    let cfg = SolverConfig {
        eval_every: 10,
        ..converge(300)
    };
    let g = GradTerm(Quadratic { center: b.clone() });
    let single = pdhg(&DenseOperator::new(dm.clone()), &ProxFn::L1(0.3), &g, vec![0.0; 9], vec![0.0; 8], &cfg).unwrap();
    let out = spawn_world(2, |c| {
        let k = DistMatrix::from_full(&c, 0, Some(&dm), 8, 9, Partition::ByRow)?;
        let op = DistOperator::new(&c, k);
        let n = op.dual_local_len();
        let r = pdhg(&op, &ProxFn::L1(0.3), &g, vec![0.0; 9], vec![0.0; n], &cfg)?;
        Ok((r.x, r.trace.objectives()))
    })
    .unwrap();
    for (x, obj) in out {
        assert!(max_abs_diff(&x, &single.x) < 1e-10);
        for (u, v) in obj.iter().zip(single.trace.objectives()) {
            assert!((u - v).abs() / (v.abs() + 1.0) < 1e-10);
        }
    }
}

/// `argmin ½‖Ax − b‖² + t/2 ‖x − v‖²`.
fn ridge_step(a: &DMatrix<f64>, b: &DVector<f64>, t: f64, v: &[f64]) -> Vec<f64> {
    let p = a.ncols();
    let lhs = a.transpose() * a + DMatrix::identity(p, p) * t;
    let rhs = a.transpose() * b + DVector::from_column_slice(v) * t;
    lhs.cholesky().unwrap().solve(&rhs).iter().copied().collect()
}

#[test]
fn admm_lasso_matches_proximal_gradient() {
    let (a, b, lambda) = lasso_problem();
    let ls = LeastSquares::new(a.clone(), b.clone()).unwrap();
    let (want, _) = proximal_gradient(&ls, &ProxFn::L1(lambda), vec![0.0; 5], &converge(50_000)).unwrap();
    let (an, bn) = (to_na(&a), DVector::from_vec(b));
    for t in [0.5, 1.0, 2.0] {
        let objective = |x: &[f64]| Ok(ls.value(x)? + ProxFn::L1(lambda).value(x));
        let r = admm(
            &Identity(5),
            &ProxFn::L1(lambda),
            |v, _| Ok(ridge_step(&an, &bn, t, v)),
            objective,
            vec![0.0; 5],
            t,
            &converge(5000),
        )
        .unwrap();
        assert!(max_abs_diff(&r.x, &want) < 1e-6, "t = {t}");
        assert!(max_abs_diff(&r.x_tilde, &want) < 1e-6);
    }
}

#[test]
fn admm_with_zero_f_stays_at_the_minimizer_of_g() {
    let (a, b, _) = lasso_problem();
    let (an, bn) = (to_na(&a), DVector::from_vec(b));
    let x_star: Vec<f64> = (an.transpose() * &an)
        .cholesky()
        .unwrap()
        .solve(&(an.transpose() * &bn))
        .iter()
        .copied()
        .collect();
    let r = admm(
        &Identity(5),
        &ProxFn::Zero,
        |v, _| Ok(ridge_step(&an, &bn, 1.0, v)),
        |_| Ok(0.0),
        x_star.clone(),
        1.0,
        &converge(50),
    )
    .unwrap();
    assert!(max_abs_diff(&r.x, &x_star) < 1e-12);
    assert!(matches!(
        admm(&Identity(5), &ProxFn::Zero, |v, _| Ok(v.to_vec()), |_| Ok(0.0), x_star, 0.0, &converge(1)),
        Err(Error::Config(_))
    ));
}

#[test]
fn consensus_admm_with_identical_terms_keeps_workers_in_step() {
    let (a, b, lambda) = lasso_problem();
    let (an, bn) = (to_na(&a), DVector::from_vec(b.clone()));
    let ls = LeastSquares::new(a, b).unwrap();
    let out = spawn_world(3, |c| {
        let mut history = vec![];
        let t = 1.0;
        let r = consensus_admm(
            &c,
            &Identity(5),
            &ProxFn::L1(lambda),
            |v1, v2, _| {
                let v: Vec<f64> = v1.iter().zip(v2).map(|(p, q)| 0.5 * (p + q)).collect();
                let x = ridge_step(&an, &bn, 2.0 * t, &v);
                history.extend_from_slice(&x);
                Ok(x)
            },
            |x| Ok(3.0 * ls.value(x)? + ProxFn::L1(lambda).value(x)),
            vec![0.0; 5],
            t,
            &converge(200),
        )?;
        Ok((history, r.x))
    })
    .unwrap();
    for (h, x) in &out[1..] {
        assert_eq!(h, &out[0].0);
        assert_eq!(x, &out[0].1);
    }
}

#[test]
fn consensus_admm_ridge_on_four_workers() {
    let m = 16;
    let a = random_mat(m, 4, 31);
    let b = random_vec(m, 32);
    let mu = 0.5;
    let (an, bn) = (to_na(&a), DVector::from_vec(b.clone()));
    let want: Vec<f64> = (an.transpose() * &an + DMatrix::identity(4, 4) * mu)
        .cholesky()
        .unwrap()
        .solve(&(an.transpose() * &bn))
        .iter()
        .copied()
        .collect();
    let out = spawn_world(4, |c| {
        let rows = c.rank() * 4..c.rank() * 4 + 4;
        let ak = to_na(&a.row_block(rows.start, rows.end));
        let bk = DVector::from_column_slice(&b[rows]);
        let d = c.world_size() as f64;
        let t = 1.0;
        let r = consensus_admm(
            &c,
            &Identity(4),
            &ProxFn::Zero,
            |v1, v2, _| {
                let lhs = ak.transpose() * &ak + DMatrix::identity(4, 4) * (mu / d + 2.0 * t);
                let rhs = ak.transpose() * &bk + (DVector::from_column_slice(v1) + DVector::from_column_slice(v2)) * t;
                Ok(lhs.cholesky().unwrap().solve(&rhs).iter().copied().collect())
            },
            |_| Ok(0.0),
            vec![0.0; 4],
            t,
            &converge(2000),
        )?;
        Ok(r)
    })
    .unwrap();
    for r in out {
        assert!(max_abs_diff(&r.x, &want) < 1e-6);
        assert!(max_abs_diff(&r.x_local, &want) < 1e-6);
    }
}

#[test]
fn coordinate_descent_on_separable_quadratic() {
    let c = vec![1.0, -2.0, 0.5, 3.0];
    let q = Quadratic { center: c.clone() };
    let gammas = vec![1.0; 4];
    let (x, _) = parallel_prox_linear_cd(&q, &ProxFn::Zero, &gammas, vec![0.0; 4], Sampling::All, &converge(1)).unwrap();
    assert_eq!(x, c);
    let (x, _) = parallel_prox_linear_cd(&q, &ProxFn::Zero, &gammas, vec![0.0; 4], Sampling::Cyclic, &converge(4)).unwrap();
    assert_eq!(x, c);
    let (x, _) =
        parallel_prox_linear_cd(&q, &ProxFn::Zero, &gammas, vec![0.0; 4], Sampling::Random { size: 2 }, &converge(60))
            .unwrap();
    assert_eq!(x, c);
    let (x, _) = parallel_prox_linear_cd(&q, &ProxFn::L1(1.0), &gammas, vec![0.0; 4], Sampling::All, &converge(1)).unwrap();
    assert_eq!(x, vec![0.0, -1.0, 0.0, 2.0]);
    assert!(matches!(
        parallel_prox_linear_cd(&q, &ProxFn::Zero, &gammas, vec![0.0; 4], Sampling::Random { size: 5 }, &converge(1)),
        Err(Error::Config(_))
    ));
}

#[test]
fn cyclic_coordinate_descent_solves_lasso() {
    let (a, b, lambda) = lasso_problem();
    let want = lasso_cd_oracle(&to_na(&a), &DVector::from_vec(b.clone()), lambda);
    let gammas: Vec<f64> = (0..5).map(|j| 1.0 / (0..12).map(|i| a.get(i, j).powi(2)).sum::<f64>()).collect();
    let f = LeastSquares::new(a, b).unwrap();
    let (x, _) = parallel_prox_linear_cd(&f, &ProxFn::L1(lambda), &gammas, vec![0.0; 5], Sampling::Cyclic, &converge(5000)).unwrap();
    assert!(max_abs_diff(&x, &want) < 1e-9);
}

#[test]
fn full_batch_sgd_is_gradient_descent() {
    let a = random_mat(10, 3, 41);
    let targets = random_vec(10, 42);
    let loss = SquaredLoss { targets };
    let cfg = converge(25);
    let (x, _) = minibatch_sgd(&a, &loss, vec![0.0; 3], 10, |_| 0.1, &cfg).unwrap();
    let all: Vec<usize> = (0..10).collect();
    let mut z = vec![0.0; 3];
    for _ in 0..25 {
        let g = batch_gradient(&a, &loss, &z, &all);
        for (zi, gi) in z.iter_mut().zip(g) {
            *zi -= 0.1 * gi;
        }
    }
    assert_eq!(x, z);
}

#[test]
fn singleton_gradients_average_to_the_full_gradient() {
    let a = random_mat(10, 3, 43);
    let loss = SquaredLoss { targets: random_vec(10, 44) };
    let x = random_vec(3, 45);
    let all: Vec<usize> = (0..10).collect();
    let full = batch_gradient(&a, &loss, &x, &all);
    let mut mean = vec![0.0; 3];
    for i in 0..10 {
        for (m, g) in mean.iter_mut().zip(batch_gradient(&a, &loss, &x, &[i])) {
            *m += g / 10.0;
        }
    }
    assert!(max_abs_diff(&mean, &full) < 1e-14);
}

#[test]
fn sgd_with_decaying_steps_approaches_the_solution() {
    let a = random_mat(40, 3, 46);
    let truth = vec![1.0, -0.5, 2.0];
    let targets: Vec<f64> = (0..40).map(|i| (0..3).map(|j| a.get(i, j) * truth[j]).sum()).collect();
    let loss = SquaredLoss { targets };
    let cfg = SolverConfig {
        seed: 3,
        ..converge(20_000)
    };
    let (x, trace) = minibatch_sgd(&a, &loss, vec![0.0; 3], 4, |n| 1.0 / (1.0 + n as f64 / 500.0), &cfg).unwrap();
    assert!(max_abs_diff(&x, &truth) < 1e-3, "{x:?}");
    assert!(trace.last_objective().unwrap() < trace.objectives()[0]);
    assert!(matches!(minibatch_sgd(&a, &loss, vec![0.0; 3], 0, |_| 0.1, &cfg), Err(Error::Config(_))));
}

#[test]
fn mm_drive_with_identity_step_converges_at_once() {
    let cfg = SolverConfig {
        timing: false,
        ..SolverConfig::default()
    };
    let (s, trace) = mm_drive(vec![1.0, 2.0], |_| Ok(()), |s| Ok(s.iter().sum()), Sense::Minimize, &cfg).unwrap();
    assert_eq!(s, vec![1.0, 2.0]);
    assert!(trace.converged);
    assert_eq!(trace.last_iter(), 100);
}

#[test]
fn mm_drive_flags_wrong_direction() {
    let cfg = SolverConfig::every_iteration(5);
    let step = |s: &mut f64| {
        *s += 1.0;
        Ok(())
    };
    let (_, trace) = mm_drive(0.0, step, |s| Ok(*s), Sense::Minimize, &cfg).unwrap();
    assert_eq!(trace.violations, vec![1, 2, 3, 4, 5]);
    let (_, trace) = mm_drive(0.0, step, |s| Ok(*s), Sense::Maximize, &cfg).unwrap();
    assert!(trace.violations.is_empty());
    let strict = SolverConfig { strict: true, ..cfg };
    assert!(matches!(mm_drive(0.0, step, |s| Ok(*s), Sense::Minimize, &strict), Err(Error::Numerical(_))));
}
