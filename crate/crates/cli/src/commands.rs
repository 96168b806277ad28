use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dstat::apps::{
    cox_synthetic, mc_pi, mds_fit, mds_points, nmf_apg, nmf_multiplicative, pairwise_distances, pet_mm_ridge,
    pet_pdhg_tv, pet_pdhg_tv_dual, pet_spdhg_tv, pet_toy, CoxDataset, NmfState, PetProblem,
};
use dstat::distmat::{io, matmul, seeded_matrix, Mat};
use dstat::optim::{IterationTrace, SolverConfig, TraceRecord};
use dstat::{Communicator, DistMatrix, Error, Init, Partition, Result, Scalar, Scenario};

use crate::args::{Command, NmfMethod, PetMethod, Precision};
use crate::data;
use crate::Launcher;

pub(crate) fn dispatch(cmd: &Command, l: &Launcher) -> Result<Option<String>> {
    let f32 = l.common.precision == Precision::F32;
    match cmd {
        Command::Mcpi { n } => mcpi(l, *n),
        Command::MmBench {
            scenario,
            rows,
            cols,
            inner,
        } => {
            let scenarios = select_scenarios(scenario)?;
            let dims = (*rows, inner.unwrap_or(*cols), *cols);
            if f32 {
                mm_bench::<f32>(l, &scenarios, dims)
            } else {
                mm_bench::<f64>(l, &scenarios, dims)
            }
        }
        Command::Nmf { .. } if f32 => nmf::<f32>(l, cmd),
        Command::Nmf { .. } => nmf::<f64>(l, cmd),
        Command::Pet { .. } if f32 => pet::<f32>(l, cmd),
        Command::Pet { .. } => pet::<f64>(l, cmd),
        Command::Mds { .. } if f32 => mds::<f32>(l, cmd),
        Command::Mds { .. } => mds::<f64>(l, cmd),
        Command::Cox { .. } if f32 => cox::<f32>(l, cmd),
        Command::Cox { .. } => cox::<f64>(l, cmd),
        Command::GenData { .. } => data::gen_data(l.common, cmd).map(Some),
        Command::Adcheck { at, graphs } => data::adcheck(at, *graphs, l.common.seed).map(Some),
    }
}

fn solver_config(l: &Launcher, default_iters: usize) -> SolverConfig {
    let c = l.common;
    SolverConfig {
        max_iters: c.iters.unwrap_or(default_iters),
        eval_every: c.eval_every as usize,
        tol: c.tol,
        seed: c.seed,
        timing: c.timing,
        ..SolverConfig::default()
    }
}

/// Creates the output directory on rank 0 and returns it.
fn out_dir(comm: &Communicator, l: &Launcher) -> Result<Option<PathBuf>> {
    match &l.common.out {
        Some(dir) if comm.is_root() => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        _ => Ok(None),
    }
}

fn summary(name: &str, trace: &IterationTrace) -> String {
    let stop = if trace.converged { "converged" } else { "iteration cap" };
    format!(
        "{name}: {} iterations ({stop}), final objective {:e}\n",
        trace.last_iter(),
        trace.last_objective().unwrap_or(f64::NAN)
    )
}

fn finish(comm: &Communicator, l: &Launcher, name: &str, trace: &IterationTrace) -> Result<(String, Option<PathBuf>)> {
    let dir = out_dir(comm, l)?;
    if let Some(d) = &dir {
        trace.write_csv(d.join("trace.csv"))?;
    }
    Ok((summary(name, trace), dir))
}

fn column<T: Scalar>(v: &[T]) -> Mat<T> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn mcpi(l: &Launcher, n: usize) -> Result<Option<String>> {
    l.run(|c| {
        let est = mc_pi(c, n, l.common.seed)?;
        if let Some(d) = out_dir(c, l)? {
            let trace = IterationTrace {
                records: vec![TraceRecord {
                    iter: 1,
                    objective: est,
                    seconds: 0.0,
                }],
                ..IterationTrace::default()
            };
            trace.write_csv(d.join("trace.csv"))?;
        }
        Ok(format!("pi estimate {est} from {} draws\n", n * c.world_size()))
    })
}

fn select_scenarios(arg: &str) -> Result<Vec<Scenario>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(Scenario::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<u8>()
                .ok()
                .and_then(Scenario::by_id)
                .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}; expected 1-11 or all")))
        })
        .collect()
}

/// Places `full` with logical layout `part`.
fn place<T: Scalar>(c: &Communicator, full: &Mat<T>, part: Partition) -> Result<DistMatrix<T>> {
    let (r, k) = full.shape();
    DistMatrix::from_full(c, 0, c.is_root().then_some(full), r, k, part)
}

fn mm_bench<T: Scalar>(l: &Launcher, scenarios: &[Scenario], (p, r, q): (usize, usize, usize)) -> Result<Option<String>> {
    l.check_split(&[("rows", p), ("inner dimension", r), ("cols", q)])?;
    let seed = l.common.seed;
    let a = seeded_matrix::<T>(p, r, Init::Normal, seed)?;
    let b = seeded_matrix::<T>(r, q, Init::Uniform { lo: -1.0, hi: 1.0 }, seed + 1)?;
    let want = a.cast::<f64>().matmul(&b.cast::<f64>())?;
    let scale = want.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = if T::BYTES == 8 { 1e-12 } else { 1e-5 };
    l.run(|c| {
        let dir = out_dir(c, l)?;
        let mut report = String::new();
        let mut trace = IterationTrace::default();
        for s in scenarios {
            let prod = matmul(c, &place(c, &a, s.a)?, &place(c, &b, s.b)?, Some(s.out))?;
            let Some(got) = prod.gather_full(c, 0)? else { continue };
            let err = got
                .as_slice()
                .iter()
                .zip(want.as_slice())
                .map(|(g, w)| (g.as_f64() - w).abs() / scale)
                .fold(0.0f64, f64::max);
            let verdict = if err <= tol { "PASS" } else { "FAIL" };
            let _ = writeln!(
                report,
                "{verdict} scenario {:>2}: {:?} x {:?} -> {:?}, max relative error {err:.3e}",
                s.id, s.a, s.b, s.out
            );
            trace.records.push(TraceRecord {
                iter: s.id as usize,
                objective: err,
                seconds: 0.0,
            });
            if let Some(d) = &dir {
                io::write_dstm(d.join(format!("product_{}.dstm", s.id)), &got)?;
            }
        }
        if let Some(d) = &dir {
            trace.write_csv(d.join("trace.csv"))?;
        }
        Ok(report)
    })
}

fn nmf<T: Scalar>(l: &Launcher, cmd: &Command) -> Result<Option<String>> {
    let Command::Nmf {
        input,
        rows,
        cols,
        rank,
        method,
        epsilon,
    } = cmd
    else {
        unreachable!()
    };
    let x = input.as_deref().map(io::read_matrix::<T>).transpose()?;
    let (m, p) = x.as_ref().map_or((*rows, *cols), Mat::shape);
    l.check_split(&[("rows", m), ("cols", p)])?;
    let cfg = solver_config(l, 1000);
    l.run(|c| {
        let seed = l.common.seed;
        let mut state = match &x {
            None => NmfState::<T>::random(c, m, p, *rank, seed)?,
            Some(full) => {
                let u = Init::Uniform { lo: 0.0, hi: 1.0 };
                NmfState::new(
                    c,
                    place(c, full, Partition::ByRow)?,
                    DistMatrix::create(c, m, *rank, Partition::ByRow, u, seed + 1)?,
                    DistMatrix::create(c, *rank, p, Partition::ByCol, u, seed + 2)?,
                    0.0,
                )?
            }
        };
        state.epsilon = *epsilon;
        if !(*epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon {epsilon} must be nonnegative")));
        }
        let (state, trace, name) = match method {
            NmfMethod::Mult => {
                let (s, t) = nmf_multiplicative(c, state, &cfg)?;
                (s, t, "nmf (multiplicative)")
            }
            NmfMethod::Apg => {
                let (s, t) = nmf_apg(c, state, &cfg)?;
                (s, t, "nmf (accelerated proximal gradient)")
            }
        };
        let (report, dir) = finish(c, l, name, &trace)?;
        let v = state.v.gather_full(c, 0)?;
        let w = state.w.gather_full(c, 0)?;
        if let (Some(d), Some(v), Some(w)) = (dir, v, w) {
            io::write_dstm(d.join("v.dstm"), &v)?;
            io::write_dstm(d.join("w.dstm"), &w)?;
        }
        Ok(report)
    })
}

pub(crate) fn load_pet<T: Scalar>(dir: &Path) -> Result<PetProblem<T>> {
    let e = io::read_matrix::<T>(dir.join("e.dstm"))?;
    let d = io::read_matrix::<T>(dir.join("d.dstm"))?;
    let y = io::read_matrix::<T>(dir.join("y.dstm"))?;
    if y.cols() != 1 {
        return Err(Error::Shape(format!("y must be a column, got {:?}", y.shape())));
    }
    let p = e.cols();
    let g = (p as f64).sqrt().round() as usize;
    let image = if g * g == p { (g, g) } else { (1, p) };
    PetProblem::new(
        dstat::distmat::Csr::from_dense(&e),
        dstat::distmat::Csr::from_dense(&d),
        y.into_vec(),
        image,
    )
}

fn pet<T: Scalar>(l: &Launcher, cmd: &Command) -> Result<Option<String>> {
    let Command::Pet {
        input,
        grid,
        detectors,
        scale,
        method,
        mu,
        rho,
        pi,
        sigma,
        tau,
    } = cmd
    else {
        unreachable!()
    };
    let prob: PetProblem<T> = match input {
        Some(dir) => load_pet(dir)?,
        None => pet_toy(*grid, *detectors, *scale, l.common.seed)?.cast(),
    };
    l.check_split(&[("pixel count", prob.pixels())])?;
    let cfg = SolverConfig {
        sigma: *sigma,
        tau: *tau,
        ..solver_config(l, 1000)
    };
    l.run(|c| {
        let (lambda, trace, name) = match method {
            PetMethod::Mm => {
                let n = prob.local_pixels(c.world_size())?;
                let (lam, t) = pet_mm_ridge(c, &prob, *mu, vec![T::one(); n], &cfg)?;
                (lam, t, "pet (ridge MM)")
            }
            PetMethod::Pdhg => {
                let r = pet_pdhg_tv(c, &prob, *rho, &cfg)?;
                (r.x, r.trace, "pet (TV primal-dual)")
            }
            PetMethod::PdhgDual => {
                let r = pet_pdhg_tv_dual(c, &prob, *rho, &cfg)?;
                (r.x, r.trace, "pet (TV primal-dual, dual form)")
            }
            PetMethod::Spdhg => {
                let r = pet_spdhg_tv(c, &prob, *rho, *pi, &cfg)?;
                (r.x, r.trace, "pet (TV stochastic primal-dual)")
            }
        };
        let (report, dir) = finish(c, l, name, &trace)?;
        let full = c.gather(0, &lambda)?;
        if let (Some(d), Some(full)) = (dir, full) {
            io::write_dstm(d.join("lambda.dstm"), &Mat::from_vec(prob.image.0, prob.image.1, full)?)?;
        }
        Ok(report)
    })
}

fn mds<T: Scalar>(l: &Launcher, cmd: &Command) -> Result<Option<String>> {
    let Command::Mds {
        input,
        dissimilarities,
        points,
        dim,
        source_dim,
    } = cmd
    else {
        unreachable!()
    };
    let src = input.as_deref().map(io::read_matrix::<f64>).transpose()?;
    let y = dissimilarities.as_deref().map(io::read_matrix::<T>).transpose()?;
    let q = match (&src, &y) {
        (Some(s), _) => s.rows(),
        (_, Some(y)) => y.rows(),
        _ => *points,
    };
    l.check_split(&[("points", q)])?;
    let cfg = solver_config(l, 1000);
    l.run(|c| {
        let seed = l.common.seed;
        let yd = match (&src, &y) {
            (_, Some(y)) => place(c, y, Partition::ByRow)?,
            (Some(s), _) => pairwise_distances(c, &place(c, s, Partition::ByRow)?)?.cast(),
            _ => pairwise_distances(c, &mds_points(c, q, source_dim.unwrap_or(*dim), seed)?)?.cast(),
        };
        let theta0 = DistMatrix::create(c, q, *dim, Partition::ByRow, Init::Normal, seed + 1)?;
        let (theta, trace) = mds_fit(c, &yd, theta0, &cfg)?;
        let (report, dir) = finish(c, l, "mds (stress majorization)", &trace)?;
        if let (Some(d), Some(t)) = (dir, theta.gather_full(c, 0)?) {
            io::write_csv(d.join("theta.csv"), &t)?;
        }
        Ok(report)
    })
}

fn cox<T: Scalar>(l: &Launcher, cmd: &Command) -> Result<Option<String>> {
    let Command::Cox {
        input,
        survival,
        rows,
        cols,
        lambda,
        step,
        unpenalized,
    } = cmd
    else {
        unreachable!()
    };
    let (x, y, delta) = match (input, survival) {
        (Some(xp), Some(sp)) => {
            let x = io::read_matrix::<f64>(xp)?;
            let s = io::read_matrix::<f64>(sp)?;
            if s.cols() != 2 || s.rows() != x.rows() {
                return Err(Error::Shape(format!(
                    "survival file must be {}x2, got {:?}",
                    x.rows(),
                    s.shape()
                )));
            }
            let (y, d) = (0..s.rows()).map(|i| (s.get(i, 0), s.get(i, 1))).unzip();
            (x, y, d)
        }
        _ => cox_synthetic(*rows, *cols, l.common.seed)?,
    };
    let (m, p) = x.shape();
    if let Some(&k) = unpenalized.iter().find(|&&k| k >= p) {
        return Err(Error::Config(format!("unpenalized covariate {k} outside 0..{p}")));
    }
    l.check_split(&[("covariates", p)])?;
    let x: Mat<T> = x.cast();
    let cast = |v: &[f64]| v.iter().map(|&a| T::lit(a)).collect::<Vec<T>>();
    let (y, delta) = (cast(&y), cast(&delta));
    let cfg = SolverConfig {
        gamma: *step,
        ..solver_config(l, 1000)
    };
    l.run(|c| {
        let data = CoxDataset::from_unsorted(c, c.is_root().then_some(&x), m, p, &y, &delta, *lambda)?
            .with_unpenalized(unpenalized.clone());
        let n = data.x.local_shape().1;
        let (beta, trace) = dstat::apps::cox_l1(c, &data, vec![T::zero(); n], &cfg)?;
        let (mut report, dir) = finish(c, l, "cox (proximal gradient)", &trace)?;
        if let Some(full) = c.gather(0, &beta)? {
            let nonzero = full.iter().filter(|b| **b != T::zero()).count();
            let _ = writeln!(report, "{nonzero} of {p} coefficients nonzero");
            if let Some(d) = dir {
                io::write_csv(d.join("beta.csv"), &column(&full))?;
            }
        }
        Ok(report)
    })
}
