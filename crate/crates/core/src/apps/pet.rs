use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::EPS;
use crate::comm::Communicator;
use crate::distmat::{matmul, Block, Csr, DistMatrix, Mat, Partition};
use crate::error::{Error, Result};
use crate::optim::{
    mm_drive, pdhg, pdhg_dual, power_iteration, stochastic_pdhg, DistOperator, IterationTrace, Layout, LinearOperator,
    PdhgResult, PrimalTerm, Sense, SolverConfig, Stacked,
};
use crate::prox::Proximable;
use crate::scalar::Scalar;

/// Emission tomography data on an `image.0 × image.1` image: detection
/// probabilities `E` (detector pairs × pixels), a difference matrix `D`
/// (one row per neighbouring pixel pair) and the observed counts `y`.
/// Every worker holds the full matrices; solvers keep only their columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PetProblem<T> {
    pub e: Csr<T>,
    pub d: Csr<T>,
    pub y: Vec<T>,
    pub image: (usize, usize),
}

impl<T: Scalar> PetProblem<T> {
    pub fn new(e: Csr<T>, d: Csr<T>, y: Vec<T>, image: (usize, usize)) -> Result<Self> {
        let p = image.0 * image.1;
        if e.cols() != p || d.cols() != p || y.len() != e.rows() {
            return Err(Error::Shape(format!(
                "E is {}x{}, D is {}x{} and y has {} entries for a {}x{} image",
                e.rows(),
                e.cols(),
                d.rows(),
                d.cols(),
                y.len(),
                image.0,
                image.1
            )));
        }
        let mut sums = vec![0.0; p];
        for i in 0..e.rows() {
            for (j, v) in e.row_entries(i) {
                let v = v.as_f64();
                if !(v >= 0.0) {
                    return Err(Error::Contract(format!("E[{i}, {j}] = {v} is negative")));
                }
                sums[j] += v;
            }
        }
        if let Some((j, s)) = sums.iter().enumerate().find(|(_, &s)| s > 1.0 + 1e-12) {
            return Err(Error::Contract(format!("column {j} of E sums to {s} > 1")));
        }
        if let Some(v) = y.iter().map(|v| v.as_f64()).find(|v| !(*v >= 0.0 && v.fract() == 0.0)) {
            return Err(Error::Contract(format!("count {v} is not a nonnegative integer")));
        }
        Ok(Self { e, d, y, image })
    }

    pub fn pixels(&self) -> usize {
        self.image.0 * self.image.1
    }

    pub fn cast<U: Scalar>(&self) -> PetProblem<U> {
        PetProblem {
            e: self.e.cast(),
            d: self.d.cast(),
            y: self.y.iter().map(|v| U::lit(v.as_f64())).collect(),
            image: self.image,
        }
    }

    /// Number of pixels each of `world` workers holds.
    pub fn local_pixels(&self, world: usize) -> Result<usize> {
        let p = self.pixels();
        if !p.is_multiple_of(world) {
            return Err(Error::Partition(format!("{p} pixels do not split over {world} workers")));
        }
        Ok(p / world)
    }
}

/// Detector positions on the circle through the corners of `[0, g]²`.
fn detectors(g: usize, n_d: usize) -> Vec<(f64, f64)> {
    let c = g as f64 / 2.0;
    let r = g as f64 / std::f64::consts::SQRT_2;
    (0..n_d)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n_d as f64;
            (c + r * a.cos(), c + r * a.sin())
        })
        .collect()
}

/// Parameter range `[t0, t1]` of `p + t(q − p)` inside the box `[0, g]²`.
fn clip(p: (f64, f64), q: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> Option<(f64, f64)> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (pk, qk) in [(-dx, p.0 - lo.0), (dx, hi.0 - p.0), (-dy, p.1 - lo.1), (dy, hi.1 - p.1)] {
        if pk == 0.0 {
            if qk < 0.0 {
                return None;
            }
        } else {
            let t = qk / pk;
            if pk < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Intersection lengths of the segment `p → q` with the pixels of a
/// `g × g` grid of unit squares; pixel `(r, c)` covers `[c, c+1) × [r, r+1)`
/// and has index `r·g + c`.
fn trace_chord(p: (f64, f64), q: (f64, f64), g: usize) -> Vec<(usize, f64)> {
    let gf = g as f64;
    let Some((t0, t1)) = clip(p, q, (0.0, 0.0), (gf, gf)) else {
        return vec![];
    };
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let len = dx.hypot(dy);
    let mut ts = vec![t0, t1];
    for k in 1..g {
        for (d, s) in [(dx, p.0), (dy, p.1)] {
            if d != 0.0 {
                let t = (k as f64 - s) / d;
                if t > t0 && t < t1 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let mut out = vec![];
    for w in ts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (x, y) = (p.0 + tm * dx, p.1 + tm * dy);
        let (c, r) = (x.floor(), y.floor());
        if c >= 0.0 && c < gf && r >= 0.0 && r < gf {
            out.push((r as usize * g + c as usize, (w[1] - w[0]) * len));
        }
    }
    out
}

/// Scanner geometry for a `g × g` image and `n_d` detectors evenly spaced
/// on the circumscribed circle. Row `i` of `E` is the chord between one
/// pair of detectors, pairs ordered `(0,1), (0,2), …, (n_d−2, n_d−1)`;
/// entries are chord–pixel intersection lengths, each column scaled to sum
/// to one. `D` holds horizontal then vertical neighbour differences.
pub fn pet_system<T: Scalar>(g: usize, n_d: usize) -> Result<(Csr<T>, Csr<T>)> {
    if g < 2 || n_d < 2 {
        return Err(Error::Config(format!("need g >= 2 and n_d >= 2, got g={g}, n_d={n_d}")));
    }
    let p = g * g;
    let det = detectors(g, n_d);
    let mut entries = vec![];
    let mut row = 0;
    for a in 0..n_d {
        for b in a + 1..n_d {
            for (j, l) in trace_chord(det[a], det[b], g) {
                entries.push((row, j, l));
            }
            row += 1;
        }
    }
    let mut totals = vec![0.0; p];
    for &(_, j, l) in &entries {
        totals[j] += l;
    }
    let e: Vec<(usize, usize, T)> = entries.into_iter().map(|(i, j, l)| (i, j, T::lit(l / totals[j]))).collect();
    let e = Csr::from_triplets(row, p, &e)?;

    let mut d = vec![];
    let mut k = 0;
    for r in 0..g {
        for c in 0..g - 1 {
            d.push((k, r * g + c, T::one()));
            d.push((k, r * g + c + 1, -T::one()));
            k += 1;
        }
    }
    for r in 0..g - 1 {
        for c in 0..g {
            d.push((k, r * g + c, T::one()));
            d.push((k, (r + 1) * g + c, -T::one()));
            k += 1;
        }
    }
    Ok((e, Csr::from_triplets(k, p, &d)?))
}

/// Background intensity 1 with a disc of intensity 4 of radius `g/4` at the
/// centre, row-major.
pub fn pet_phantom(g: usize) -> Vec<f64> {
    let c = g as f64 / 2.0;
    let mut img = vec![1.0; g * g];
    for r in 0..g {
        for col in 0..g {
            let (x, y) = (col as f64 + 0.5 - c, r as f64 + 0.5 - c);
            if x.hypot(y) < g as f64 / 4.0 {
                img[r * g + col] = 4.0;
            }
        }
    }
    img
}

/// A toy problem: counts drawn from `Poisson(E · scale · phantom)`.
pub fn pet_toy(g: usize, n_d: usize, scale: f64, seed: u64) -> Result<PetProblem<f64>> {
    let (e, d) = pet_system::<f64>(g, n_d)?;
    let truth: Vec<f64> = pet_phantom(g).iter().map(|v| v * scale).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(e.rows());
    for i in 0..e.rows() {
        let mean: f64 = e.row_entries(i).map(|(j, v)| v * truth[j]).sum();
        let count = if mean > 0.0 {
            Poisson::new(mean).map_err(|err| Error::Config(err.to_string()))?.sample(&mut rng)
        } else {
            0.0
        };
        y.push(count);
    }
    PetProblem::new(e, d, y, (g, g))
}

/// This worker's column blocks of `E` and `D` as operators.
struct Columns<'c, T: Scalar> {
    e: DistOperator<'c, T>,
    d: DistOperator<'c, T>,
    offset: usize,
    local: usize,
}

fn columns<'c, T: Scalar>(comm: &'c Communicator, prob: &PetProblem<T>) -> Result<Columns<'c, T>> {
    let local = prob.local_pixels(comm.world_size())?;
    let offset = comm.rank() * local;
    let p = prob.pixels();
    let block = |m: &Csr<T>| {
        DistMatrix::from_block(comm, m.rows(), p, Partition::ByCol, Block::Sparse(m.col_block(offset, offset + local)))
    };
    Ok(Columns {
        e: DistOperator::new(comm, block(&prob.e)?),
        d: DistOperator::new(comm, block(&prob.d)?),
        offset,
        local,
    })
}

/// Local column sums of `E`.
fn column_sums<T: Scalar>(c: &Columns<'_, T>) -> Result<Vec<T>> {
    c.e.adjoint(&vec![T::one(); c.e.shape().0])
}

/// Neighbour structure of `D`: the off-diagonal part `G` of `diag(DᵀD) − DᵀD`
/// and the diagonal `n = diag(DᵀD)`. For ±1 difference rows, `G` is the
/// adjacency matrix and `n` the pixel degrees.
fn neighbours<T: Scalar>(d: &Csr<T>) -> Result<(Csr<T>, Vec<f64>)> {
    let p = d.cols();
    let mut n = vec![0.0; p];
    let mut g = vec![];
    for r in 0..d.rows() {
        let row: Vec<(usize, T)> = d.row_entries(r).collect();
        for &(j, a) in &row {
            n[j] += a.as_f64() * a.as_f64();
            for &(k, b) in &row {
                if k != j {
                    g.push((j, k, T::zero() - a * b));
                }
            }
        }
    }
    Ok((Csr::from_triplets(p, p, &g)?, n))
}

fn loglik_penalized<T: Scalar>(c: &Columns<'_, T>, y: &[T], mu: f64, lambda: &[T]) -> Result<f64> {
    let el = c.e.forward(lambda)?;
    let mut f: f64 = y
        .iter()
        .zip(&el)
        .map(|(&yi, &ei)| {
            let (yi, ei) = (yi.as_f64(), ei.as_f64());
            let log = if yi > 0.0 { yi * (ei + EPS).ln() } else { 0.0 };
            log - ei
        })
        .sum();
    if mu != 0.0 {
        let dl = c.d.forward(lambda)?;
        f -= 0.5 * mu * dl.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
    }
    Ok(f)
}

/// `Σᵢ [yᵢ log (Eλ)ᵢ − (Eλ)ᵢ] − (μ/2)‖Dλ‖²` at this worker's slice `lambda`.
pub fn pet_mm_objective<T: Scalar>(comm: &Communicator, prob: &PetProblem<T>, mu: f64, lambda: &[T]) -> Result<f64> {
    let c = columns(comm, prob)?;
    check_local(lambda, c.local)?;
    loglik_penalized(&c, &prob.y, mu, lambda)
}

fn check_local<T>(v: &[T], local: usize) -> Result<()> {
    if v.len() != local {
        return Err(Error::Shape(format!("expected {local} local pixels, got {}", v.len())));
    }
    Ok(())
}

/// MM for the ridge-penalized Poisson likelihood. Each pixel solves
/// `aⱼλ² + bⱼλ + cⱼ = 0` with `aⱼ = −2μnⱼ`,
/// `bⱼ = μ(nⱼλⱼ + (Gλ)ⱼ) − eⱼ` and `cⱼ = λⱼ Σᵢ eᵢⱼyᵢ/(Eλ)ᵢ`, where `eⱼ`
/// is the column sum of `E`. With `μ = 0` this is the EM update
/// `λⱼ ← cⱼ/eⱼ`. `lambda0` is this worker's slice.
pub fn pet_mm_ridge<T: Scalar>(
    comm: &Communicator,
    prob: &PetProblem<T>,
    mu: f64,
    lambda0: Vec<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, IterationTrace)> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!("ridge parameter {mu} must be nonnegative")));
    }
    let c = columns(comm, prob)?;
    check_local(&lambda0, c.local)?;
    if lambda0.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::Contract("starting intensities must be positive".into()));
    }
    let p = prob.pixels();
    let (g, n) = neighbours(&prob.d)?;
    let g = DistMatrix::from_block(comm, p, p, Partition::ByRow, Block::Sparse(g.row_block(c.offset, c.offset + c.local)))?;
    let n: Vec<f64> = n[c.offset..c.offset + c.local].to_vec();
    let ecol: Vec<f64> = column_sums(&c)?.iter().map(|v| v.as_f64()).collect();
    let eps = T::lit(EPS);

    let step = |lam: &mut Vec<T>| -> Result<()> {
        let el = c.e.forward(lam)?;
        let ratio: Vec<T> = prob.y.iter().zip(&el).map(|(&y, &e)| y / (e + eps)).collect();
        let back = c.e.adjoint(&ratio)?;
        let gl = if mu != 0.0 {
            let col = DistMatrix::from_local(comm, p, 1, Partition::ByRow, Mat::from_vec(c.local, 1, lam.clone())?)?;
            matmul(comm, &g, &col, None)?.local_dense().into_vec()
        } else {
            vec![T::zero(); c.local]
        };
        for j in 0..c.local {
            let l = lam[j].as_f64();
            let cj = l * back[j].as_f64();
            let a = -2.0 * mu * n[j];
            let b = mu * (n[j] * l + gl[j].as_f64()) - ecol[j];
            let next = if a == 0.0 {
                cj / (-b).max(EPS)
            } else {
                let s = (b * b - 4.0 * a * cj).sqrt();
                if b <= 0.0 {
                    2.0 * cj / (s - b)
                } else {
                    (-b - s) / (2.0 * a)
                }
            };
            lam[j] = T::lit(next);
        }
        Ok(())
    };
    let objective = |lam: &Vec<T>| loglik_penalized(&c, &prob.y, mu, lam);
    mm_drive(lambda0, step, objective, Sense::Maximize, cfg)
}

/// `f(z, w) = −Σᵢ yᵢ log zᵢ + ρ‖w‖₁` on the stacked dual `(z, w)`.
struct PetDual<'a, T> {
    y: &'a [T],
    rho: f64,
}

impl<T0: Scalar> Proximable for PetDual<'_, T0> {
    fn prox_into<T: Scalar>(&self, v: &mut [T], gamma: T, offset: usize) {
        let rho = T::lit(self.rho);
        for (i, x) in v.iter_mut().enumerate() {
            let k = offset + i;
            *x = if k < self.y.len() {
                let y = T::lit(self.y[k].as_f64());
                T::lit(0.5) * (*x + (*x * *x + T::lit(4.0) * gamma * y).sqrt())
            } else {
                let t = gamma * rho;
                x.signum() * (x.abs() - t).max(T::zero())
            };
        }
    }

    fn prox_conjugate_into<T: Scalar>(&self, v: &mut [T], gamma: T, offset: usize) {
        let rho = T::lit(self.rho);
        for (i, x) in v.iter_mut().enumerate() {
            let k = offset + i;
            *x = if k < self.y.len() {
                let y = T::lit(self.y[k].as_f64());
                T::lit(0.5) * (*x - (*x * *x + T::lit(4.0) * gamma * y).sqrt())
            } else {
                x.max(-rho).min(rho)
            };
        }
    }

    fn value_at<T: Scalar>(&self, u: &[T], offset: usize) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, &x)| {
                let k = offset + i;
                if k < self.y.len() {
                    let y = self.y[k].as_f64();
                    if y > 0.0 {
                        -y * (x.as_f64() + EPS).ln()
                    } else {
                        0.0
                    }
                } else {
                    self.rho * x.as_f64().abs()
                }
            })
            .sum()
    }
}

/// `g(λ) = (Eᵀ1)ᵀλ` restricted to `λ ≥ 0`.
struct PetPrimal<T> {
    c: Vec<T>,
}

impl<T: Scalar> PrimalTerm<T> for PetPrimal<T> {
    fn update(&self, x: &mut [T], kty: &[T], tau: T, _offset: usize) -> Result<()> {
        for ((xi, &k), &c) in x.iter_mut().zip(kty).zip(&self.c) {
            *xi = (*xi - tau * (k + c)).max(T::zero());
        }
        Ok(())
    }

    fn value(&self, x: &[T], layout: Layout<'_>) -> Result<f64> {
        let mut s: f64 = x.iter().zip(&self.c).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        if x.iter().any(|v| *v < T::zero()) {
            s = f64::INFINITY;
        }
        layout.sum(s)
    }
}

/// Steps used when none are configured: `σ = τ = 1/3` when that satisfies
/// `στ‖K‖² < 1`, otherwise `0.95/‖K‖`.
pub fn pet_default_steps(norm: f64) -> (f64, f64) {
    if norm * norm < 9.0 {
        (1.0 / 3.0, 1.0 / 3.0)
    } else {
        (0.95 / norm, 0.95 / norm)
    }
}

type PetOperator<'c, T> = Stacked<DistOperator<'c, T>, DistOperator<'c, T>>;

struct TvSetup<'c, 'a, T: Scalar> {
    k: PetOperator<'c, T>,
    f: PetDual<'a, T>,
    g: PetPrimal<T>,
    x0: Vec<T>,
    y0: Vec<T>,
    cfg: SolverConfig,
}

fn tv_setup<'c, 'a, T: Scalar>(
    comm: &'c Communicator,
    prob: &'a PetProblem<T>,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<TvSetup<'c, 'a, T>> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("TV penalty {rho} must be nonnegative")));
    }
    let c = columns(comm, prob)?;
    let g = PetPrimal { c: column_sums(&c)? };
    let local = c.local;
    let k = Stacked::new(c.e, c.d);
    let mut cfg = cfg.clone();
    if cfg.sigma.is_none() && cfg.tau.is_none() {
        let (s, t) = pet_default_steps(power_iteration(&k, 1e-8, 100_000)?);
        cfg.sigma = Some(s);
        cfg.tau = Some(t);
    }
    let mut y0 = vec![-T::one(); prob.e.rows()];
    y0.extend(vec![T::zero(); prob.d.rows()]);
    Ok(TvSetup {
        k,
        f: PetDual { y: &prob.y, rho },
        g,
        x0: vec![T::one(); local],
        y0,
        cfg,
    })
}

/// PDHG for `min_λ −L(λ) + ρ‖Dλ‖₁` over `λ ≥ 0` with `K = [E; D]`, started
/// from `λ = 1`, `z = −1`, `w = 0`. The result's `x` is this worker's
/// slice of `λ` and `y` the dual `(z, w)`.
pub fn pet_pdhg_tv<T: Scalar>(comm: &Communicator, prob: &PetProblem<T>, rho: f64, cfg: &SolverConfig) -> Result<PdhgResult<T>> {
    let s = tv_setup(comm, prob, rho, cfg)?;
    pdhg(&s.k, &s.f, &s.g, s.x0, s.y0, &s.cfg)
}

/// The same problem with the dual-ordered iteration.
pub fn pet_pdhg_tv_dual<T: Scalar>(
    comm: &Communicator,
    prob: &PetProblem<T>,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<PdhgResult<T>> {
    let s = tv_setup(comm, prob, rho, cfg)?;
    pdhg_dual(&s.k, &s.f, &s.g, s.x0, s.y0, &s.cfg)
}

/// Dual-ordered iteration where each `zᵢ` is updated with probability `pi`;
/// `w` is updated every iteration.
pub fn pet_spdhg_tv<T: Scalar>(
    comm: &Communicator,
    prob: &PetProblem<T>,
    rho: f64,
    pi: f64,
    cfg: &SolverConfig,
) -> Result<PdhgResult<T>> {
    let s = tv_setup(comm, prob, rho, cfg)?;
    stochastic_pdhg(&s.k, &s.f, &s.g, s.x0, s.y0, pi, 0..prob.e.rows(), &s.cfg)
}
