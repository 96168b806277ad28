use std::fmt::Write as _;
use std::fs;

use dstat::apps::pet_toy;
use dstat::autodiff::{central_difference, example_graph, random_graph};
use dstat::distmat::{io, seeded_matrix, Mat};
use dstat::{Error, Init, Result, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{Command, Common, DataKind, Precision};

fn write<T: Scalar>(path: &std::path::Path, m: &Mat<f64>) -> Result<()> {
    io::write_dstm(path, &m.cast::<T>())
}

pub(crate) fn gen_data(common: &Common, cmd: &Command) -> Result<String> {
    let Command::GenData {
        kind,
        rows,
        cols,
        grid,
        detectors,
        scale,
    } = cmd
    else {
        unreachable!()
    };
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("gen-data needs --out".into()))?;
    let save = match common.precision {
        Precision::F64 => write::<f64>,
        Precision::F32 => write::<f32>,
    };
    let seed = common.seed;
    match kind {
        DataKind::Uniform | DataKind::Normal | DataKind::MdsPoints => {
            let init = if *kind == DataKind::Uniform {
                Init::Uniform { lo: 0.0, hi: 1.0 }
            } else {
                Init::Normal
            };
            save(out, &seeded_matrix(*rows, *cols, init, seed)?)?;
            Ok(format!("wrote {rows}x{cols} matrix to {}\n", out.display()))
        }
        DataKind::PetToy => {
            let prob = pet_toy(*grid, *detectors, *scale, seed)?;
            fs::create_dir_all(out)?;
            save(&out.join("e.dstm"), &prob.e.to_dense())?;
            save(&out.join("d.dstm"), &prob.d.to_dense())?;
            let y = Mat::from_vec(prob.y.len(), 1, prob.y)?;
            save(&out.join("y.dstm"), &y)?;
            Ok(format!(
                "wrote {}x{} grid toy with {} detector pairs to {}\n",
                grid,
                grid,
                y.rows(),
                out.display()
            ))
        }
    }
}

/// Largest relative disagreement between two derivative estimates.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub(crate) fn adcheck(at: &[f64], graphs: usize, seed: u64) -> Result<String> {
    if at.len() != 2 {
        return Err(Error::Config(format!("--at takes two values, got {}", at.len())));
    }
    let g = example_graph();
    let ev = g.eval(at)?;
    let rev = g.reverse_mode(at)?;
    let fwd: Vec<f64> = (0..2).map(|k| g.forward_mode(at, k)).collect::<Result<_>>()?;
    let mut s = String::new();
    let _ = writeln!(s, "f({}, {}) = {}", at[0], at[1], ev.output);
    let _ = writeln!(s, "reverse mode: ({}, {})", rev[0], rev[1]);
    let _ = writeln!(s, "forward mode: ({}, {})", fwd[0], fwd[1]);
    let modes = rel(fwd[0], rev[0]).max(rel(fwd[1], rev[1]));
    let verdict = if modes <= 1e-14 { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "{verdict} modes agree: max relative difference {modes:.3e}");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..graphs {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
        let g = random_graph(&mut rng, 3, 6 + case % 15, &x);
        let rev = g.reverse_mode(&x)?;
        for (k, r) in rev.iter().enumerate() {
            worst = worst.max(rel(central_difference(&g, &x, k, 1e-6)?, *r));
            worst = worst.max(rel(g.forward_mode(&x, k)?, *r));
        }
    }
    let verdict = if worst <= 1e-6 { "PASS" } else { "FAIL" };
    let _ = writeln!(
        s,
        "{verdict} {graphs} random graphs against finite differences: max relative error {worst:.3e}"
    );
    Ok(s)
}
