use criterion::{criterion_group, criterion_main, Criterion};
use dstat::apps::{cox_l1, cox_synthetic, mds_fit, mds_points, nmf_multiplicative, pairwise_distances, pet_mm_ridge, pet_toy, CoxDataset, NmfState};
use dstat::optim::SolverConfig;
use dstat::{DistMatrix, Init, Partition};
use dstat_bench::time_world;

const WORKERS: usize = 4;

fn cfg() -> SolverConfig {
    SolverConfig {
        max_iters: 50,
        tol: 0.0,
        ..SolverConfig::default()
    }
}

fn apps(c: &mut Criterion) {
    let mut group = c.benchmark_group("apps");
    group.sample_size(10);

    group.bench_function("nmf", |b| {
        b.iter_custom(|iters| {
            time_world(
                WORKERS,
                iters,
                |comm| NmfState::<f64>::random(comm, 200, 160, 8, 0),
                |comm, s| nmf_multiplicative(comm, s.clone(), &cfg()).map(drop),
            )
        })
    });

    let prob = pet_toy(16, 48, 20.0, 0).unwrap();
    group.bench_function("pet", |b| {
        b.iter_custom(|iters| {
            time_world(
                WORKERS,
                iters,
                |comm| prob.local_pixels(comm.world_size()),
                |comm, &n| pet_mm_ridge(comm, &prob, 0.05, vec![1.0; n], &cfg()).map(drop),
            )
        })
    });

    group.bench_function("mds", |b| {
        b.iter_custom(|iters| {
            time_world(
                WORKERS,
                iters,
                |comm| {
                    let y = pairwise_distances(comm, &mds_points(comm, 64, 2, 0)?)?;
                    let theta = DistMatrix::<f64>::create(comm, 64, 2, Partition::ByRow, Init::Normal, 1)?;
                    Ok((y, theta))
                },
                |comm, (y, theta)| mds_fit(comm, y, theta.clone(), &cfg()).map(drop),
            )
        })
    });

    let (x, y, delta) = cox_synthetic(200, 40, 0).unwrap();
    group.bench_function("cox", |b| {
        b.iter_custom(|iters| {
            time_world(
                WORKERS,
                iters,
                |comm| CoxDataset::from_unsorted(comm, comm.is_root().then_some(&x), 200, 40, &y, &delta, 1e-3),
                |comm, data| {
                    let n = data.x.local_shape().1;
                    cox_l1(comm, data, vec![0.0; n], &cfg()).map(drop)
                },
            )
        })
    });
    group.finish();
}

criterion_group!(benches, apps);
criterion_main!(benches);
