use criterion::{criterion_group, criterion_main, Criterion};
use kktprecond::bench::{replay, trace_instance, ReplayConfig, SolverKind, Trace};
use kktprecond::instances::gen_maxcut_like;
use kktprecond::ipm::IPMConfig;
use kktprecond::linalg::{gaussian_matrix, gaussian_vector};
use kktprecond::precond::{precond_apply, precond_setup};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lowrank(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, k) = (400, 40);
    let d = DVector::from_fn(m, |_, _| 10f64.powf(rng.random_range(-3.0..1.0)));
    let vhat = gaussian_matrix(&mut rng, m, k, 1.0);
    let p = precond_setup(&d, &vhat).unwrap();
    let x = gaussian_vector(&mut rng, m);

    let mut g = c.benchmark_group("lowrank");
    g.bench_function("setup_400x40", |b| b.iter(|| precond_setup(&d, &vhat).unwrap()));
    g.bench_function("apply_400x40", |b| b.iter(|| precond_apply(&p, &x).unwrap()));
    g.finish();
}

/// Last few Newton systems of a max-cut-like run, where the solvers differ most.
fn late_trace() -> Trace {
    let data = gen_maxcut_like(150, 0.2, 12, 9).unwrap();
    let cfg = IPMConfig {
        mu_min: Some(1e-5),
        ..IPMConfig::default()
    };
    let mut trace = trace_instance("mc150", data, &cfg).unwrap();
    let keep = trace.snapshots.len().saturating_sub(3);
    trace.snapshots.drain(..keep);
    trace
}

fn newton_solves(c: &mut Criterion) {
    let trace = late_trace();
    let mut g = c.benchmark_group("late_newton_systems");
    g.sample_size(10);
    for kind in SolverKind::ALL {
        let cfg = ReplayConfig {
            solvers: vec![kind],
            cond_iters: None,
            ..ReplayConfig::default()
        };
        g.bench_function(kind.as_str(), |b| b.iter(|| replay(&trace, &cfg)));
    }
    g.finish();
}

criterion_group!(benches, lowrank, newton_solves);
criterion_main!(benches);
