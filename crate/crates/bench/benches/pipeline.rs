use criterion::{criterion_group, criterion_main, Criterion};

use micromotion::equilibrium::{solve_equilibrium, IterationSettings};
use micromotion::gate::{optimize_pulse, GateContext};
use micromotion::modes::{solve_modes, ModeSettings};
use micromotion_bench::{context, crystal, drive, laser};

fn stages(c: &mut Criterion) {
    let drive = drive();
    let mut g = c.benchmark_group("four_ions");
    g.sample_size(10);
    g.bench_function("equilibrium", |b| {
        b.iter(|| solve_equilibrium(&drive, 4, 8, &IterationSettings::default(), 7).unwrap())
    });
    let (traj, modes) = crystal(4);
    g.bench_function("modes", |b| b.iter(|| solve_modes(&traj, &drive, &ModeSettings::default()).unwrap()));
    let laser = laser(50e-6, 11, 6.683333e6);
    g.bench_function("gate_context", |b| b.iter(|| context(&traj, &modes, &laser)));
    let ctx: GateContext = context(&traj, &modes, &laser);
    g.bench_function("optimize_pulse", |b| b.iter(|| optimize_pulse(&ctx).unwrap()));
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
