use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pas_core::channel::{kernel_from_fiber_with, nonlinear_term, FiberConfig, KernelPulse};
use pas_core::constellation::Constellation;
use pas_core::matchers::{ess_build, measure_rate_loss_adm_with, AdmCoder, BitStream};
use pas_core::par::Execution;
use pas_core::rng;
use pas_core::selection::{SelectionConfig, Selector};
use pas_core::training::random_logits;
use pas_core::C64;
use rand::Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn symbols(n: usize) -> Vec<C64> {
    let c = Constellation::new(64).unwrap();
    let mut r = rng::rng_from_seed(1);
    (0..n).map(|_| c.point(r.random_range(0..64))).collect()
}

fn bench_nonlinear_term(cr: &mut Criterion) {
    let kernel = kernel_from_fiber_with(
        &FiberConfig::default(),
        16,
        KernelPulse::Rrc,
        Execution::Parallel,
    )
    .unwrap();
    let x = symbols(8192);
    let mut g = cr.benchmark_group("nonlinear_term");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, x.len()), |b| {
            b.iter(|| nonlinear_term(&x, &kernel, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_kernel(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("kernel_from_fiber");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                kernel_from_fiber_with(&FiberConfig::default(), 8, KernelPulse::Rrc, exec).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_rate_loss(cr: &mut Criterion) {
    let model = random_logits(16, 1, 1.0, 3).to_table();
    let coder = AdmCoder::new(&model).unwrap();
    let mut g = cr.benchmark_group("adm_rate_loss");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| measure_rate_loss_adm_with(&coder, 2048, 200, 5, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_selection(cr: &mut Criterion) {
    let c = Constellation::new(64).unwrap();
    let coder = ess_build(32, &[1, 3, 5, 7], 600).unwrap();
    let kernel = kernel_from_fiber_with(
        &FiberConfig::default(),
        16,
        KernelPulse::Rrc,
        Execution::Parallel,
    )
    .unwrap();
    let cfg = SelectionConfig::default();
    let selector = Selector::new(&cfg, &coder, &c, &kernel, 2).unwrap();
    let payload = BitStream::random(selector.block_bits() * 16, &mut rng::rng_from_seed(4));
    let mut g = cr.benchmark_group("sequence_selection");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| selector.select_frame(&payload, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_nonlinear_term,
    bench_kernel,
    bench_rate_loss,
    bench_selection
);
criterion_main!(benches);
