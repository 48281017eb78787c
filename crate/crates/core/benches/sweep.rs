use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tuned_source::exec::Execution;
use tuned_source::model::Mode;
use tuned_source::quadrature::Quadrature;
use tuned_source::theorems::{boundedness_sweep, Cell};

fn grid(n_chi: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    for j in 1..=2u8 {
        for l in 1..=4u32 {
            for i in 0..n_chi {
                let chi = -0.9 + 1.4 * i as f64 / (n_chi - 1) as f64;
                cells.push(Cell { mode: Mode::new(j, l, 0).unwrap(), k: 1.0, chi, mu_omega: 1.0, a: 2.0 });
            }
        }
    }
    cells
}

fn bench_sweep(c: &mut Criterion) {
    let quad = Quadrature::new(1e-12).unwrap();
    let mut group = c.benchmark_group("boundedness_sweep");
    for n_chi in [16, 128] {
        let cells = grid(n_chi);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, cells.len()), &cells, |b, cells| {
                b.iter(|| boundedness_sweep(black_box(cells), &quad, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
