use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use rehost_core::container::scan_bytes;
use rehost_core::decompress::detect_kernel_version;
use rehost_core::disasm::linear_sweep_with;
use rehost_core::functions::KernelAnalysis;
use rehost_core::identify::{identify_pointers_with, PointerCatalog};
use rehost_core::Execution;

const LOAD_BASE: u32 = 0xc000_8000;
const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn kernel() -> Vec<u8> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/linux-4.14.98/Image");
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn bench(c: &mut Criterion) {
    let image = kernel();
    let catalog = PointerCatalog::builtin();
    let version = detect_kernel_version(&image);

    let mut g = c.benchmark_group("sweep");
    g.throughput(Throughput::Bytes(image.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| linear_sweep_with(&image, LOAD_BASE, exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("scan");
    g.throughput(Throughput::Bytes(image.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| scan_bytes(&image, exec)));
    }
    g.finish();

    let mut g = c.benchmark_group("analysis");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| KernelAnalysis::new_with(image.clone(), LOAD_BASE, exec).unwrap()));
    }
    g.finish();

    let analysis = KernelAnalysis::new_with(image.clone(), LOAD_BASE, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("identify");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| identify_pointers_with(&analysis, &catalog, version.as_deref(), exec)));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
