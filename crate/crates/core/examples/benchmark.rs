// A short repeated-trial benchmark, written to a temporary directory.

use sparsica::baselines::{by_name, ALGORITHMS};
use sparsica::evaluate::{run_benchmark, summary_csv, write_report, BenchmarkAlgorithm};
use sparsica::simgen::SimParams;

pub fn run_example() -> sparsica::Result<()> {
    let unmixers = ALGORITHMS
        .iter()
        .map(|name| by_name(name, 1.0))
        .collect::<sparsica::Result<Vec<_>>>()?;
    let algos: Vec<&dyn BenchmarkAlgorithm> = unmixers.iter().map(|u| u as &dyn BenchmarkAlgorithm).collect();
    let report = run_benchmark(&algos, 4, &SimParams::default(), 2024)?;
    print!("{}", summary_csv(&report));
    let dir = std::env::temp_dir().join("sparsica-benchmark-example");
    std::fs::create_dir_all(&dir).map_err(|e| sparsica::Error::io(&dir, e))?;
    write_report(&report, &dir)?;
    println!("report written to {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
