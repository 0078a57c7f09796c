// Choose the sparsity penalty by information criterion on a held-out dataset.

use sparsica::evaluate::select_benchmark_nu;
use sparsica::simgen::SimParams;
use sparsica::sparse_ica::{log_grid, SparseIcaConfig};

pub fn run_example() -> sparsica::Result<()> {
    let grid = log_grid(0.1, 10.0, 5);
    let config = SparseIcaConfig { restarts: 5, ..SparseIcaConfig::default() };
    let (nu, table) = select_benchmark_nu(&SimParams::default(), 3, &grid, &config)?;
    for (candidate, score) in &table {
        println!("nu {candidate:>8.4}  score {score:.1}");
    }
    println!("chosen nu = {nu}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
