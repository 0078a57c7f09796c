// Spatial PCA whitening: frames become variables, pixels become samples.

use sparsica::evaluate::whiten_dataset;
use sparsica::simgen::{generate, SimParams};
use sparsica::Matrix;

pub fn run_example() -> sparsica::Result<()> {
    let ds = generate(&SimParams::default().with_seed(1))?;
    let w = whiten_dataset(&ds, 3)?;
    let err = w.xw.column_covariance().sub(&Matrix::identity(3))?.frobenius_norm();
    println!("kept eigenvalues {:?}", w.eigenvalues);
    println!("xw is {}x{}, ||cov - I|| = {err:.2e}", w.xw.rows(), w.xw.cols());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
