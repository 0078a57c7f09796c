// Generate one synthetic dataset and check its calibration.

use sparsica::simgen::{empirical_snr, generate, SimParams, N_SOURCES};

pub fn run_example() -> sparsica::Result<()> {
    let params = SimParams::default().with_seed(42);
    let ds = generate(&params)?;
    println!("observed: {} frames x {} pixels", ds.observed.rows(), ds.observed.cols());
    println!("noise variance {:.5}, empirical snr {:.4}", ds.noise_sigma2, empirical_snr(&ds)?);
    for k in 0..N_SOURCES {
        let active = ds.sources.row(k).iter().filter(|&&v| v != 0.0).count();
        println!("source {k}: {active} active pixels");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
