// Run every registered algorithm on the same whitened data.

use sparsica::baselines::{by_name, ALGORITHMS};
use sparsica::evaluate::{match_components, whiten_dataset};
use sparsica::simgen::{generate, SimParams};

pub fn run_example() -> sparsica::Result<()> {
    let ds = generate(&SimParams::default().with_seed(11))?;
    let w = whiten_dataset(&ds, 3)?;
    for name in ALGORITHMS {
        let res = by_name(name, 1.0)?.unmix(&w.xw, 5)?;
        let m = match_components(&res.sources, &ds.truth_maps())?;
        println!(
            "{name:<10} similarity {:.3}  iterations {:>4}  warnings {:?}",
            m.mean_corr, res.iterations, res.warnings
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
