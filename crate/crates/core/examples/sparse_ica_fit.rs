// Fit sparse ICA to a simulated dataset and score it against the truth.

use sparsica::evaluate::{match_components, whiten_dataset};
use sparsica::simgen::{generate, SimParams};
use sparsica::sparse_ica::{fit, SparseIcaConfig};

pub fn run_example() -> sparsica::Result<()> {
    let ds = generate(&SimParams::default().with_seed(7))?;
    let w = whiten_dataset(&ds, 3)?;
    let model = fit(&w.xw, &SparseIcaConfig::new(1.0).with_seed(7))?;
    println!(
        "restart {} won after {} iterations (converged: {}), objective {:.3}",
        model.restart_index,
        model.iterations,
        model.converged,
        model.final_objective()
    );
    println!("{} of {} map entries are nonzero", model.v.count_nonzero(), model.v.rows() * model.v.cols());
    let m = match_components(&model.v, &ds.truth_maps())?;
    println!("per-source similarity {:.3?}, mean {:.3}", m.per_component_corr, m.mean_corr);
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
