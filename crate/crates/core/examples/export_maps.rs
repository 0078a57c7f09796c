// Render estimated maps as PGM images.

use sparsica::cli::{encode_pgm, render_map};
use sparsica::evaluate::whiten_dataset;
use sparsica::simgen::{generate, SimParams, GRID};
use sparsica::sparse_ica::{fit, SparseIcaConfig};

pub fn run_example() -> sparsica::Result<()> {
    let ds = generate(&SimParams::default().with_seed(3))?;
    let w = whiten_dataset(&ds, 3)?;
    let model = fit(&w.xw, &SparseIcaConfig::new(1.0).with_seed(3))?;
    let dir = std::env::temp_dir().join("sparsica-maps-example");
    std::fs::create_dir_all(&dir).map_err(|e| sparsica::Error::io(&dir, e))?;
    for k in 0..model.v.cols() {
        let pixels = render_map(&model.v.column(k), None);
        let path = dir.join(format!("component_{k}.pgm"));
        std::fs::write(&path, encode_pgm(GRID, GRID, &pixels)).map_err(|e| sparsica::Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
