//! Synthetic spatial-ICA benchmark: three digit-shaped sources on a 33×33
//! grid, mixed by random time courses over `T` frames, plus spatially smoothed
//! AR(1) noise scaled to a target signal-to-noise ratio.
//!
//! Orientation: `observed` is `T x 1089` (frames × pixels); pixel `p` sits at
//! row `p / 33`, column `p % 33`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{decode_csv, RngStream};
use crate::linalg::symmetric_eigen_desc;
use crate::matrix::Matrix;

pub const GRID: usize = 33;
pub const PIXELS: usize = GRID * GRID;
pub const N_SOURCES: usize = 3;

const MASK_CSV: [&str; N_SOURCES] = [
    include_str!("../data/digit_1.csv"),
    include_str!("../data/digit_22.csv"),
    include_str!("../data/digit_333.csv"),
];

/// Range of in-mask source intensities.
pub const SOURCE_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub frames: usize,
    pub snr: f64,
    pub ar_coeff: f64,
    pub fwhm: f64,
    pub field_sd: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            frames: 50,
            snr: 0.4,
            ar_coeff: 0.47,
            fwhm: 6.0,
            field_sd: 1.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::Value(format!("need at least 2 frames, got {}", self.frames)));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::Value(format!("snr must be positive and finite, got {}", self.snr)));
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return Err(Error::Value(format!("ar_coeff must lie in [0, 1), got {}", self.ar_coeff)));
        }
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(Error::Value(format!("fwhm must be positive, got {}", self.fwhm)));
        }
        if !(self.field_sd > 0.0 && self.field_sd.is_finite()) {
            return Err(Error::Value(format!("field_sd must be positive, got {}", self.field_sd)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    /// `3 x 1089` ground-truth maps.
    pub sources: Matrix,
    /// `T x 3` time courses.
    pub timecourses: Matrix,
    /// `T x 1089` noisy mixture.
    pub observed: Matrix,
    pub noise_sigma2: f64,
    pub params: SimParams,
}

impl SimulatedDataset {
    /// `timecourses · sources`.
    pub fn signal(&self) -> Matrix {
        self.timecourses.matmul(&self.sources).expect("shapes agree")
    }

    pub fn noise(&self) -> Matrix {
        self.observed.sub(&self.signal()).expect("shapes agree")
    }

    /// Ground truth laid out like estimated maps: `1089 x 3`.
    pub fn truth_maps(&self) -> Matrix {
        self.sources.transpose()
    }
}

/// The three built-in 33×33 digit masks ("1", "2 2", "3 3 3"), row-major.
pub fn digit_masks() -> [Vec<bool>; N_SOURCES] {
    MASK_CSV.map(|text| {
        let m = decode_csv(text).expect("bundled mask parses");
        assert_eq!(m.shape(), (GRID, GRID), "bundled mask has the grid shape");
        m.data().iter().map(|&v| v != 0.0).collect()
    })
}

/// Digit masks filled with independent uniform [0.5, 1] intensities; zero outside.
pub fn digit_sources(rng: &mut RngStream) -> Matrix {
    let masks = digit_masks();
    let (lo, hi) = SOURCE_RANGE;
    Matrix::from_fn(N_SOURCES, PIXELS, |k, p| if masks[k][p] { rng.uniform(lo, hi) } else { 0.0 })
}

/// Standard deviation of a Gaussian kernel with the given full width at half maximum.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

fn reflect(mut i: isize, n: isize) -> usize {
    // symmetric padding: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian smoother on the 33×33 grid with reflective boundaries.
///
/// The smoothed field is rescaled per pixel by the exact standard deviation of
/// the linear filter, so white input with SD `s` yields output with pointwise
/// SD `s` everywhere, including near the edges.
#[derive(Clone, Debug)]
pub struct GaussianSmoother {
    /// `GRID x GRID` 1-D filter including boundary reflection.
    filter: Matrix,
    /// Per-pixel output standard deviation for unit white input.
    pixel_sd: Vec<f64>,
}

impl GaussianSmoother {
    pub fn new(fwhm: f64) -> Result<Self> {
        if !(fwhm > 0.0 && fwhm.is_finite()) {
            return Err(Error::Value(format!("fwhm must be positive, got {fwhm}")));
        }
        let sigma = fwhm_to_sigma(fwhm);
        let radius = ((4.0 * sigma).ceil() as isize).max(1);
        let taps: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        let n = GRID as isize;
        let mut filter = Matrix::zeros(GRID, GRID);
        for i in 0..n {
            for (t, k) in (-radius..=radius).enumerate() {
                filter[(i as usize, reflect(i + k, n))] += taps[t] / total;
            }
        }
        let row_energy: Vec<f64> = (0..GRID)
            .map(|i| filter.row(i).iter().map(|w| w * w).sum())
            .collect();
        let pixel_sd = (0..PIXELS)
            .map(|p| (row_energy[p / GRID] * row_energy[p % GRID]).sqrt())
            .collect();
        Ok(GaussianSmoother { filter, pixel_sd })
    }

    /// Smooths a 33×33 field given as a row-major slice of length 1089.
    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        debug_assert_eq!(field.len(), PIXELS);
        let f = Matrix::new(GRID, GRID, field.to_vec()).expect("grid-sized field");
        let smoothed = self
            .filter
            .matmul(&f)
            .and_then(|m| m.matmul(&self.filter.transpose()))
            .expect("grid shapes");
        smoothed
            .data()
            .iter()
            .zip(&self.pixel_sd)
            .map(|(v, sd)| v / sd)
            .collect()
    }

    /// Draws a white Gaussian field with SD `sd` and smooths it.
    pub fn draw(&self, rng: &mut RngStream, sd: f64) -> Vec<f64> {
        let white: Vec<f64> = (0..PIXELS).map(|_| sd * rng.standard_normal()).collect();
        self.apply(&white)
    }
}

/// One smoothed Gaussian random field as a 33×33 matrix.
pub fn smoothed_field(rng: &mut RngStream, fwhm: f64, sd: f64) -> Result<Matrix> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Value(format!("sd must be positive, got {sd}")));
    }
    let smoother = GaussianSmoother::new(fwhm)?;
    Matrix::new(GRID, GRID, smoother.draw(rng, sd))
}

/// `T x 1089` AR(1) noise: frame 0 is a smoothed field, frame `t` is
/// `ar_coeff · frame(t−1)` plus a fresh smoothed field. The result is scaled
/// so the mean squared entry equals `sigma2`.
pub fn ar1_noise(rng: &mut RngStream, params: &SimParams, sigma2: f64) -> Result<Matrix> {
    params.validate()?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Value(format!("sigma2 must be positive, got {sigma2}")));
    }
    let smoother = GaussianSmoother::new(params.fwhm)?;
    let t_len = params.frames;
    let mut data = Vec::with_capacity(t_len * PIXELS);
    let mut previous = vec![0.0; PIXELS];
    for t in 0..t_len {
        let fresh = smoother.draw(rng, params.field_sd);
        let frame: Vec<f64> = if t == 0 {
            fresh
        } else {
            previous.iter().zip(&fresh).map(|(p, f)| params.ar_coeff * p + f).collect()
        };
        data.extend_from_slice(&frame);
        previous = frame;
    }
    let power = data.iter().map(|x| x * x).sum::<f64>() / data.len() as f64;
    let gain = (sigma2 / power).sqrt();
    data.iter_mut().for_each(|x| *x *= gain);
    Matrix::new(t_len, PIXELS, data)
}

/// `σ² = Σλ / (T · snr)`.
pub fn snr_to_sigma2(source_cov_eigs: &[f64], frames: usize, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Value(format!("snr must be positive, got {snr}")));
    }
    if frames == 0 {
        return Err(Error::Value("need at least one frame".into()));
    }
    if source_cov_eigs.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::Value("eigenvalues must be finite and non-negative".into()));
    }
    let total: f64 = source_cov_eigs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Value("all source covariance eigenvalues are zero".into()));
    }
    Ok(total / (frames as f64 * snr))
}

/// Nonzero eigenvalues of the `T x T` covariance of a `T x P` signal, treating
/// pixels as samples (the orientation used for spatial ICA).
pub fn signal_eigenvalues(signal: &Matrix) -> Result<Vec<f64>> {
    let cov = signal.transpose().column_covariance();
    let (values, _) = symmetric_eigen_desc(&cov)?;
    let largest = values.first().copied().unwrap_or(0.0);
    Ok(values
        .into_iter()
        .filter(|&v| v > crate::preprocess::RANK_EPS * largest)
        .collect())
}

/// `Σλ(signal) / (T · mean squared noise)`, recomputed from the dataset.
pub fn empirical_snr(ds: &SimulatedDataset) -> Result<f64> {
    let eigs = signal_eigenvalues(&ds.signal())?;
    let noise = ds.noise();
    let power = noise.data().iter().map(|x| x * x).sum::<f64>() / noise.data().len() as f64;
    Ok(eigs.iter().sum::<f64>() / (ds.params.frames as f64 * power))
}

/// Builds a full dataset. Sources, time courses and noise come from separate
/// substreams of `params.seed`.
pub fn generate(params: &SimParams) -> Result<SimulatedDataset> {
    params.validate()?;
    let root = RngStream::new(params.seed);
    let sources = digit_sources(&mut root.substream(0));
    let timecourses = root.substream(1).normal_matrix(params.frames, N_SOURCES);
    let signal = timecourses.matmul(&sources)?;
    let eigs = signal_eigenvalues(&signal)?;
    let noise_sigma2 = snr_to_sigma2(&eigs, params.frames, params.snr)?;
    let noise = ar1_noise(&mut root.substream(2), params, noise_sigma2)?;
    Ok(SimulatedDataset {
        sources,
        timecourses,
        observed: signal.add(&noise)?,
        noise_sigma2,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_are_disjoint_and_nonempty() {
        let masks = digit_masks();
        for k in 0..N_SOURCES {
            assert!(masks[k].iter().any(|&b| b));
            for j in k + 1..N_SOURCES {
                assert!(!masks[k].iter().zip(&masks[j]).any(|(&a, &b)| a && b));
            }
        }
    }

    #[test]
    fn snr_examples() {
        assert!((snr_to_sigma2(&[20.0, 20.0, 10.0], 50, 0.25).unwrap() - 4.0).abs() < 1e-15);
        assert!((snr_to_sigma2(&[10.0], 50, 0.4).unwrap() - 0.5).abs() < 1e-15);
        assert!(snr_to_sigma2(&[0.0, 0.0], 50, 0.4).is_err());
        assert!(snr_to_sigma2(&[1.0], 50, 0.0).is_err());
    }

    #[test]
    fn narrow_kernel_is_identity() {
        let s = GaussianSmoother::new(1e-6).unwrap();
        let field: Vec<f64> = (0..PIXELS).map(|i| (i as f64).sin()).collect();
        assert_eq!(s.apply(&field), field);
    }

    #[test]
    fn invalid_smoothing_params() {
        let mut rng = RngStream::new(0);
        assert!(smoothed_field(&mut rng, 0.0, 1.0).is_err());
        assert!(smoothed_field(&mut rng, 6.0, -1.0).is_err());
    }

    #[test]
    fn zero_ar_gives_independent_scaled_fields() {
        let params = SimParams { frames: 4, ar_coeff: 0.0, ..Default::default() };
        let noise = ar1_noise(&mut RngStream::new(8), &params, 2.0).unwrap();
        let smoother = GaussianSmoother::new(params.fwhm).unwrap();
        let mut rng = RngStream::new(8);
        let fields: Vec<Vec<f64>> = (0..4).map(|_| smoother.draw(&mut rng, 1.0)).collect();
        let ratio = noise[(0, 0)] / fields[0][0];
        for t in 0..4 {
            for p in (0..PIXELS).step_by(97) {
                assert!((noise[(t, p)] - ratio * fields[t][p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(SimParams { snr: -1.0, ..Default::default() }.validate().is_err());
        assert!(SimParams { ar_coeff: 1.0, ..Default::default() }.validate().is_err());
        assert!(SimParams { fwhm: 0.0, ..Default::default() }.validate().is_err());
        assert!(SimParams::default().validate().is_ok());
    }
}
