use sparsica::baselines::{amuse_fit, by_name, fastica_fit, infomax_fit, FastIca, Infomax, UnmixWarning, ALGORITHMS};
use sparsica::evaluate::match_components;
use sparsica::io::RngStream;
use sparsica::preprocess::whiten;
use sparsica::Matrix;

const P: usize = 4000;

fn mix(sources: &Matrix, seed: u64) -> Matrix {
    let a = RngStream::new(seed).normal_matrix(sources.cols(), sources.cols());
    sources.matmul(&a).unwrap()
}

fn uniform_sources(rng: &mut RngStream, q: usize) -> Matrix {
    Matrix::from_fn(P, q, |_, _| rng.uniform(-1.0, 1.0))
}

fn laplace_sources(rng: &mut RngStream, q: usize) -> Matrix {
    Matrix::from_fn(P, q, |_, _| {
        let u = rng.uniform(-0.5, 0.5);
        -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
    })
}

/// Two AR(1) sequences along the rows with distinct lag-1 autocorrelations.
fn ar_sources(rng: &mut RngStream) -> Matrix {
    let coeffs = [0.9, 0.1];
    let mut m = Matrix::zeros(P, 2);
    for (k, &phi) in coeffs.iter().enumerate() {
        let mut prev = 0.0;
        for i in 0..P {
            prev = phi * prev + rng.standard_normal();
            m[(i, k)] = prev;
        }
    }
    m
}

#[test]
fn fastica_recovers_uniform_sources() {
    let mut rng = RngStream::new(1);
    let s = uniform_sources(&mut rng, 3);
    let w = whiten(&mix(&s, 2), 3).unwrap();
    let res = fastica_fit(&w.xw, 3, 7, FastIca::default().max_iters, FastIca::default().tol).unwrap();
    assert!(res.converged);
    let m = match_components(&res.sources, &s).unwrap();
    assert!(m.mean_corr >= 0.99, "{m:?}");
}

#[test]
fn infomax_recovers_laplace_sources() {
    let mut rng = RngStream::new(3);
    let s = laplace_sources(&mut rng, 3);
    let w = whiten(&mix(&s, 4), 3).unwrap();
    let res = infomax_fit(&w.xw, 3, 7, &Infomax::default()).unwrap();
    let m = match_components(&res.sources, &s).unwrap();
    assert!(m.mean_corr >= 0.98, "{m:?}");
}

#[test]
fn amuse_recovers_autocorrelated_sources() {
    let mut rng = RngStream::new(5);
    let s = ar_sources(&mut rng);
    let w = whiten(&mix(&s, 6), 2).unwrap();
    let res = amuse_fit(&w.xw, 1).unwrap();
    assert!(res.warnings.is_empty());
    let m = match_components(&res.sources, &s).unwrap();
    assert!(m.mean_corr >= 0.98, "{m:?}");
}

#[test]
fn amuse_is_equivariant_to_the_mixing() {
    let mut rng = RngStream::new(8);
    let s = ar_sources(&mut rng);
    let a = amuse_fit(&whiten(&mix(&s, 1), 2).unwrap().xw, 1).unwrap();
    let b = amuse_fit(&whiten(&mix(&s, 2), 2).unwrap().xw, 1).unwrap();
    let m = match_components(&a.sources, &b.sources).unwrap();
    assert!(m.mean_corr > 1.0 - 1e-8, "{m:?}");
}

#[test]
fn every_algorithm_returns_orthogonal_mixing_and_consistent_sources() {
    let mut rng = RngStream::new(12);
    let s = laplace_sources(&mut rng, 3);
    let w = whiten(&mix(&s, 13), 3).unwrap();
    for name in ALGORITHMS {
        let alg = by_name(name, 0.1).unwrap();
        let res = alg.unmix(&w.xw, 42).unwrap();
        assert_eq!(res.sources.shape(), (P, 3), "{name}");
        assert!(sparsica::linalg::orthogonality_error(&res.mixing) < 1e-8, "{name}");
        if name != "sparse-ica" {
            let direct = w.xw.matmul(&res.mixing).unwrap();
            assert!(direct.sub(&res.sources).unwrap().frobenius_norm() < 1e-8, "{name}");
        }
        let again = alg.unmix(&w.xw, 42).unwrap();
        assert_eq!(again.sources, res.sources, "{name} is not reproducible");
    }
}

#[test]
fn amuse_flags_equal_autocorrelations() {
    // a rotating 4-cycle has zero symmetrized lag covariance: both eigenvalues vanish
    let rows: Vec<[f64; 2]> = (0..41)
        .map(|i| [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]][i % 4].map(|v| v * 2f64.sqrt()))
        .collect();
    let xw = Matrix::from_rows(&rows).unwrap();
    let res = amuse_fit(&xw, 1).unwrap();
    assert!(matches!(res.warnings.as_slice(), [UnmixWarning::Degenerate { .. }]));
}
