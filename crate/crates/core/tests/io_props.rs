use proptest::prelude::*;
use sparsica::io::{
    decode_binary, decode_csv, encode_binary, encode_csv, gaussian_draws, load_matrix, save_matrix, Format,
    RngStream, HEADER_LEN,
};
use sparsica::{Error, Matrix};
use statrs::distribution::{ContinuousCDF, Normal};

fn any_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), r * c)
            .prop_map(move |data| Matrix::new(r, c, data).unwrap())
    })
}

fn bits(m: &Matrix) -> Vec<u64> {
    m.data().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn binary_round_trip_is_bitwise(m in any_matrix()) {
        let bytes = encode_binary(&m);
        prop_assert_eq!(bytes.len(), HEADER_LEN + 8 * m.rows() * m.cols());
        let back = decode_binary(&bytes).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn csv_round_trip_is_bitwise(m in any_matrix()) {
        let back = decode_csv(&encode_csv(&m)).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn truncated_binary_is_rejected(m in any_matrix(), cut in 1usize..9) {
        let bytes = encode_binary(&m);
        prop_assert!(decode_binary(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn negative_zero_and_subnormals_survive_files() {
    let m = Matrix::new(1, 4, vec![-0.0, f64::MIN_POSITIVE / 4.0, f64::MAX, -1e-300]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("m.bin", Format::Binary), ("m.csv", Format::Csv)] {
        let path = dir.path().join(name);
        save_matrix(&m, &path, fmt).unwrap();
        assert_eq!(Format::from_path(&path), fmt);
        assert_eq!(bits(&load_matrix(&path, fmt).unwrap()), bits(&m));
    }
}

#[test]
fn missing_file_is_io_error() {
    let err = load_matrix("/nonexistent/m.bin", Format::Binary).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn gaussian_draws_pass_kolmogorov_smirnov() {
    let mut rng = RngStream::new(2024);
    let n = 5000;
    let mut xs = gaussian_draws(&mut rng, n, 2.0, 3.0).unwrap();
    xs.sort_by(f64::total_cmp);
    let dist = Normal::new(2.0, 3.0).unwrap();
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    let critical = 1.63 / (n as f64).sqrt();
    assert!(d < critical, "KS statistic {d} >= {critical}");
}

#[test]
fn gaussian_draws_reject_bad_sd() {
    let mut rng = RngStream::new(1);
    assert!(matches!(gaussian_draws(&mut rng, 3, 0.0, 0.0), Err(Error::Value(_))));
    assert!(matches!(gaussian_draws(&mut rng, 3, 0.0, -1.0), Err(Error::Value(_))));
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let a = RngStream::new(9).substream(3).normal_matrix(2, 2);
    let b = RngStream::new(9).substream(3).normal_matrix(2, 2);
    let c = RngStream::new(9).substream(4).normal_matrix(2, 2);
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
}
