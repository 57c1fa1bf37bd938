mod common;

use common::*;
use num_complex::Complex64;
use tubalkit::fourier::{ifft_tensor_with_tol, FourierSlices};
use tubalkit::io::{load_tensor, parse_text, read_binary, save_tensor, write_binary, write_text};
use tubalkit::oracle::{bcirc_explicit, bdiag_explicit, bdiag_via_bcirc, t_product_explicit};
use tubalkit::{average_rank, fft_tensor, ifft_tensor, t_product, CMatrix, DenseTensor, TubalError};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn length_two_transform() {
    let x = DenseTensor::new(vec![1, 1, 2], vec![3.0, 1.0]).unwrap();
    let xf = fft_tensor(&x);
    assert_eq!(xf.slice(0)[(0, 0)], c(4.0));
    assert_eq!(xf.slice(1)[(0, 0)], c(2.0));
    let back = ifft_tensor(&xf).unwrap();
    assert_eq!(back.data(), &[3.0, 1.0]);
}

#[test]
fn zero_tensor_transforms_to_zero() {
    let x = DenseTensor::zeros(&[3, 2, 4, 2]).unwrap();
    assert!(fft_tensor(&x).slices().iter().all(|s| s.iter().all(|v| v.norm() == 0.0)));
}

#[test]
fn rejects_low_order_and_bad_lengths() {
    assert!(matches!(
        DenseTensor::zeros(&[3, 3]),
        Err(TubalError::InvalidShape { .. })
    ));
    assert!(DenseTensor::new(vec![2, 2, 2], vec![0.0; 7]).is_err());
}

#[test]
fn fourier_slices_match_bcirc_conjugation() {
    let mut rng = rng(1);
    let x = gaussian(&[2, 3, 2, 3], &mut rng);
    let via = bdiag_via_bcirc(&x).unwrap();
    let direct = bdiag_explicit(&fft_tensor(&x)).unwrap();
    let err = (via - direct).iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!(err < 1e-10, "{err}");
}

#[test]
fn round_trip_is_identity() {
    let mut rng = rng(2);
    for _ in 0..50 {
        let x = gaussian(&[3, 3, 4, 2], &mut rng);
        let back = ifft_tensor(&fft_tensor(&x)).unwrap();
        assert!(rel_err(&back, &x) < 1e-12);
    }
}

#[test]
fn round_trip_large_odd_shape() {
    let mut rng = rng(3);
    let x = gaussian(&[20, 30, 35, 7], &mut rng);
    let xf = fft_tensor(&x);
    assert!(xf.symmetry_residual() <= 1e-10 * x.fro_norm());
    assert!(rel_err(&ifft_tensor(&xf).unwrap(), &x) < 1e-12);
}

#[test]
fn asymmetric_slices_are_rejected() {
    let mut rng = rng(4);
    let x = gaussian(&[2, 2, 3], &mut rng);
    let mut slices = fft_tensor(&x).into_slices();
    slices[1][(0, 0)] += c(1.0);
    let s = FourierSlices::from_slices(x.dims().to_vec(), slices).unwrap();
    assert!(matches!(
        ifft_tensor_with_tol(&s, 1e-10),
        Err(TubalError::SymmetryViolation { .. })
    ));
}

#[test]
fn scalar_circular_convolution() {
    let x = DenseTensor::new(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
    let y = DenseTensor::new(vec![1, 1, 2], vec![3.0, 4.0]).unwrap();
    let z = t_product(&x, &y).unwrap();
    assert!((z.data()[0] - 11.0).abs() < 1e-12);
    assert!((z.data()[1] - 10.0).abs() < 1e-12);
}

#[test]
fn identity_is_neutral() {
    let mut rng = rng(5);
    let x = gaussian(&[3, 4, 3, 2], &mut rng);
    let id = DenseTensor::identity(4, &[3, 2]).unwrap();
    assert!(rel_err(&t_product(&x, &id).unwrap(), &x) < 1e-12);
}

#[test]
fn t_product_matches_explicit_bcirc() {
    let mut rng = rng(6);
    let x = gaussian(&[3, 2, 2, 2], &mut rng);
    let y = gaussian(&[2, 4, 2, 2], &mut rng);
    let fast = t_product(&x, &y).unwrap();
    let slow = t_product_explicit(&x, &y).unwrap();
    assert!(fast.distance(&slow).unwrap() < 1e-10);
}

#[test]
fn t_product_rejects_mismatched_shapes() {
    let x = DenseTensor::zeros(&[3, 2, 2]).unwrap();
    let y = DenseTensor::zeros(&[3, 2, 2]).unwrap();
    assert!(matches!(
        t_product(&x, &y),
        Err(TubalError::ShapeMismatch { .. })
    ));
}

#[test]
fn transpose_of_scalar_tubes_reverses_tail() {
    let x = DenseTensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(x.t_transpose().data(), &[1.0, 3.0, 2.0]);
}

#[test]
fn transpose_is_involution_and_conjugates_slices() {
    let mut rng = rng(7);
    let x = gaussian(&[2, 3, 2, 2], &mut rng);
    assert_eq!(x.t_transpose().t_transpose(), x);
    let xf = fft_tensor(&x);
    let tf = fft_tensor(&x.t_transpose());
    for k in 0..xf.num_slices() {
        let diff = (tf.slice(k) - xf.slice(k).adjoint()).norm();
        assert!(diff < 1e-12);
    }
}

#[test]
fn bcirc_small_cases() {
    let x = DenseTensor::new(vec![1, 1, 2], vec![5.0, 7.0]).unwrap();
    let b = bcirc_explicit(&x).unwrap();
    assert_eq!(b.as_slice(), &[5.0, 7.0, 7.0, 5.0]);
    let id = DenseTensor::identity(2, &[2]).unwrap();
    let b = bcirc_explicit(&id).unwrap();
    assert_eq!(b, nalgebra::DMatrix::identity(4, 4));
}

#[test]
fn bcirc_size_guard() {
    let x = DenseTensor::zeros(&[40, 40, 50, 2]).unwrap();
    assert!(matches!(
        bcirc_explicit(&x),
        Err(TubalError::SizeGuard { .. })
    ));
}

#[test]
fn bcirc_rank_is_scaled_average_rank() {
    let mut rng = rng(8);
    for r in 1..=3 {
        let a = gaussian(&[5, r, 3, 2], &mut rng);
        let b = gaussian(&[r, 4, 3, 2], &mut rng);
        let x = t_product(&a, &b).unwrap();
        let bc = bcirc_explicit(&x).unwrap();
        let rank = bc.rank(1e-8 * bc.norm());
        let avg = average_rank(&x);
        assert_eq!(rank, avg.total, "average rank {avg}");
        assert_eq!(avg.slices, 6);
    }
}

#[test]
fn inner_products_agree_across_domains() {
    let mut rng = rng(9);
    let x = gaussian(&[3, 3, 3, 2], &mut rng);
    let y = gaussian(&[3, 3, 3, 2], &mut rng);
    let n = x.num_slices() as f64;
    let (xf, yf) = (fft_tensor(&x), fft_tensor(&y));
    let fourier_inner: f64 = xf
        .slices()
        .iter()
        .zip(yf.slices())
        .map(|(a, b)| a.dotc(b).re)
        .sum::<f64>()
        / n;
    let direct = x.inner(&y).unwrap();
    assert!((fourier_inner - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    assert!((xf.fro_norm() / n.sqrt() - x.fro_norm()).abs() <= 1e-10 * x.fro_norm());
    assert!((x.inner(&x).unwrap() - x.fro_norm().powi(2)).abs() < 1e-10);
    let zero = DenseTensor::zeros(x.dims()).unwrap();
    assert_eq!(x.inner(&zero).unwrap(), 0.0);
}

#[test]
fn binary_and_text_round_trips() {
    let mut rng = rng(10);
    let x = gaussian(&[2, 3, 4], &mut rng);
    let mut buf = Vec::new();
    write_binary(&x, &mut buf).unwrap();
    assert_eq!(&buf[..6], b"TTEN1\0");
    assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 3);
    assert_eq!(read_binary(buf.as_slice()).unwrap(), x);

    let mut txt = Vec::new();
    write_text(&x, &mut txt).unwrap();
    let back = parse_text(std::str::from_utf8(&txt).unwrap()).unwrap();
    assert_eq!(back, x);

    let dir = tempfile::tempdir().unwrap();
    for name in ["a.tten", "b.txt"] {
        let p = dir.path().join(name);
        save_tensor(&x, &p).unwrap();
        assert_eq!(load_tensor(&p).unwrap(), x);
    }
}

#[test]
fn text_parse_errors_carry_lines() {
    let err = parse_text("dims: 1 1 2\n1.0 oops\n").unwrap_err();
    assert!(matches!(err, TubalError::Parse { line: 2, .. }));
    assert!(parse_text("1 2 3").is_err());
    assert!(read_binary(&b"TTEN2\0"[..]).is_err());
}

#[test]
fn bdiag_layout() {
    let xf = FourierSlices::from_slices(
        vec![1, 1, 2],
        vec![CMatrix::from_element(1, 1, c(4.0)), CMatrix::from_element(1, 1, c(2.0))],
    )
    .unwrap();
    let b = bdiag_explicit(&xf).unwrap();
    assert_eq!(b[(0, 0)], c(4.0));
    assert_eq!(b[(1, 1)], c(2.0));
    assert_eq!(b[(0, 1)], c(0.0));
}
