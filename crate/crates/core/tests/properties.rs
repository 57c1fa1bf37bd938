mod common;

use common::*;
use proptest::prelude::*;
use tubalkit::{
    certificate_check, fft_tensor, gsc_delta, ifft_tensor, project_tnn, sc_measure_smooth,
    slice_spectrum, t_product, tnn, tsvd, tubal_rank, DenseTensor,
};

fn trailing() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        (1usize..5).prop_map(|a| vec![a]),
        (1usize..4, 1usize..4).prop_map(|(a, b)| vec![a, b]),
    ]
}

fn dims_of(n1: usize, n2: usize, t: &[usize]) -> Vec<usize> {
    let mut d = vec![n1, n2];
    d.extend_from_slice(t);
    d
}

fn close(a: &DenseTensor, b: &DenseTensor, tol: f64) -> bool {
    a.distance(b).unwrap() <= tol * b.fro_norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn t_product_is_associative(n1 in 1usize..5, n2 in 1usize..5, n3 in 1usize..5, n4 in 1usize..5,
                                t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let b = gaussian(&dims_of(n2, n3, &t), &mut rng);
        let c = gaussian(&dims_of(n3, n4, &t), &mut rng);
        let left = t_product(&t_product(&a, &b).unwrap(), &c).unwrap();
        let right = t_product(&a, &t_product(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-10));
    }

    #[test]
    fn t_product_distributes(n1 in 1usize..5, n2 in 1usize..5, n3 in 1usize..5,
                             t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let b = gaussian(&dims_of(n2, n3, &t), &mut rng);
        let c = gaussian(&dims_of(n2, n3, &t), &mut rng);
        let left = t_product(&a, &b.add(&c).unwrap()).unwrap();
        let right = t_product(&a, &b).unwrap().add(&t_product(&a, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-10));
    }

    #[test]
    fn transpose_reverses_products(n1 in 1usize..5, n2 in 1usize..5, n3 in 1usize..5,
                                   t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let b = gaussian(&dims_of(n2, n3, &t), &mut rng);
        let left = t_product(&a, &b).unwrap().t_transpose();
        let right = t_product(&b.t_transpose(), &a.t_transpose()).unwrap();
        prop_assert!(close(&left, &right, 1e-10));
        prop_assert_eq!(a.t_transpose().t_transpose(), a);
    }

    #[test]
    fn fourier_round_trip(n1 in 1usize..6, n2 in 1usize..6, t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let s = fft_tensor(&x);
        prop_assert!(s.symmetry_residual() <= 1e-12 * x.fro_norm().max(1.0));
        // Parseval over the slice average
        let n = x.num_slices() as f64;
        prop_assert!((s.fro_norm() / n.sqrt() - x.fro_norm()).abs() <= 1e-10 * x.fro_norm().max(1.0));
        prop_assert!(close(&ifft_tensor(&s).unwrap(), &x, 1e-12));
    }

    #[test]
    fn tsvd_reconstructs(n1 in 1usize..6, n2 in 1usize..6, t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let f = tsvd(&x).unwrap();
        let rec = t_product(&t_product(&f.u, &f.s).unwrap(), &f.v.t_transpose()).unwrap();
        prop_assert!(close(&rec, &x, 1e-10));
        prop_assert!(tubal_rank(&x) <= n1.min(n2));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(n1 in 1usize..6, n2 in 1usize..6, t in trailing(),
                                             frac in 0.05f64..1.5, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&dims_of(n1, n2, &t), &mut rng);
        let tau = frac * tnn(&x);
        let p = project_tnn(&x, tau).unwrap().projected;
        prop_assert!(tnn(&p) <= tau * (1.0 + 1e-9) + 1e-12);
        let pp = project_tnn(&p, tau).unwrap().projected;
        prop_assert!(close(&pp, &p, 1e-9));
        if frac >= 1.0 {
            prop_assert_eq!(&p, &x);
        }
    }

    #[test]
    fn projection_is_variationally_optimal(n1 in 1usize..5, n2 in 1usize..5, t in trailing(),
                                           frac in 0.05f64..0.95, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = dims_of(n1, n2, &t);
        let x = gaussian(&dims, &mut rng);
        let tau = frac * tnn(&x);
        let p = project_tnn(&x, tau).unwrap().projected;
        let resid = x.sub(&p).unwrap();
        for _ in 0..10 {
            let y = gaussian(&dims, &mut rng);
            let t = tnn(&y);
            let y = if t > tau { y.scale(tau / t) } else { y };
            let v = resid.inner(&y.sub(&p).unwrap()).unwrap();
            prop_assert!(v <= 1e-9 * x.fro_norm().powi(2).max(1.0), "{}", v);
        }
    }

    #[test]
    fn projection_is_nonexpansive(n1 in 1usize..5, n2 in 1usize..5, t in trailing(),
                                  frac in 0.05f64..0.95, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = dims_of(n1, n2, &t);
        let x = gaussian(&dims, &mut rng);
        let y = gaussian(&dims, &mut rng);
        let tau = frac * tnn(&x);
        let px = project_tnn(&x, tau).unwrap().projected;
        let py = project_tnn(&y, tau).unwrap().projected;
        prop_assert!(px.distance(&py).unwrap() <= x.distance(&y).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn certificate_is_sound(n in 2usize..6, t in trailing(), frac in 0.02f64..1.2,
                            r in 1usize..5, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&dims_of(n, n, &t), &mut rng);
        let r = r.min(n - 1);
        let tau = frac * tnn(&x);
        let cert = certificate_check(&slice_spectrum(&x), tau, r).unwrap();
        let full = project_tnn(&x, tau).unwrap();
        if cert.holds {
            prop_assert!(full.tubal_rank() <= r);
        }
    }

    #[test]
    fn delta_is_nondecreasing_in_rank(n in 3usize..7, t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = gaussian(&dims_of(n, n + 1, &t), &mut rng);
        let mut prev = f64::NEG_INFINITY;
        for r in 1..n {
            // delta(r) is undefined when some slice keeps sigma1 beyond rank r
            if let Ok(d) = gsc_delta(&g, r) {
                prop_assert!(d >= prev - 1e-12);
                prev = d;
            }
        }
    }

    #[test]
    fn sc_measure_is_rotation_invariant(n in 2usize..5, t in trailing(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = dims_of(n, n, &t);
        let x = gaussian(&dims, &mut rng);
        let g = gaussian(&dims, &mut rng);
        let q = tsvd(&gaussian(&dims, &mut rng)).unwrap().u;
        let qx = t_product(&q, &x).unwrap();
        let qg = t_product(&q, &g).unwrap();
        let a = sc_measure_smooth(&x, &g, 1e-8);
        let b = sc_measure_smooth(&qx, &qg, 1e-8);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
    }
}
