//! Per-slice matrix SVDs: a dense economy SVD and a truncated block subspace
//! iteration with Rayleigh-Ritz extraction.
//!
//! Both are generic over real and complex scalars so that self-conjugate
//! Fourier slices can be factored in real arithmetic.

use faer::{Mat, MatRef};
use nalgebra::{ComplexField, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar types a slice SVD can run on.
pub trait Scalar:
    ComplexField<RealField = f64> + faer::traits::ComplexField<Real = f64> + Copy
{
}
impl<T> Scalar for T where
    T: ComplexField<RealField = f64> + faer::traits::ComplexField<Real = f64> + Copy
{
}

fn view<T: Scalar>(a: &DMatrix<T>) -> MatRef<'_, T> {
    MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols())
}

fn owned<T: Scalar>(m: MatRef<'_, T>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `a ≈ u * diag(s) * v^H` with `s` nonincreasing.
#[derive(Clone, Debug)]
pub struct SliceSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> SliceSvd<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.s.len());
        self.s.truncate(k);
        self.u = self.u.columns(0, k).into_owned();
        self.v = self.v.columns(0, k).into_owned();
        self
    }

    /// `u * diag(weights) * v^H` over the leading `weights.len()` triplets.
    pub fn recombine(&self, weights: &[f64]) -> DMatrix<T> {
        let k = weights.len();
        let (m, n) = (self.u.nrows(), self.v.nrows());
        if k == 0 {
            return DMatrix::zeros(m, n);
        }
        let u = view(&self.u);
        let us = Mat::from_fn(m, k, |i, j| {
            <T as ComplexField>::from_real(weights[j]) * u[(i, j)]
        });
        let v = view(&self.v).subcols(0, k);
        owned((us * v.adjoint()).as_ref())
    }
}

fn faer_svd<T: Scalar>(a: MatRef<'_, T>) -> Option<(Mat<T>, Vec<f64>, Mat<T>)> {
    let svd = a.thin_svd().ok()?;
    let s = svd.S().column_vector();
    let s: Vec<f64> = (0..s.nrows()).map(|i| ComplexField::real(s[i])).collect();
    Some((svd.U().to_owned(), s, svd.V().to_owned()))
}

fn nalgebra_svd<T: Scalar>(a: &DMatrix<T>) -> SliceSvd<T> {
    let (m, n) = a.shape();
    let p = m.min(n);
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(m, p, |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(n, p, |r, c| vt[(order[c], r)].conjugate());
    SliceSvd { u, s, v }
}

/// Economy SVD (`k = min(m, n)`), sorted nonincreasing.
pub fn full_svd<T: Scalar>(a: &DMatrix<T>) -> SliceSvd<T> {
    let (m, n) = a.shape();
    if m.min(n) == 0 {
        return SliceSvd {
            u: DMatrix::zeros(m, 0),
            s: Vec::new(),
            v: DMatrix::zeros(n, 0),
        };
    }
    match faer_svd(view(a)) {
        Some((u, s, v)) => SliceSvd {
            u: owned(u.as_ref()),
            s,
            v: owned(v.as_ref()),
        },
        None => nalgebra_svd(a),
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values<T: Scalar>(a: &DMatrix<T>) -> Vec<f64> {
    if a.nrows().min(a.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = match view(a).singular_values() {
        Ok(s) => s,
        Err(_) => a.singular_values().iter().copied().collect(),
    };
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceOptions {
    /// Extra basis columns beyond the requested rank.
    pub oversample: usize,
    /// Residual tolerance relative to the leading singular value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self {
            oversample: 6,
            tol: 1e-12,
            max_iter: 300,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedSvd<T: Scalar> {
    pub svd: SliceSvd<T>,
    /// Orthonormal right basis of the final iteration, reusable as a warm start.
    pub basis: Option<DMatrix<T>>,
    pub iterations: usize,
    pub dense: bool,
}

fn start_basis<T: Scalar>(n: usize, b: usize) -> Mat<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab5_u64 ^ ((n as u64) << 20) ^ b as u64);
    let g = Mat::from_fn(n, b, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        <T as ComplexField>::from_real(g)
    });
    g.qr().compute_thin_Q()
}

/// Leading `k` singular triplets. Vectors are converged for the first
/// `vectors` triplets (residual `||a^H u_i - s_i v_i|| <= tol * s_1`); the
/// remaining values are converged to a stationary Ritz value. Falls back to
/// the dense SVD for small matrices or when the iteration stalls.
pub fn truncated_svd<T: Scalar>(
    a: &DMatrix<T>,
    k: usize,
    vectors: usize,
    warm: Option<&DMatrix<T>>,
    opts: &SubspaceOptions,
) -> TruncatedSvd<T> {
    let (m, n) = a.shape();
    let p = m.min(n);
    let k = k.min(p);
    let vectors = vectors.min(k);
    let b = (k + opts.oversample).min(p);
    let dense = |iterations| TruncatedSvd {
        svd: full_svd(a).truncate(k),
        basis: None,
        iterations,
        dense: true,
    };
    if k == 0 || 2 * b > p {
        return dense(0);
    }
    let af = view(a);
    let mut v: Mat<T> = match warm {
        Some(w) if w.nrows() == n && w.ncols() == b => view(w).to_owned(),
        _ => start_basis::<T>(n, b),
    };
    let mut prev_tail = f64::NAN;
    for it in 1..=opts.max_iter {
        let y = af * &v;
        let Some((yu, ys, yv)) = faer_svd(y.as_ref()) else {
            return dense(it);
        };
        let sigma1 = ys[0];
        let vr = &v * &yv;
        if sigma1 == 0.0 {
            return TruncatedSvd {
                svd: SliceSvd {
                    u: owned(yu.as_ref().subcols(0, k)),
                    s: vec![0.0; k],
                    v: owned(vr.as_ref().subcols(0, k)),
                },
                basis: Some(owned(vr.as_ref())),
                iterations: it,
                dense: false,
            };
        }
        let z = af.adjoint() * &yu;
        let worst = (0..vectors)
            .map(|i| {
                let scale = <T as ComplexField>::from_real(ys[i]);
                (0..n)
                    .map(|r| (z[(r, i)] - vr[(r, i)] * scale).modulus_squared())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let tail = ys[k - 1];
        let settled = (tail - prev_tail).abs() <= opts.tol * sigma1;
        if worst <= opts.tol * sigma1 && (vectors == k || settled) {
            return TruncatedSvd {
                svd: SliceSvd {
                    u: owned(yu.as_ref().subcols(0, k)),
                    s: ys[..k].to_vec(),
                    v: owned(vr.as_ref().subcols(0, k)),
                },
                basis: Some(owned(vr.as_ref())),
                iterations: it,
                dense: false,
            };
        }
        prev_tail = tail;
        v = z.qr().compute_thin_Q();
    }
    dense(opts.max_iter)
}
