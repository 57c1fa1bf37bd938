//! Discrete Fourier transform along the trailing dimensions and the
//! slice-wise (block-diagonal) representation it induces.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Result, TubalError};
use crate::tensor::{ravel, unravel, validate_dims, DenseTensor};

pub type CMatrix = DMatrix<Complex64>;

/// Default relative tolerance on imaginary residuals after inversion.
pub const DEFAULT_TOL_SYM: f64 = 1e-10;

/// Conjugate pairing of Fourier slices of a real tensor: slice `(i3, .., id)`
/// is the conjugate of slice `(-i3 mod n3, .., -id mod nd)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicePairing {
    partner: Vec<usize>,
}

impl SlicePairing {
    pub fn new(trailing: &[usize]) -> Self {
        let n: usize = trailing.iter().product();
        let mut idx = vec![0; trailing.len()];
        let partner = (0..n)
            .map(|k| {
                unravel(k, trailing, &mut idx);
                for (i, &m) in idx.iter_mut().zip(trailing) {
                    *i = (m - *i) % m;
                }
                ravel(&idx, trailing)
            })
            .collect();
        Self { partner }
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    pub fn partner(&self, k: usize) -> usize {
        self.partner[k]
    }

    pub fn is_self_paired(&self, k: usize) -> bool {
        self.partner[k] == k
    }

    /// One index per conjugate pair (the smaller one), in increasing order.
    pub fn representatives(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| k <= self.partner[k]).collect()
    }

    /// Evaluates `f` once per pair (in parallel) and fills partner slots with
    /// `mirror` of the representative's value.
    pub fn map_paired<T, F, G>(&self, f: F, mirror: G) -> Vec<T>
    where
        T: Send + Sync,
        F: Fn(usize) -> T + Sync + Send,
        G: Fn(&T) -> T,
    {
        let reps = self.representatives();
        let computed: Vec<T> = reps.par_iter().map(|&k| f(k)).collect();
        let mut slot = vec![usize::MAX; self.len()];
        for (j, &k) in reps.iter().enumerate() {
            slot[k] = j;
        }
        let mut out: Vec<Option<T>> = (0..self.len())
            .map(|k| {
                let p = self.partner[k];
                (k > p).then(|| mirror(&computed[slot[p]]))
            })
            .collect();
        for (value, &k) in computed.into_iter().zip(&reps) {
            out[k] = Some(value);
        }
        out.into_iter().map(|v| v.expect("every slice filled")).collect()
    }
}

/// The `N = n3 * .. * nd` complex frontal slices of a Fourier-transformed tensor,
/// i.e. the diagonal blocks of `bdiag`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSlices {
    dims: Vec<usize>,
    slices: Vec<CMatrix>,
}

impl FourierSlices {
    pub fn from_slices(dims: Vec<usize>, slices: Vec<CMatrix>) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims[2..].iter().product();
        if slices.len() != n {
            return Err(TubalError::InvalidShape {
                dims,
                reason: format!("{} slices supplied, expected {}", slices.len(), n),
            });
        }
        if let Some(bad) = slices
            .iter()
            .find(|s| s.nrows() != dims[0] || s.ncols() != dims[1])
        {
            return Err(TubalError::ShapeMismatch {
                context: "Fourier slice",
                left: vec![dims[0], dims[1]],
                right: vec![bad.nrows(), bad.ncols()],
            });
        }
        Ok(Self { dims, slices })
    }

    pub(crate) fn zeros_unchecked(dims: &[usize]) -> Self {
        let n = dims[2..].iter().product();
        Self {
            dims: dims.to_vec(),
            slices: vec![CMatrix::zeros(dims[0], dims[1]); n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &CMatrix {
        &self.slices[k]
    }

    pub fn into_slices(self) -> Vec<CMatrix> {
        self.slices
    }

    pub fn pairing(&self) -> SlicePairing {
        SlicePairing::new(&self.dims[2..])
    }

    pub fn fro_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise deviation from conjugate symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        let pairing = self.pairing();
        (0..self.num_slices())
            .map(|k| {
                let a = &self.slices[k];
                let b = &self.slices[pairing.partner(k)];
                a.iter()
                    .zip(b.iter())
                    .fold(0.0f64, |m, (x, y)| m.max((x - y.conj()).norm()))
            })
            .fold(0.0, f64::max)
    }
}

fn transform_trailing(buf: &mut [Complex64], dims: &[usize], direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let mut stride = dims[0] * dims[1];
    for &n in &dims[2..] {
        if n > 1 {
            let fft = planner.plan_fft(n, direction);
            let block = stride * n;
            let mut lines = vec![Complex64::default(); block];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for chunk in buf.chunks_exact_mut(block) {
                for k in 0..n {
                    let row = &chunk[k * stride..(k + 1) * stride];
                    for (p, &v) in row.iter().enumerate() {
                        lines[p * n + k] = v;
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                for k in 0..n {
                    let row = &mut chunk[k * stride..(k + 1) * stride];
                    for (p, v) in row.iter_mut().enumerate() {
                        *v = lines[p * n + k];
                    }
                }
            }
        }
        stride *= n;
    }
}

/// Fourier transform along dimensions `3..d`.
pub fn fft_tensor(x: &DenseTensor) -> FourierSlices {
    let dims = x.dims().to_vec();
    let mut buf: Vec<Complex64> = x.data().iter().map(|&a| Complex64::new(a, 0.0)).collect();
    transform_trailing(&mut buf, &dims, FftDirection::Forward);
    let m = dims[0] * dims[1];
    let slices = buf
        .chunks_exact(m)
        .map(|c| CMatrix::from_column_slice(dims[0], dims[1], c))
        .collect();
    FourierSlices { dims, slices }
}

/// Inverse transform with the default symmetry tolerance.
pub fn ifft_tensor(s: &FourierSlices) -> Result<DenseTensor> {
    ifft_tensor_with_tol(s, DEFAULT_TOL_SYM)
}

/// Inverse transform. Imaginary parts up to `tol_sym * ||s||_F` are dropped;
/// anything larger is reported as a symmetry violation.
pub fn ifft_tensor_with_tol(s: &FourierSlices, tol_sym: f64) -> Result<DenseTensor> {
    let dims = s.dims.clone();
    let n: usize = dims[2..].iter().product();
    let mut buf: Vec<Complex64> = Vec::with_capacity(n * dims[0] * dims[1]);
    for sl in &s.slices {
        buf.extend(sl.iter());
    }
    transform_trailing(&mut buf, &dims, FftDirection::Inverse);
    let scale = 1.0 / n as f64;
    let residual = buf.iter().fold(0.0f64, |m, v| m.max(v.im.abs())) * scale;
    let tolerance = tol_sym * s.fro_norm();
    if residual > tolerance {
        return Err(TubalError::SymmetryViolation {
            residual,
            tolerance,
        });
    }
    DenseTensor::new(dims, buf.iter().map(|v| v.re * scale).collect())
}

/// Tensor-tensor product computed slice-wise in the Fourier domain.
pub fn t_product(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    if x.order() != y.order() || x.trailing_dims() != y.trailing_dims() || x.n2() != y.n1() {
        return Err(TubalError::ShapeMismatch {
            context: "t-product",
            left: x.dims().to_vec(),
            right: y.dims().to_vec(),
        });
    }
    let xf = fft_tensor(x);
    let yf = fft_tensor(y);
    let pairing = xf.pairing();
    let slices = pairing.map_paired(|k| xf.slice(k) * yf.slice(k), |m| m.map(|v| v.conj()));
    let mut dims = x.dims().to_vec();
    dims[1] = y.n2();
    ifft_tensor(&FourierSlices::from_slices(dims, slices)?)
}
