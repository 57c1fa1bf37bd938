//! Explicit block-circulant and block-diagonal matrices.
//!
//! These materialize objects that the rest of the crate never builds and
//! exist to cross-check the Fourier-domain code paths on small inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TubalError};
use crate::fourier::{CMatrix, FourierSlices};
use crate::tensor::{ravel, unravel, DenseTensor};

/// Upper bound on the number of entries an explicit matrix may hold.
pub const MAX_EXPLICIT_ENTRIES: usize = 10_000_000;

fn guard(rows: usize, cols: usize) -> Result<()> {
    let entries = rows.saturating_mul(cols);
    if entries > MAX_EXPLICIT_ENTRIES {
        return Err(TubalError::SizeGuard {
            entries,
            limit: MAX_EXPLICIT_ENTRIES,
        });
    }
    Ok(())
}

/// The `n1 N x n2 N` block-circulant matrix. Block `(a, b)` holds frontal
/// slice `a - b` (componentwise modulo the trailing dimensions).
pub fn bcirc_explicit(x: &DenseTensor) -> Result<DMatrix<f64>> {
    let (n1, n2, n) = (x.n1(), x.n2(), x.num_slices());
    guard(n1 * n, n2 * n)?;
    let trailing = x.trailing_dims();
    let mut out = DMatrix::zeros(n1 * n, n2 * n);
    let (mut ia, mut ib, mut id) = (
        vec![0; trailing.len()],
        vec![0; trailing.len()],
        vec![0; trailing.len()],
    );
    for a in 0..n {
        unravel(a, trailing, &mut ia);
        for b in 0..n {
            unravel(b, trailing, &mut ib);
            for j in 0..trailing.len() {
                id[j] = (ia[j] + trailing[j] - ib[j]) % trailing[j];
            }
            let slice = x.frontal_slice(ravel(&id, trailing));
            for c in 0..n2 {
                for r in 0..n1 {
                    out[(a * n1 + r, b * n2 + c)] = slice[r + n1 * c];
                }
            }
        }
    }
    Ok(out)
}

/// Stacks the frontal slices vertically: the first block column of `bcirc`.
pub fn unfold(x: &DenseTensor) -> DMatrix<f64> {
    let (n1, n2, n) = (x.n1(), x.n2(), x.num_slices());
    DMatrix::from_fn(n1 * n, n2, |r, c| x.frontal_slice(r / n1)[r % n1 + n1 * c])
}

/// Inverse of [`unfold`] for a tensor of shape `dims`.
pub fn fold(m: &DMatrix<f64>, dims: &[usize]) -> Result<DenseTensor> {
    let n1 = dims[0];
    let n: usize = dims[2..].iter().product();
    if m.nrows() != n1 * n || m.ncols() != dims[1] {
        return Err(TubalError::ShapeMismatch {
            context: "fold",
            left: dims.to_vec(),
            right: vec![m.nrows(), m.ncols()],
        });
    }
    let mut data = Vec::with_capacity(m.len());
    for k in 0..n {
        for c in 0..dims[1] {
            for r in 0..n1 {
                data.push(m[(k * n1 + r, c)]);
            }
        }
    }
    DenseTensor::new(dims.to_vec(), data)
}

/// `fold(bcirc(x) * unfold(y))`.
pub fn t_product_explicit(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    if x.trailing_dims() != y.trailing_dims() || x.n2() != y.n1() {
        return Err(TubalError::ShapeMismatch {
            context: "t-product",
            left: x.dims().to_vec(),
            right: y.dims().to_vec(),
        });
    }
    let prod = bcirc_explicit(x)? * unfold(y);
    let mut dims = x.dims().to_vec();
    dims[1] = y.n2();
    fold(&prod, &dims)
}

/// Unnormalized DFT matrix with `omega = exp(-2 pi i / n)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| {
        let angle = -2.0 * std::f64::consts::PI * ((a * b) % n) as f64 / n as f64;
        Complex64::from_polar(1.0, angle)
    })
}

/// `F_nd ⊗ .. ⊗ F_n3`, acting on colexicographic slice indices.
pub fn dft_kron(trailing: &[usize]) -> CMatrix {
    trailing
        .iter()
        .fold(CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)), |acc, &n| {
            dft_matrix(n).kronecker(&acc)
        })
}

/// Block-diagonal matrix with the Fourier slices on the diagonal.
pub fn bdiag_explicit(s: &FourierSlices) -> Result<CMatrix> {
    let dims = s.dims();
    let (n1, n2, n) = (dims[0], dims[1], s.num_slices());
    guard(n1 * n, n2 * n)?;
    let mut out = CMatrix::zeros(n1 * n, n2 * n);
    for (k, sl) in s.slices().iter().enumerate() {
        out.view_mut((k * n1, k * n2), (n1, n2)).copy_from(sl);
    }
    Ok(out)
}

/// `(F ⊗ I_n1) bcirc(x) (F^{-1} ⊗ I_n2)`, which is block diagonal for real `x`.
pub fn bdiag_via_bcirc(x: &DenseTensor) -> Result<CMatrix> {
    let n = x.num_slices();
    let f = dft_kron(x.trailing_dims());
    let finv = f.adjoint().map(|v| v / n as f64);
    let bc = bcirc_explicit(x)?.map(|v| Complex64::new(v, 0.0));
    let left = f.kronecker(&CMatrix::identity(x.n1(), x.n1()));
    let right = finv.kronecker(&CMatrix::identity(x.n2(), x.n2()));
    Ok(left * bc * right)
}
