//! Dense real tensors of order three and higher.
//!
//! Entries are stored colexicographically: the first index runs fastest, so
//! every frontal slice `x(:, :, i3, .., id)` is a contiguous column-major
//! `n1 x n2` block and slices themselves are enumerated colexicographically.

use crate::error::{Result, TubalError};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

pub(crate) fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(TubalError::InvalidShape {
            dims: dims.to_vec(),
            reason: "order must be at least 3".into(),
        });
    }
    if dims.iter().any(|&n| n == 0) {
        return Err(TubalError::InvalidShape {
            dims: dims.to_vec(),
            reason: "every dimension must be positive".into(),
        });
    }
    Ok(())
}

/// Colexicographic multi-index of `linear` within `dims`.
pub fn unravel(mut linear: usize, dims: &[usize], out: &mut [usize]) {
    for (o, &n) in out.iter_mut().zip(dims) {
        *o = linear % n;
        linear /= n;
    }
}

/// Colexicographic linear position of `idx` within `dims`.
pub fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter()
        .zip(dims)
        .rev()
        .fold(0, |acc, (&i, &n)| acc * n + i)
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(TubalError::InvalidShape {
                dims,
                reason: format!("data has {} entries, expected {}", data.len(), len),
            });
        }
        Ok(Self { dims, data })
    }

    /// Zero-filled tensor that may have empty leading dimensions; used for
    /// width-zero factors.
    pub(crate) fn zeros_unchecked(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every colexicographic multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_dims(dims)?;
        let len: usize = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let data = (0..len)
            .map(|k| {
                unravel(k, dims, &mut idx);
                f(&idx)
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// The identity tensor: `I_n` in the first frontal slice, zeros elsewhere.
    pub fn identity(n: usize, trailing: &[usize]) -> Result<Self> {
        let mut dims = vec![n, n];
        dims.extend_from_slice(trailing);
        let mut t = Self::zeros(&dims)?;
        for i in 0..n {
            t.data[i + n * i] = 1.0;
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn n1(&self) -> usize {
        self.dims[0]
    }

    pub fn n2(&self) -> usize {
        self.dims[1]
    }

    pub fn trailing_dims(&self) -> &[usize] {
        &self.dims[2..]
    }

    /// Number of frontal slices, `n3 * .. * nd`.
    pub fn num_slices(&self) -> usize {
        self.dims[2..].iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[ravel(idx, &self.dims)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = ravel(idx, &self.dims);
        self.data[k] = value;
    }

    /// Column-major view of frontal slice `k` (colexicographic slice order).
    pub fn frontal_slice(&self, k: usize) -> &[f64] {
        let m = self.dims[0] * self.dims[1];
        &self.data[k * m..(k + 1) * m]
    }

    pub fn same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.dims != other.dims {
            return Err(TubalError::ShapeMismatch {
                context,
                left: self.dims.clone(),
                right: other.dims.clone(),
            });
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other, "inner product")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Sum of absolute entries.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other, "elementwise operation")?;
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|a| alpha * a)
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|a| *a *= alpha);
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Self) -> Result<()> {
        self.same_shape(x, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.same_shape(other, "distance")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Tensor transpose: every frontal slice is transposed and the slice
    /// indices `(i3, .., id)` are mapped to `(-i3 mod n3, .., -id mod nd)`.
    pub fn t_transpose(&self) -> Self {
        let (n1, n2) = (self.dims[0], self.dims[1]);
        let trailing = &self.dims[2..];
        let mut dims = vec![n2, n1];
        dims.extend_from_slice(trailing);
        let mut data = vec![0.0; self.data.len()];
        let m = n1 * n2;
        let mut idx = vec![0; trailing.len()];
        for k in 0..self.num_slices() {
            unravel(k, trailing, &mut idx);
            for (i, &n) in idx.iter_mut().zip(trailing) {
                *i = (n - *i) % n;
            }
            let kt = ravel(&idx, trailing);
            let src = &self.data[k * m..(k + 1) * m];
            let dst = &mut data[kt * m..(kt + 1) * m];
            for j in 0..n2 {
                for i in 0..n1 {
                    dst[j + n2 * i] = src[i + n1 * j];
                }
            }
        }
        Self { dims, data }
    }

    /// Entrywise sign with `sign(0) = 0`.
    pub fn signum0(&self) -> Self {
        self.map(|a| {
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }
}
