//! t-SVD, tensor ranks and the spectral/nuclear norms.
//!
//! Matrix SVDs are taken of the Fourier slices. Only one slice of every
//! conjugate pair is factored; its partner receives the conjugated factors,
//! which keeps the inverse transform real by construction.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TubalError};
use crate::fourier::{fft_tensor, ifft_tensor, CMatrix, FourierSlices, SlicePairing};
use crate::linalg::{full_svd, singular_values, truncated_svd, SliceSvd, SubspaceOptions};
use crate::tensor::DenseTensor;

/// Numerical rank cutoff relative to the global largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Which part of each slice's SVD to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceRank {
    Full,
    /// Leading `k` values, with converged vectors for the first `vectors`.
    Leading { k: usize, vectors: usize },
}

/// Right basis kept between calls to warm-start the truncated solver.
#[derive(Clone, Debug)]
pub enum WarmBasis {
    Real(DMatrix<f64>),
    Complex(CMatrix),
}

/// Per-slice warm starts, indexed by Fourier slice.
pub type WarmStarts = Vec<Option<WarmBasis>>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SvdStats {
    /// Matrix SVDs actually computed (one per conjugate pair).
    pub factored: usize,
    /// Sum over factored slices of the number of triplets kept.
    pub rank_budget: usize,
    /// Truncated requests answered by a dense SVD.
    pub dense: usize,
    pub iterations: usize,
}

impl SvdStats {
    pub fn merge(&mut self, other: &SvdStats) {
        self.factored += other.factored;
        self.rank_budget += other.rank_budget;
        self.dense += other.dense;
        self.iterations += other.iterations;
    }
}

/// Per-slice SVD factors in the Fourier domain.
#[derive(Clone, Debug)]
pub struct FourierSvd {
    dims: Vec<usize>,
    slices: Vec<SliceSvd<Complex64>>,
}

fn complexify(s: SliceSvd<f64>) -> SliceSvd<Complex64> {
    SliceSvd {
        u: s.u.map(|x| Complex64::new(x, 0.0)),
        s: s.s,
        v: s.v.map(|x| Complex64::new(x, 0.0)),
    }
}

fn conj_svd(s: &SliceSvd<Complex64>) -> SliceSvd<Complex64> {
    SliceSvd {
        u: s.u.map(|z| z.conj()),
        s: s.s.clone(),
        v: s.v.map(|z| z.conj()),
    }
}

struct Factored {
    svd: SliceSvd<Complex64>,
    warm: Option<WarmBasis>,
    dense: bool,
    iterations: usize,
}

fn factor_slice(
    a: &CMatrix,
    real: bool,
    rank: SliceRank,
    warm: Option<&WarmBasis>,
    opts: &SubspaceOptions,
) -> Factored {
    match (rank, real) {
        (SliceRank::Full, true) => Factored {
            svd: complexify(full_svd(&a.map(|z| z.re))),
            warm: None,
            dense: true,
            iterations: 0,
        },
        (SliceRank::Full, false) => Factored {
            svd: full_svd(a),
            warm: None,
            dense: true,
            iterations: 0,
        },
        (SliceRank::Leading { k, vectors }, true) => {
            let w = match warm {
                Some(WarmBasis::Real(m)) => Some(m),
                _ => None,
            };
            let t = truncated_svd(&a.map(|z| z.re), k, vectors, w, opts);
            Factored {
                svd: complexify(t.svd),
                warm: t.basis.map(WarmBasis::Real),
                dense: t.dense,
                iterations: t.iterations,
            }
        }
        (SliceRank::Leading { k, vectors }, false) => {
            let w = match warm {
                Some(WarmBasis::Complex(m)) => Some(m),
                _ => None,
            };
            let t = truncated_svd(a, k, vectors, w, opts);
            Factored {
                svd: t.svd,
                warm: t.basis.map(WarmBasis::Complex),
                dense: t.dense,
                iterations: t.iterations,
            }
        }
    }
}

impl FourierSvd {
    /// Factors every conjugate pair of `xf` once. Self-paired slices are
    /// factored in real arithmetic. `warm` is read and refreshed in place.
    pub fn compute(
        xf: &FourierSlices,
        rank: SliceRank,
        warm: Option<&mut WarmStarts>,
        opts: &SubspaceOptions,
    ) -> (Self, SvdStats) {
        let pairing = xf.pairing();
        let n = pairing.len();
        let warm_in: Option<&WarmStarts> = warm.as_deref();
        let results: Vec<Option<Factored>> = pairing.map_paired(
            |k| {
                let w = warm_in.and_then(|ws| ws.get(k)).and_then(|o| o.as_ref());
                Some(factor_slice(xf.slice(k), pairing.is_self_paired(k), rank, w, opts))
            },
            |_| None,
        );
        let mut stats = SvdStats::default();
        let mut reps: Vec<Option<SliceSvd<Complex64>>> = (0..n).map(|_| None).collect();
        let mut new_warm: WarmStarts = (0..n).map(|_| None).collect();
        for (k, r) in results.into_iter().enumerate() {
            if let Some(f) = r {
                stats.factored += 1;
                stats.rank_budget += f.svd.rank();
                stats.dense += usize::from(f.dense && rank != SliceRank::Full);
                stats.iterations += f.iterations;
                new_warm[k] = f.warm;
                reps[k] = Some(f.svd);
            }
        }
        let mut mirrored: Vec<Option<SliceSvd<Complex64>>> = (0..n)
            .map(|k| {
                let p = pairing.partner(k);
                (k > p).then(|| conj_svd(reps[p].as_ref().expect("representative factored")))
            })
            .collect();
        let slices = (0..n)
            .map(|k| {
                reps[k]
                    .take()
                    .or_else(|| mirrored[k].take())
                    .expect("every slice factored")
            })
            .collect();
        if let Some(ws) = warm {
            *ws = new_warm;
        }
        (
            Self {
                dims: xf.dims().to_vec(),
                slices,
            },
            stats,
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn slices(&self) -> &[SliceSvd<Complex64>] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &SliceSvd<Complex64> {
        &self.slices[k]
    }

    pub fn spectrum(&self) -> SliceSpectrum {
        SliceSpectrum {
            dims: self.dims.clone(),
            values: self.slices.iter().map(|s| s.s.clone()).collect(),
        }
    }

    /// Real tensor whose Fourier slice `k` is `u_k diag(weights[k]) v_k^H`.
    pub fn recombine(&self, weights: &[Vec<f64>]) -> Result<DenseTensor> {
        let pairing = SlicePairing::new(&self.dims[2..]);
        let slices = pairing.map_paired(
            |k| {
                let w = &weights[k];
                if w.is_empty() {
                    CMatrix::zeros(self.dims[0], self.dims[1])
                } else {
                    self.slices[k].recombine(w)
                }
            },
            |m| m.map(|z| z.conj()),
        );
        ifft_tensor(&FourierSlices::from_slices(self.dims.clone(), slices)?)
    }

    /// Assembles real factors of common width `width`; slice `k` keeps its
    /// leading `keep[k]` triplets and is zero-padded beyond.
    fn factors(&self, width: usize, keep: &[usize]) -> Result<TsvdFactors> {
        let (n1, n2) = (self.dims[0], self.dims[1]);
        if width == 0 {
            let shape = |first: usize| {
                let mut d = self.dims.clone();
                d[0] = first;
                d[1] = 0;
                d
            };
            return Ok(TsvdFactors {
                u: DenseTensor::zeros_unchecked(&shape(n1)),
                s: DenseTensor::zeros_unchecked(&shape(0)),
                v: DenseTensor::zeros_unchecked(&shape(n2)),
                u_hat: FourierSlices::zeros_unchecked(&shape(n1)),
                s_hat: FourierSlices::zeros_unchecked(&shape(0)),
                v_hat: FourierSlices::zeros_unchecked(&shape(n2)),
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut uh = Vec::with_capacity(self.slices.len());
        let mut sh = Vec::with_capacity(self.slices.len());
        let mut vh = Vec::with_capacity(self.slices.len());
        for (sl, &kk) in self.slices.iter().zip(keep) {
            let kk = kk.min(sl.rank()).min(width);
            uh.push(CMatrix::from_fn(n1, width, |r, c| if c < kk { sl.u[(r, c)] } else { zero }));
            vh.push(CMatrix::from_fn(n2, width, |r, c| if c < kk { sl.v[(r, c)] } else { zero }));
            sh.push(CMatrix::from_fn(width, width, |r, c| {
                if r == c && r < kk {
                    Complex64::new(sl.s[r], 0.0)
                } else {
                    zero
                }
            }));
        }
        let with_width = |first: usize| {
            let mut d = self.dims.clone();
            d[0] = first;
            d[1] = width;
            d
        };
        let u_hat = FourierSlices::from_slices(with_width(n1), uh)?;
        let s_hat = FourierSlices::from_slices(with_width(width), sh)?;
        let v_hat = FourierSlices::from_slices(with_width(n2), vh)?;
        Ok(TsvdFactors {
            u: ifft_tensor(&u_hat)?,
            s: ifft_tensor(&s_hat)?,
            v: ifft_tensor(&v_hat)?,
            u_hat,
            s_hat,
            v_hat,
        })
    }
}

/// Number of triplets per slice plus the `x = u * s * v^T` factors.
#[derive(Clone, Debug)]
pub struct TsvdFactors {
    pub u: DenseTensor,
    pub s: DenseTensor,
    pub v: DenseTensor,
    pub u_hat: FourierSlices,
    pub s_hat: FourierSlices,
    pub v_hat: FourierSlices,
}

impl TsvdFactors {
    /// Common width `k` of the factors.
    pub fn width(&self) -> usize {
        self.s.n2()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        if self.width() == 0 {
            let mut dims = self.u.dims().to_vec();
            dims[1] = self.v.n1();
            return DenseTensor::zeros(&dims);
        }
        crate::fourier::t_product(
            &crate::fourier::t_product(&self.u, &self.s)?,
            &self.v.t_transpose(),
        )
    }
}

/// Singular values of every Fourier slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSpectrum {
    dims: Vec<usize>,
    values: Vec<Vec<f64>>,
}

/// `total / slices`, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AverageRank {
    pub total: usize,
    pub slices: usize,
}

impl AverageRank {
    pub fn value(&self) -> f64 {
        self.total as f64 / self.slices as f64
    }
}

impl fmt::Display for AverageRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.total, self.slices)
    }
}

impl SliceSpectrum {
    pub fn new(dims: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        crate::tensor::validate_dims(&dims)?;
        let n: usize = dims[2..].iter().product();
        if values.len() != n {
            return Err(TubalError::InvalidShape {
                dims,
                reason: format!("{} slice spectra supplied, expected {}", values.len(), n),
            });
        }
        for v in &values {
            if v.iter().any(|&s| s < 0.0 || s.is_nan()) || v.windows(2).any(|w| w[0] < w[1]) {
                return Err(TubalError::InvalidParameter {
                    name: "spectrum",
                    reason: "singular values must be nonnegative and nonincreasing".into(),
                });
            }
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_slices(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Fewest values supplied for any slice.
    pub fn depth(&self) -> usize {
        self.values.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn sigma_max(&self) -> f64 {
        self.values
            .iter()
            .filter_map(|v| v.first().copied())
            .fold(0.0, f64::max)
    }

    pub fn spectral_norm(&self) -> f64 {
        self.sigma_max()
    }

    pub fn tnn(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() / self.values.len() as f64
    }

    /// `i`-th (0-based) value of slice `k`, zero past the supplied depth.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k].get(i).copied().unwrap_or(0.0)
    }

    pub fn slice_ranks(&self, tol: f64) -> Vec<usize> {
        let cut = tol * self.sigma_max();
        self.values
            .iter()
            .map(|v| v.iter().filter(|&&s| s > cut).count())
            .collect()
    }

    pub fn tubal_rank(&self, tol: f64) -> usize {
        self.slice_ranks(tol).into_iter().max().unwrap_or(0)
    }

    pub fn average_rank(&self, tol: f64) -> AverageRank {
        AverageRank {
            total: self.slice_ranks(tol).into_iter().sum(),
            slices: self.values.len(),
        }
    }
}

fn check_rank(x: &DenseTensor, r: usize) -> Result<()> {
    let p = x.n1().min(x.n2());
    if r > p {
        return Err(TubalError::RankOutOfRange {
            rank: r,
            min: 0,
            max: p,
        });
    }
    Ok(())
}

/// Singular values of every Fourier slice of `x`.
pub fn slice_spectrum(x: &DenseTensor) -> SliceSpectrum {
    slice_spectrum_fourier(&fft_tensor(x))
}

pub fn slice_spectrum_fourier(xf: &FourierSlices) -> SliceSpectrum {
    let pairing = xf.pairing();
    let values = pairing.map_paired(
        |k| {
            if pairing.is_self_paired(k) {
                singular_values(&xf.slice(k).map(|z| z.re))
            } else {
                singular_values(xf.slice(k))
            }
        },
        Clone::clone,
    );
    SliceSpectrum {
        dims: xf.dims().to_vec(),
        values,
    }
}

/// Leading `k` singular values of every slice.
pub fn leading_spectrum(xf: &FourierSlices, k: usize) -> SliceSpectrum {
    let (svd, _) = FourierSvd::compute(
        xf,
        SliceRank::Leading { k, vectors: 0 },
        None,
        &SubspaceOptions::default(),
    );
    svd.spectrum()
}

/// Full t-SVD with factors of width `min(n1, n2)`.
pub fn tsvd(x: &DenseTensor) -> Result<TsvdFactors> {
    let (f, _) = FourierSvd::compute(
        &fft_tensor(x),
        SliceRank::Full,
        None,
        &SubspaceOptions::default(),
    );
    let p = x.n1().min(x.n2());
    f.factors(p, &vec![p; x.num_slices()])
}

/// Leading-`r` t-SVD.
pub fn rank_r_tsvd(x: &DenseTensor, r: usize) -> Result<TsvdFactors> {
    check_rank(x, r)?;
    let (f, _) = FourierSvd::compute(
        &fft_tensor(x),
        SliceRank::Leading { k: r, vectors: r },
        None,
        &SubspaceOptions::default(),
    );
    f.factors(r, &vec![r; x.num_slices()])
}

/// Skinny t-SVD with the default rank tolerance.
pub fn skinny_tsvd(x: &DenseTensor) -> Result<TsvdFactors> {
    skinny_tsvd_with_tol(x, DEFAULT_RANK_TOL)
}

/// Each slice keeps its own numerical rank; all factors share the tubal rank
/// as width, padding with zero columns.
pub fn skinny_tsvd_with_tol(x: &DenseTensor, tol: f64) -> Result<TsvdFactors> {
    let (f, _) = FourierSvd::compute(
        &fft_tensor(x),
        SliceRank::Full,
        None,
        &SubspaceOptions::default(),
    );
    let ranks = f.spectrum().slice_ranks(tol);
    let width = ranks.iter().copied().max().unwrap_or(0);
    f.factors(width, &ranks)
}

pub fn tubal_rank(x: &DenseTensor) -> usize {
    slice_spectrum(x).tubal_rank(DEFAULT_RANK_TOL)
}

pub fn average_rank(x: &DenseTensor) -> AverageRank {
    slice_spectrum(x).average_rank(DEFAULT_RANK_TOL)
}

pub fn spectral_norm(x: &DenseTensor) -> f64 {
    slice_spectrum(x).spectral_norm()
}

/// Tensor nuclear norm: the mean over slices of the slice nuclear norms.
pub fn tnn(x: &DenseTensor) -> f64 {
    slice_spectrum(x).tnn()
}
