//! Euclidean projection onto the tensor-nuclear-norm ball `{y : tnn(y) <= tau}`.
//!
//! The projection soft-thresholds every Fourier slice's singular values at one
//! global level `sigma`, found by an exact water-fill over the sorted values.
//! The rank-`r` variant only computes leading singular triplets; a certificate
//! on the rank-`(r+1)` spectrum tells whether that shortcut is exact.

use serde::Serialize;

use crate::error::{Result, TubalError};
use crate::fourier::fft_tensor;
use crate::linalg::SubspaceOptions;
use crate::tensor::DenseTensor;
use crate::tfactor::{
    FourierSvd, SliceRank, SliceSpectrum, SvdStats, WarmStarts, DEFAULT_RANK_TOL,
};

/// Relative slack used to break floating-point ties against the `(r+1)`-th value.
pub const TIE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub projected: DenseTensor,
    /// Soft-threshold level; zero when the input was already feasible.
    pub threshold: f64,
    pub active_rank_per_slice: Vec<usize>,
    /// Set when the rank-`r` path produced the exact projection.
    pub certificate_rank: Option<usize>,
}

impl ProjectionResult {
    pub fn tubal_rank(&self) -> usize {
        self.active_rank_per_slice.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub holds: bool,
    pub value: f64,
    /// Largest `(r+1)`-th singular value over all slices.
    pub sigma_next_max: f64,
    /// Number of values strictly above `sigma_next_max`, over all slices.
    pub count_above: usize,
}

fn check_radius(tau: f64) -> Result<()> {
    if tau < 0.0 || tau.is_nan() {
        return Err(TubalError::NegativeRadius(tau));
    }
    Ok(())
}

/// Evaluates whether the exact projection of the tensor with this spectrum
/// has tubal rank at most `r`. Needs `r + 1` values per slice (or every value
/// when `r + 1` exceeds the slice size).
pub fn certificate_check(spectrum: &SliceSpectrum, tau: f64, r: usize) -> Result<Certificate> {
    check_radius(tau)?;
    let dims = spectrum.dims();
    let p = dims[0].min(dims[1]);
    let required = (r + 1).min(p);
    if spectrum.depth() < required {
        return Err(TubalError::InsufficientSpectrum {
            available: spectrum.depth(),
            required,
        });
    }
    let n = spectrum.num_slices() as f64;
    let sigma_next_max = (0..spectrum.num_slices())
        .map(|k| spectrum.value(k, r))
        .fold(0.0, f64::max);
    let cut = sigma_next_max + TIE_SLACK * spectrum.sigma_max();
    let mut count_above = 0;
    let mut sum = 0.0;
    for vals in spectrum.values() {
        for &s in vals.iter().take_while(|&&s| s > cut) {
            count_above += 1;
            sum += s - sigma_next_max;
        }
    }
    let value = sum / n;
    // A spectrum that already has tubal rank <= r stays that way under any
    // soft-thresholding, including the feasible case where nothing moves.
    let low_rank = sigma_next_max <= TIE_SLACK * spectrum.sigma_max();
    Ok(Certificate {
        holds: value >= tau || low_rank,
        value,
        sigma_next_max,
        count_above,
    })
}

/// Level `sigma >= 0` with `sum_k sum_i max(0, s_ki - sigma) = tau * n_slices`;
/// zero when the values already sum to at most that.
pub fn water_fill<'a>(values: impl IntoIterator<Item = &'a [f64]>, tau: f64, n_slices: usize) -> f64 {
    let mut all: Vec<f64> = values.into_iter().flatten().copied().collect();
    let target = tau * n_slices as f64;
    let total: f64 = all.iter().sum();
    if total <= target {
        return 0.0;
    }
    all.sort_by(|a, b| b.total_cmp(a));
    if target <= 0.0 {
        return all[0];
    }
    let mut prefix = 0.0;
    let mut sigma = 0.0;
    for (j, &v) in all.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - target) / (j + 1) as f64;
        if v > candidate {
            sigma = candidate;
        } else {
            break;
        }
    }
    sigma.max(0.0)
}

fn threshold_weights(spectrum: &SliceSpectrum, depth: usize, sigma: f64) -> Vec<Vec<f64>> {
    spectrum
        .values()
        .iter()
        .map(|v| {
            v.iter()
                .take(depth)
                .map(|&s| s - sigma)
                .take_while(|&w| w > 0.0)
                .collect()
        })
        .collect()
}

fn assemble(
    svd: &FourierSvd,
    depth: usize,
    tau: f64,
    certificate_rank: Option<usize>,
) -> Result<ProjectionResult> {
    let spectrum = svd.spectrum();
    let n = spectrum.num_slices();
    let sigma = if tau == 0.0 {
        spectrum.sigma_max()
    } else {
        water_fill(spectrum.values().iter().map(|v| &v[..depth.min(v.len())]), tau, n)
    };
    let weights = if tau == 0.0 {
        vec![Vec::new(); n]
    } else {
        threshold_weights(&spectrum, depth, sigma)
    };
    Ok(ProjectionResult {
        projected: svd.recombine(&weights)?,
        threshold: sigma,
        active_rank_per_slice: weights.iter().map(Vec::len).collect(),
        certificate_rank,
    })
}

fn zero_result(x: &DenseTensor, spectrum_max: f64) -> Result<ProjectionResult> {
    Ok(ProjectionResult {
        projected: DenseTensor::zeros(x.dims())?,
        threshold: spectrum_max,
        active_rank_per_slice: vec![0; x.num_slices()],
        certificate_rank: None,
    })
}

fn full_projection(x: &DenseTensor, tau: f64) -> Result<(ProjectionResult, SliceSpectrum, SvdStats)> {
    let (svd, stats) = FourierSvd::compute(
        &fft_tensor(x),
        SliceRank::Full,
        None,
        &SubspaceOptions::default(),
    );
    let spectrum = svd.spectrum();
    if spectrum.tnn() <= tau {
        let result = ProjectionResult {
            projected: x.clone(),
            threshold: 0.0,
            active_rank_per_slice: spectrum.slice_ranks(DEFAULT_RANK_TOL),
            certificate_rank: None,
        };
        return Ok((result, spectrum, stats));
    }
    if tau == 0.0 {
        return Ok((zero_result(x, spectrum.sigma_max())?, spectrum, stats));
    }
    let p = x.n1().min(x.n2());
    Ok((assemble(&svd, p, tau, None)?, spectrum, stats))
}

/// Exact projection onto the ball of radius `tau`.
pub fn project_tnn(x: &DenseTensor, tau: f64) -> Result<ProjectionResult> {
    check_radius(tau)?;
    Ok(full_projection(x, tau)?.0)
}

fn check_truncation_rank(x: &DenseTensor, r: usize) -> Result<()> {
    let p = x.n1().min(x.n2());
    if r >= p {
        return Err(TubalError::RankOutOfRange {
            rank: r,
            min: 0,
            max: p.saturating_sub(1),
        });
    }
    Ok(())
}

fn truncated_projection(
    x: &DenseTensor,
    tau: f64,
    r: usize,
    warm: Option<&mut WarmStarts>,
    opts: &SubspaceOptions,
) -> Result<(ProjectionResult, Certificate, SvdStats)> {
    let (svd, stats) = FourierSvd::compute(
        &fft_tensor(x),
        SliceRank::Leading { k: r + 1, vectors: r },
        warm,
        opts,
    );
    let spectrum = svd.spectrum();
    let cert = certificate_check(&spectrum, tau, r)?;
    if tau == 0.0 {
        return Ok((zero_result(x, spectrum.sigma_max())?, cert, stats));
    }
    let n = spectrum.num_slices() as f64;
    let head: f64 = spectrum.values().iter().flat_map(|v| v.iter().take(r)).sum();
    if head <= tau * n && cert.holds {
        let result = ProjectionResult {
            projected: x.clone(),
            threshold: 0.0,
            active_rank_per_slice: spectrum
                .values()
                .iter()
                .map(|v| {
                    v.iter()
                        .take(r)
                        .filter(|&&s| s > DEFAULT_RANK_TOL * spectrum.sigma_max())
                        .count()
                })
                .collect(),
            certificate_rank: Some(r),
        };
        return Ok((result, cert, stats));
    }
    let result = assemble(&svd, r, tau, cert.holds.then_some(r))?;
    Ok((result, cert, stats))
}

/// Projection using only the leading `r` triplets of every slice. Equal to
/// [`project_tnn`] whenever the rank-`r` certificate holds (then
/// `certificate_rank` is set); otherwise a low-rank surrogate.
pub fn truncated_project_tnn(x: &DenseTensor, tau: f64, r: usize) -> Result<ProjectionResult> {
    check_radius(tau)?;
    check_truncation_rank(x, r)?;
    Ok(truncated_projection(x, tau, r, None, &SubspaceOptions::default())?.0)
}

/// Entrywise clamp to `[-bound, bound]`.
pub fn project_linf(y: &DenseTensor, bound: f64) -> DenseTensor {
    y.map(|v| v.clamp(-bound, bound))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProjectionMode {
    Full,
    /// Rank-`r` projection, redone at full rank whenever the certificate fails.
    TruncatedCertified(usize),
    /// Rank-`r` surrogate without verification.
    TruncatedUnchecked(usize),
}

#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub result: ProjectionResult,
    pub certificate: Option<Certificate>,
    /// The certified path failed and the projection was recomputed at full rank.
    pub escalated: bool,
    pub stats: SvdStats,
}

/// Projection onto a fixed ball, keeping warm starts across calls.
#[derive(Clone, Debug)]
pub struct TnnProjector {
    tau: f64,
    mode: ProjectionMode,
    monitor_rank: Option<usize>,
    opts: SubspaceOptions,
    warm: WarmStarts,
}

impl TnnProjector {
    pub fn new(tau: f64, mode: ProjectionMode) -> Result<Self> {
        check_radius(tau)?;
        Ok(Self {
            tau,
            mode,
            monitor_rank: None,
            opts: SubspaceOptions::default(),
            warm: Vec::new(),
        })
    }

    /// In full mode, also evaluate the rank-`r` certificate on every call.
    pub fn with_monitor_rank(mut self, r: Option<usize>) -> Self {
        self.monitor_rank = r;
        self
    }

    pub fn with_subspace_options(mut self, opts: SubspaceOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn project(&mut self, x: &DenseTensor) -> Result<ProjectionOutcome> {
        match self.mode {
            ProjectionMode::Full => {
                let (result, spectrum, stats) = full_projection(x, self.tau)?;
                let certificate = match self.monitor_rank {
                    Some(r) => Some(certificate_check(&spectrum, self.tau, r)?),
                    None => None,
                };
                Ok(ProjectionOutcome {
                    result,
                    certificate,
                    escalated: false,
                    stats,
                })
            }
            ProjectionMode::TruncatedCertified(r) => {
                check_truncation_rank(x, r)?;
                let (result, cert, mut stats) =
                    truncated_projection(x, self.tau, r, Some(&mut self.warm), &self.opts)?;
                if cert.holds {
                    return Ok(ProjectionOutcome {
                        result,
                        certificate: Some(cert),
                        escalated: false,
                        stats,
                    });
                }
                let (full, _, more) = full_projection(x, self.tau)?;
                stats.merge(&more);
                Ok(ProjectionOutcome {
                    result: full,
                    certificate: Some(cert),
                    escalated: true,
                    stats,
                })
            }
            ProjectionMode::TruncatedUnchecked(r) => {
                check_truncation_rank(x, r)?;
                let (svd, stats) = FourierSvd::compute(
                    &fft_tensor(x),
                    SliceRank::Leading { k: r, vectors: r },
                    Some(&mut self.warm),
                    &self.opts,
                );
                let result = if self.tau == 0.0 {
                    zero_result(x, svd.spectrum().sigma_max())?
                } else {
                    assemble(&svd, r, self.tau, None)?
                };
                Ok(ProjectionOutcome {
                    result,
                    certificate: None,
                    escalated: false,
                    stats,
                })
            }
        }
    }
}
