//! Optimality diagnostics: strict-complementarity measures, dual gaps,
//! gradient alignment and the initialization radii that guarantee low-rank
//! projected steps.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, TubalError};
use crate::fourier::fft_tensor;
use crate::linalg::{singular_values, SubspaceOptions};
use crate::solvers::SaddleObjective;
use crate::tensor::DenseTensor;
use crate::tfactor::{
    leading_spectrum, slice_spectrum, slice_spectrum_fourier, FourierSvd, SliceRank, SliceSpectrum,
    DEFAULT_RANK_TOL,
};

/// Relative tolerance for deciding that two singular values tie.
pub const TIE_TOL: f64 = 1e-8;

/// Feasibility slack used by the gap evaluators.
const FEAS_TOL: f64 = 1e-8;

fn check_feasible(x: &DenseTensor, tau: f64) -> Result<()> {
    let t = slice_spectrum(x).tnn();
    if t > tau * (1.0 + FEAS_TOL) + 1e-300 {
        return Err(TubalError::InfeasiblePoint { tnn: t, tau });
    }
    Ok(())
}

/// Largest singular value over all Fourier slices.
pub(crate) fn sigma1(g: &DenseTensor) -> f64 {
    leading_spectrum(&fft_tensor(g), 1).sigma_max()
}

pub(crate) fn smooth_gap_unchecked(x: &DenseTensor, grad: &DenseTensor, tau: f64) -> Result<f64> {
    Ok(x.inner(grad)? + tau * sigma1(grad))
}

/// `max_{tnn(Z) <= tau} <x - Z, grad>`, which bounds `f(x) - f*` for convex `f`.
pub fn dual_gap_smooth(x: &DenseTensor, grad: &DenseTensor, tau: f64) -> Result<f64> {
    x.same_shape(grad, "dual gap")?;
    check_feasible(x, tau)?;
    smooth_gap_unchecked(x, grad, tau)
}

pub(crate) fn saddle_gap_unchecked(
    z: &DenseTensor,
    w: &DenseTensor,
    sobj: &dyn SaddleObjective,
    tau: f64,
) -> Result<f64> {
    let gx = sobj.grad_x(z, w);
    let gy = sobj.grad_y(z, w);
    Ok(z.inner(&gx)? + tau * sigma1(&gx) + sobj.dual_support(&gy) - w.inner(&gy)?)
}

/// Primal-dual gap of `(z, w)`: the primal part as in [`dual_gap_smooth`] with
/// `grad_x`, plus `max_{y in K} <y - w, grad_y>`.
pub fn dual_gap_saddle(
    z: &DenseTensor,
    w: &DenseTensor,
    sobj: &dyn SaddleObjective,
    tau: f64,
) -> Result<f64> {
    check_feasible(z, tau)?;
    let proj = sobj.project_dual(w);
    let off = proj.distance(w)?;
    if off > FEAS_TOL * w.fro_norm().max(1.0) {
        return Err(TubalError::InfeasibleDual { distance: off });
    }
    saddle_gap_unchecked(z, w, sobj, tau)
}

/// The point attaining the smooth dual gap: `-(tau N / m) ifft(U V^H)` over the
/// `m` tied top singular pairs of the transformed gradient.
pub fn dual_gap_maximizer(grad: &DenseTensor, tau: f64) -> Result<DenseTensor> {
    let gf = fft_tensor(grad);
    let (svd, _) = FourierSvd::compute(&gf, SliceRank::Full, None, &SubspaceOptions::default());
    let sv = svd.spectrum();
    let s1 = sv.sigma_max();
    if s1 == 0.0 {
        return DenseTensor::zeros(grad.dims());
    }
    let cut = s1 * (1.0 - TIE_TOL);
    let total: usize = sv
        .values()
        .iter()
        .map(|v| v.iter().filter(|&&s| s >= cut).count())
        .sum();
    let w = -tau * sv.num_slices() as f64 / total as f64;
    let weights: Vec<Vec<f64>> = sv
        .values()
        .iter()
        .map(|v| v.iter().map(|&s| if s >= cut { w } else { 0.0 }).collect())
        .collect();
    svd.recombine(&weights)
}

/// Top-value structure of a transformed gradient.
#[derive(Clone, Debug)]
struct GradSpectrum {
    spectrum: SliceSpectrum,
    sigma1: f64,
    /// Multiplicity of each slice's own top value; zero for vanishing slices.
    slice_mult: Vec<usize>,
    /// Multiplicity of the global top value in the block-diagonal matrix.
    total_mult: usize,
    nnzb: usize,
}

impl GradSpectrum {
    fn new(grad: &DenseTensor) -> Self {
        Self::from_spectrum(slice_spectrum(grad))
    }

    fn from_spectrum(spectrum: SliceSpectrum) -> Self {
        let sigma1 = spectrum.sigma_max();
        let tie = TIE_TOL * sigma1;
        let zero = 1e-12 * sigma1;
        let slice_mult: Vec<usize> = spectrum
            .values()
            .iter()
            .map(|v| {
                let top = v.first().copied().unwrap_or(0.0);
                if sigma1 == 0.0 || top <= zero {
                    0
                } else {
                    v.iter().filter(|&&s| s >= top - tie).count()
                }
            })
            .collect();
        let total_mult = spectrum
            .values()
            .iter()
            .map(|v| v.iter().filter(|&&s| sigma1 > 0.0 && s >= sigma1 - tie).count())
            .sum();
        let nnzb = slice_mult.iter().filter(|&&m| m > 0).count();
        Self {
            spectrum,
            sigma1,
            slice_mult,
            total_mult,
            nnzb,
        }
    }

    fn max_mult(&self) -> usize {
        self.slice_mult.iter().copied().max().unwrap_or(0)
    }

    fn p(&self) -> usize {
        self.spectrum.dims()[0].min(self.spectrum.dims()[1])
    }

    fn delta(&self, r: usize) -> f64 {
        let next = (0..self.spectrum.num_slices())
            .map(|k| self.spectrum.value(k, r))
            .fold(0.0, f64::max);
        self.sigma1 - next
    }

    fn checked_delta(&self, r: usize) -> Result<f64> {
        let m = self.max_mult();
        if r < m || r >= self.p() {
            return Err(TubalError::RankOutOfRange {
                rank: r,
                min: m,
                max: self.p().saturating_sub(1),
            });
        }
        Ok(self.delta(r))
    }

    fn frobenius_factor(&self, r: usize) -> Result<f64> {
        let d1 = self.checked_delta(r)?;
        let m = self.max_mult().max(1) as f64;
        let mix = (m * self.nnzb as f64).sqrt() / self.total_mult.max(1) as f64;
        let r2 = r + 1 - self.max_mult().max(1);
        let d2 = self.delta(r2);
        Ok((d1 / (1.0 + mix)).max(d2 / (1.0 / m.sqrt() + mix)))
    }
}

/// `sigma_1(G) - max_k sigma_{r+1}(G_k)` over the Fourier slices of `grad`.
pub fn gsc_delta(grad: &DenseTensor, r: usize) -> Result<f64> {
    GradSpectrum::new(grad).checked_delta(r)
}

fn sc_from(xs: &SliceSpectrum, gs: &SliceSpectrum, tol_rank: f64) -> f64 {
    xs.slice_ranks(tol_rank)
        .iter()
        .enumerate()
        .map(|(k, &rk)| gs.value(k, 0) - gs.value(k, rk))
        .fold(f64::INFINITY, f64::min)
}

/// Minimum over slices of `sigma_1(G_k) - sigma_{r_k+1}(G_k)` where `r_k` is the
/// numerical rank of the matching slice of `x_star`.
pub fn sc_measure_smooth(x_star: &DenseTensor, grad: &DenseTensor, tol_rank: f64) -> f64 {
    sc_from(&slice_spectrum(x_star), &slice_spectrum(grad), tol_rank)
}

/// Same measure with the primal gradient of a saddle function at `(x, y)`.
pub fn sc_measure_saddle(
    x_star: &DenseTensor,
    y_star: &DenseTensor,
    sobj: &dyn SaddleObjective,
    tol_rank: f64,
) -> f64 {
    sc_measure_smooth(x_star, &sobj.grad_x(x_star, y_star), tol_rank)
}

/// Radius in Frobenius norm around an optimum within which a projected
/// gradient step with step `eta` has tubal rank at most `r`.
pub fn radius_bound_smooth(grad_at_opt: &DenseTensor, r: usize, eta: f64, beta: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    check_nonneg("beta", beta)?;
    let gs = GradSpectrum::new(grad_at_opt);
    let n = grad_at_opt.num_slices() as f64;
    Ok(eta / (n.sqrt() * (1.0 + eta * beta)) * gs.frobenius_factor(r)?)
}

/// Same radius measured in the spectral norm; `beta2` is the smoothness
/// constant with respect to that norm.
pub fn radius_bound_spectral(grad_at_opt: &DenseTensor, r: usize, eta: f64, beta2: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    check_nonneg("beta2", beta2)?;
    let d = gsc_delta(grad_at_opt, r)?;
    Ok(eta * d / (2.0 * (1.0 + eta * beta2)))
}

/// Radius for the extragradient primal steps around a saddle point.
pub fn radius_bound_saddle(
    grad_x_at_saddle: &DenseTensor,
    r: usize,
    eta: f64,
    beta_x: f64,
    beta_xy: f64,
) -> Result<f64> {
    check_positive("eta", eta)?;
    check_nonneg("beta_x", beta_x)?;
    check_nonneg("beta_xy", beta_xy)?;
    let gs = GradSpectrum::new(grad_x_at_saddle);
    let n = grad_x_at_saddle.num_slices() as f64;
    let k = 1.0 + std::f64::consts::SQRT_2 * eta * beta_x.max(beta_xy);
    Ok(eta / (n.sqrt() * k) * gs.frobenius_factor(r)?)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(TubalError::InvalidParameter {
            name,
            reason: format!("must be positive, got {v}"),
        });
    }
    Ok(())
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(TubalError::InvalidParameter {
            name,
            reason: format!("must be nonnegative, got {v}"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// `(max - min) / max` of the top values over nonzero gradient slices.
    pub top_spread: f64,
    /// Largest sine of the angle between the range of an `x` slice and the
    /// matching top left singular subspace of the gradient slice.
    pub max_angle_sin: f64,
    pub tol: f64,
    pub skipped_slices: usize,
    pub passes: bool,
}

/// Checks the optimality structure: equal top gradient values across nonzero
/// slices, and `x` slices living in the top singular subspaces of `-grad`.
pub fn alignment_check(x_star: &DenseTensor, grad: &DenseTensor, tol: f64) -> Result<AlignmentReport> {
    x_star.same_shape(grad, "alignment check")?;
    let opts = SubspaceOptions::default();
    let (xs, _) = FourierSvd::compute(&fft_tensor(x_star), SliceRank::Full, None, &opts);
    let (gs, _) = FourierSvd::compute(&fft_tensor(grad), SliceRank::Full, None, &opts);
    let x_ranks = xs.spectrum().slice_ranks(DEFAULT_RANK_TOL);
    let g_top: Vec<f64> = gs.slices().iter().map(|s| s.s.first().copied().unwrap_or(0.0)).collect();
    let s1 = g_top.iter().copied().fold(0.0, f64::max);
    let live: Vec<f64> = g_top.iter().copied().filter(|&s| s > 1e-12 * s1).collect();
    let skipped = g_top.len() - live.len();
    let top_spread = match live.iter().copied().reduce(f64::min) {
        Some(lo) if s1 > 0.0 => (s1 - lo) / s1,
        _ => 0.0,
    };
    let mut max_angle: f64 = 0.0;
    for (k, &rk) in x_ranks.iter().enumerate() {
        if rk == 0 || g_top[k] <= 1e-12 * s1 {
            continue;
        }
        let g = gs.slice(k);
        let mult = g.s.iter().filter(|&&s| s >= g_top[k] * (1.0 - tol)).count();
        let dim = mult.max(rk).min(g.u.ncols());
        let ug = g.u.columns(0, dim);
        let ux = xs.slice(k).u.columns(0, rk);
        let resid: DMatrix<Complex64> = &ux - &ug * (ug.adjoint() * &ux);
        let sin = singular_values(&resid).first().copied().unwrap_or(0.0);
        max_angle = max_angle.max(sin);
    }
    Ok(AlignmentReport {
        top_spread,
        max_angle_sin: max_angle,
        tol,
        skipped_slices: skipped,
        passes: top_spread <= tol && max_angle <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaEntry {
    pub r: usize,
    pub delta: f64,
}

/// Strict-complementarity summary at an approximate optimum; `dual_gap`
/// indicates how far the point may be from an exact one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScReport {
    pub sigma1: f64,
    pub slice_sigma1: Vec<f64>,
    /// `sigma_{r_k+1}` of each gradient slice, `r_k` the rank of the `x` slice.
    pub slice_sigma_next: Vec<f64>,
    pub slice_ranks: Vec<usize>,
    pub sc_measure: f64,
    pub delta_r: Vec<DeltaEntry>,
    pub dual_gap: f64,
    pub nnzb: usize,
    pub sigma1_multiplicity: usize,
    pub sigma1_total_multiplicity: usize,
    /// `(max - min) / max` of the top values over nonzero gradient slices.
    pub top_spread: f64,
    pub radius_frobenius: Option<f64>,
    pub radius_spectral: Option<f64>,
    pub tie_tolerance: f64,
}

/// Parameters for the radius entries of an [`ScReport`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusParams {
    pub r: usize,
    pub eta: f64,
    /// Frobenius smoothness; for saddle problems `max(beta_x, beta_xy)`.
    pub beta: f64,
    pub beta2: Option<f64>,
    pub saddle: bool,
}

impl ScReport {
    /// `ranks` lists the `r` values for which `delta(r)` is reported; values
    /// outside the admissible range are skipped.
    pub fn new(
        x_star: &DenseTensor,
        grad: &DenseTensor,
        dual_gap: f64,
        ranks: &[usize],
        radius: Option<RadiusParams>,
    ) -> Result<Self> {
        x_star.same_shape(grad, "strict complementarity report")?;
        let xs = slice_spectrum(x_star);
        let gs = GradSpectrum::from_spectrum(slice_spectrum_fourier(&fft_tensor(grad)));
        let slice_ranks = xs.slice_ranks(DEFAULT_RANK_TOL);
        let n = gs.spectrum.num_slices();
        let slice_sigma1: Vec<f64> = (0..n).map(|k| gs.spectrum.value(k, 0)).collect();
        let slice_sigma_next: Vec<f64> = (0..n).map(|k| gs.spectrum.value(k, slice_ranks[k])).collect();
        let sc_measure = sc_from(&xs, &gs.spectrum, DEFAULT_RANK_TOL);
        let delta_r = ranks
            .iter()
            .filter_map(|&r| gs.checked_delta(r).ok().map(|delta| DeltaEntry { r, delta }))
            .collect();
        let live: Vec<f64> = slice_sigma1
            .iter()
            .copied()
            .filter(|&s| s > 1e-12 * gs.sigma1)
            .collect();
        let top_spread = match live.iter().copied().reduce(f64::min) {
            Some(lo) => (gs.sigma1 - lo) / gs.sigma1,
            None => 0.0,
        };
        let (mut radius_frobenius, mut radius_spectral) = (None, None);
        if let Some(p) = radius {
            let nn = (n as f64).sqrt();
            if let Ok(f) = gs.frobenius_factor(p.r) {
                let denom = if p.saddle {
                    nn * (1.0 + std::f64::consts::SQRT_2 * p.eta * p.beta)
                } else {
                    nn * (1.0 + p.eta * p.beta)
                };
                radius_frobenius = Some(p.eta / denom * f);
            }
            if let (Some(b2), Ok(d)) = (p.beta2, gs.checked_delta(p.r)) {
                radius_spectral = Some(p.eta * d / (2.0 * (1.0 + p.eta * b2)));
            }
        }
        Ok(Self {
            sigma1: gs.sigma1,
            slice_sigma1,
            slice_sigma_next,
            slice_ranks,
            sc_measure,
            delta_r,
            dual_gap,
            nnzb: gs.nnzb,
            sigma1_multiplicity: gs.max_mult(),
            sigma1_total_multiplicity: gs.total_mult,
            top_spread,
            radius_frobenius,
            radius_spectral,
            tie_tolerance: TIE_TOL,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
