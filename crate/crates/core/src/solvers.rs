//! First-order methods over the TNN ball: projected gradient, FISTA,
//! restarted fast gradient and projected extragradient for saddle points.

use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{saddle_gap_unchecked, smooth_gap_unchecked};
use crate::error::{Result, TubalError};
use crate::linalg::SubspaceOptions;
use crate::proj::{Certificate, ProjectionMode, ProjectionOutcome, TnnProjector};
use crate::tensor::DenseTensor;
use crate::tfactor::slice_spectrum;

/// Differentiable objective over tensors.
pub trait SmoothObjective {
    fn value(&self, x: &DenseTensor) -> f64;
    fn gradient(&self, x: &DenseTensor) -> DenseTensor;
    /// Lipschitz constant of the gradient.
    fn smoothness(&self) -> f64;
}

/// Lipschitz constants of the partial gradients of a saddle function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SaddleSmoothness {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_xy: f64,
    pub beta_yx: f64,
}

impl SaddleSmoothness {
    /// Largest constant step for which extragradient is guaranteed to converge.
    pub fn extragradient_step(&self) -> f64 {
        let Self {
            beta_x,
            beta_y,
            beta_xy,
            beta_yx,
        } = *self;
        [
            1.0 / (2.0 * (beta_x * beta_x + beta_yx * beta_yx).sqrt()),
            1.0 / (2.0 * (beta_y * beta_y + beta_xy * beta_xy).sqrt()),
            1.0 / (beta_x + beta_xy),
            1.0 / (beta_y + beta_yx),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

/// Convex-concave `F(x, y)` minimized over the TNN ball in `x` and maximized
/// over a convex set `K` in `y`. Dual points are tensors.
pub trait SaddleObjective {
    fn value(&self, x: &DenseTensor, y: &DenseTensor) -> f64;
    fn grad_x(&self, x: &DenseTensor, y: &DenseTensor) -> DenseTensor;
    fn grad_y(&self, x: &DenseTensor, y: &DenseTensor) -> DenseTensor;
    /// Euclidean projection onto `K`.
    fn project_dual(&self, y: &DenseTensor) -> DenseTensor;
    /// Support function `max_{y in K} <y, g>`.
    fn dual_support(&self, g: &DenseTensor) -> f64;
    /// `max_{y in K} F(x, y)`.
    fn primal_value(&self, x: &DenseTensor) -> f64;
    fn smoothness(&self) -> SaddleSmoothness;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub step: StepSize,
    pub max_iter: usize,
    pub tau: f64,
    pub mode: ProjectionMode,
    /// Restart period of the restarted fast gradient method.
    pub restart_every: usize,
    pub seed: u64,
    /// Distance to this tensor is logged every iteration.
    pub reference: Option<DenseTensor>,
    /// Rank whose certificate is evaluated in full mode too.
    pub monitor_rank: Option<usize>,
    /// Dual-gap checkpoints every this many iterations (and at the end).
    pub gap_every: Option<usize>,
    /// Stop once a checkpointed dual gap falls below this.
    pub tol_gap: Option<f64>,
    pub subspace: SubspaceOptions,
}

impl SolverConfig {
    pub fn new(tau: f64, max_iter: usize) -> Self {
        Self {
            step: StepSize::Auto,
            max_iter,
            tau,
            mode: ProjectionMode::Full,
            restart_every: 50,
            seed: 0,
            reference: None,
            monitor_rank: None,
            gap_every: None,
            tol_gap: None,
            subspace: SubspaceOptions::default(),
        }
    }

    fn projector(&self) -> Result<TnnProjector> {
        let monitor = match self.mode {
            ProjectionMode::Full => self.monitor_rank,
            _ => None,
        };
        Ok(TnnProjector::new(self.tau, self.mode)?
            .with_monitor_rank(monitor)
            .with_subspace_options(self.subspace))
    }

    fn check_step(eta: f64) -> Result<f64> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(TubalError::InvalidParameter {
                name: "step",
                reason: format!("step must be positive and finite, got {eta}"),
            });
        }
        Ok(eta)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    /// Objective at the running average (extragradient only).
    pub ergodic_objective: Option<f64>,
    pub ref_distance: Option<f64>,
    /// Per-slice SVD rank computed for this iteration's projections.
    pub svd_rank: usize,
    /// Tubal rank of the projected iterate.
    pub projected_rank: usize,
    /// All of this iteration's projections were certified at the configured rank.
    pub certified: Option<bool>,
    pub escalations: usize,
    pub rank_budget: usize,
    /// Subspace iterations spent by this iteration's projections.
    pub svd_iterations: usize,
    pub dual_gap: Option<f64>,
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Escalation {
    pub iter: usize,
    /// Index of the projection within the iteration.
    pub projection: usize,
    pub certificate_value: f64,
    pub tau: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    /// Record 0 describes the starting point; record `t` the state after `t` iterations.
    pub records: Vec<IterRecord>,
    pub escalations: Vec<Escalation>,
    pub step: f64,
}

impl SolverTrace {
    /// Smallest `t0 >= 1` such that every iteration `t >= t0` was certified.
    pub fn first_certified_iteration(&self) -> Option<usize> {
        let iters: Vec<&IterRecord> = self.records.iter().filter(|r| r.iter >= 1).collect();
        let last = iters.last()?;
        if last.certified != Some(true) {
            return None;
        }
        let mut t0 = last.iter;
        for r in iters.iter().rev() {
            if r.certified == Some(true) {
                t0 = r.iter;
            } else {
                break;
            }
        }
        Some(t0)
    }

    pub fn total_escalations(&self) -> usize {
        self.escalations.len()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutput {
    pub x: DenseTensor,
    pub trace: SolverTrace,
    pub stopped_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothMethod {
    Pgd,
    Fista,
    /// Restart the momentum every `K` iterations.
    Restarted(usize),
}

fn check_start(x0: &DenseTensor, tau: f64) -> Result<()> {
    let t = slice_spectrum(x0).tnn();
    if t > tau * (1.0 + 1e-8) + 1e-300 {
        return Err(TubalError::InfeasibleStart { tnn: t, tau });
    }
    Ok(())
}

struct Step {
    svd_rank: usize,
    svd_iterations: usize,
    certified: Option<bool>,
    escalations: usize,
    budget: usize,
}

impl Step {
    fn new() -> Self {
        Self {
            svd_rank: 0,
            svd_iterations: 0,
            certified: None,
            escalations: 0,
            budget: 0,
        }
    }

    fn absorb(
        &mut self,
        out: &ProjectionOutcome,
        mode: ProjectionMode,
        p: usize,
        iter: usize,
        which: usize,
        tau: f64,
        log: &mut Vec<Escalation>,
    ) {
        let rank = match (mode, out.escalated) {
            (ProjectionMode::Full, _) | (_, true) => p,
            (ProjectionMode::TruncatedCertified(r), false) => (r + 1).min(p),
            (ProjectionMode::TruncatedUnchecked(r), false) => r,
        };
        self.svd_rank = self.svd_rank.max(rank);
        self.budget += out.stats.rank_budget;
        self.svd_iterations += out.stats.iterations;
        if let Some(Certificate { holds, value, .. }) = out.certificate {
            self.certified = Some(self.certified.unwrap_or(true) && holds);
            if out.escalated {
                self.escalations += 1;
                log.push(Escalation {
                    iter,
                    projection: which,
                    certificate_value: value,
                    tau,
                });
            }
        }
    }
}

fn elapsed(start: &Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// `(1 + sqrt(1 + 4 theta^2)) / 2`.
pub fn momentum_next(theta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
}

/// Projected gradient, FISTA or restarted fast gradient on a smooth objective.
/// `observe` sees every iterate, starting with `x0` at iteration 0.
pub fn solve_smooth(
    method: SmoothMethod,
    obj: &dyn SmoothObjective,
    cfg: &SolverConfig,
    x0: &DenseTensor,
    mut observe: Option<&mut dyn FnMut(usize, &DenseTensor)>,
) -> Result<SolverOutput> {
    check_start(x0, cfg.tau)?;
    let eta = SolverConfig::check_step(match cfg.step {
        StepSize::Auto => 1.0 / obj.smoothness(),
        StepSize::Fixed(e) => e,
    })?;
    let restart = match method {
        SmoothMethod::Pgd => Some(1),
        SmoothMethod::Fista => None,
        SmoothMethod::Restarted(k) => {
            if k == 0 {
                return Err(TubalError::InvalidParameter {
                    name: "restart_every",
                    reason: "restart period must be at least 1".into(),
                });
            }
            Some(k)
        }
    };
    let p = x0.n1().min(x0.n2());
    let mut projector = cfg.projector()?;
    let start = Instant::now();
    let mut trace = SolverTrace {
        step: eta,
        ..Default::default()
    };
    let ref_dist = |x: &DenseTensor| cfg.reference.as_ref().map(|r| x.distance(r).unwrap_or(f64::NAN));
    trace.records.push(IterRecord {
        iter: 0,
        objective: obj.value(x0),
        ref_distance: ref_dist(x0),
        elapsed: 0.0,
        ..Default::default()
    });
    if let Some(f) = observe.as_mut() {
        f(0, x0);
    }

    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut theta = 1.0f64;
    let mut in_epoch = 0usize;
    let mut budget = 0usize;
    let mut stopped_early = false;
    for t in 1..=cfg.max_iter {
        let mut arg = y.clone();
        arg.axpy(-eta, &obj.gradient(&y))?;
        let out = projector.project(&arg)?;
        let mut step = Step::new();
        step.absorb(&out, cfg.mode, p, t, 0, cfg.tau, &mut trace.escalations);
        budget += step.budget;
        let projected_rank = out.result.tubal_rank();
        let x_new = out.result.projected;

        in_epoch += 1;
        if restart.is_some_and(|k| in_epoch >= k) {
            theta = 1.0;
            in_epoch = 0;
            y = x_new.clone();
        } else {
            let theta_next = momentum_next(theta);
            let beta = (theta - 1.0) / theta_next;
            y = x_new.clone();
            if beta != 0.0 {
                y.axpy(beta, &x_new)?;
                y.axpy(-beta, &x)?;
            }
            theta = theta_next;
        }
        x = x_new;

        let checkpoint = cfg
            .gap_every
            .is_some_and(|g| g > 0 && (t % g == 0 || t == cfg.max_iter));
        let dual_gap = if checkpoint {
            Some(smooth_gap_unchecked(&x, &obj.gradient(&x), cfg.tau)?)
        } else {
            None
        };
        trace.records.push(IterRecord {
            iter: t,
            objective: obj.value(&x),
            ergodic_objective: None,
            ref_distance: ref_dist(&x),
            svd_rank: step.svd_rank,
            projected_rank,
            certified: step.certified,
            escalations: step.escalations,
            rank_budget: budget,
            svd_iterations: step.svd_iterations,
            dual_gap,
            elapsed: elapsed(&start),
        });
        if let Some(f) = observe.as_mut() {
            f(t, &x);
        }
        if let (Some(g), Some(tol)) = (dual_gap, cfg.tol_gap) {
            if g < tol {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(SolverOutput {
        x,
        trace,
        stopped_early,
    })
}

pub fn pgd(obj: &dyn SmoothObjective, cfg: &SolverConfig, x0: &DenseTensor) -> Result<SolverOutput> {
    solve_smooth(SmoothMethod::Pgd, obj, cfg, x0, None)
}

pub fn fista(obj: &dyn SmoothObjective, cfg: &SolverConfig, x0: &DenseTensor) -> Result<SolverOutput> {
    solve_smooth(SmoothMethod::Fista, obj, cfg, x0, None)
}

pub fn restarted_fgm(
    obj: &dyn SmoothObjective,
    cfg: &SolverConfig,
    x0: &DenseTensor,
) -> Result<SolverOutput> {
    solve_smooth(SmoothMethod::Restarted(cfg.restart_every), obj, cfg, x0, None)
}

/// A point pair with its dual gap.
#[derive(Clone, Debug)]
pub struct SaddleCandidate {
    pub z: DenseTensor,
    pub w: DenseTensor,
    pub gap: f64,
    pub iter: usize,
    /// Taken from the running averages rather than the current iterates.
    pub ergodic: bool,
}

#[derive(Clone, Debug)]
pub struct ExtragradientOutput {
    /// Running averages of the lookahead points `z_{t+1}` and `w_{t+1}`.
    pub x_avg: DenseTensor,
    pub y_avg: DenseTensor,
    pub x_last: DenseTensor,
    pub y_last: DenseTensor,
    /// Lowest dual gap seen at the checkpoints.
    pub best: Option<SaddleCandidate>,
    pub trace: SolverTrace,
    pub stopped_early: bool,
}

/// Observer payload for extragradient: `(t, z_{t+1}, w_{t+1}, x_{t+1}, y_{t+1})`.
pub type SaddleObserver<'a> =
    &'a mut dyn FnMut(usize, &DenseTensor, &DenseTensor, &DenseTensor, &DenseTensor);

/// Projected extragradient: a lookahead step to `(z, w)` followed by a
/// correction from `(x, y)` using the gradients at the lookahead point.
/// The primal player descends, the dual player ascends.
pub fn extragradient(
    sobj: &dyn SaddleObjective,
    cfg: &SolverConfig,
    x0: &DenseTensor,
    y0: &DenseTensor,
) -> Result<ExtragradientOutput> {
    extragradient_observed(sobj, cfg, x0, y0, None)
}

pub fn extragradient_observed(
    sobj: &dyn SaddleObjective,
    cfg: &SolverConfig,
    x0: &DenseTensor,
    y0: &DenseTensor,
    mut observe: Option<SaddleObserver<'_>>,
) -> Result<ExtragradientOutput> {
    check_start(x0, cfg.tau)?;
    let eta = SolverConfig::check_step(match cfg.step {
        StepSize::Auto => sobj.smoothness().extragradient_step(),
        StepSize::Fixed(e) => e,
    })?;
    let p = x0.n1().min(x0.n2());
    // separate projectors keep separate warm starts for the two primal steps
    let mut proj_z = cfg.projector()?;
    let mut proj_x = cfg.projector()?;
    let start = Instant::now();
    let mut trace = SolverTrace {
        step: eta,
        ..Default::default()
    };
    let ref_dist = |x: &DenseTensor| cfg.reference.as_ref().map(|r| x.distance(r).unwrap_or(f64::NAN));
    trace.records.push(IterRecord {
        iter: 0,
        objective: sobj.primal_value(x0),
        ergodic_objective: Some(sobj.primal_value(x0)),
        ref_distance: ref_dist(x0),
        ..Default::default()
    });

    let mut x = x0.clone();
    let mut y = sobj.project_dual(y0);
    let mut z_avg = DenseTensor::zeros(x0.dims())?;
    let mut w_avg = DenseTensor::zeros(y.dims())?;
    let mut best: Option<SaddleCandidate> = None;
    let mut budget = 0usize;
    let mut stopped_early = false;
    for t in 1..=cfg.max_iter {
        let mut step = Step::new();

        let mut arg = x.clone();
        arg.axpy(-eta, &sobj.grad_x(&x, &y))?;
        let out_z = proj_z.project(&arg)?;
        step.absorb(&out_z, cfg.mode, p, t, 0, cfg.tau, &mut trace.escalations);
        let mut projected_rank = out_z.result.tubal_rank();
        let z = out_z.result.projected;
        let mut wa = y.clone();
        wa.axpy(eta, &sobj.grad_y(&x, &y))?;
        let w = sobj.project_dual(&wa);

        let mut arg = x.clone();
        arg.axpy(-eta, &sobj.grad_x(&z, &w))?;
        let out_x = proj_x.project(&arg)?;
        step.absorb(&out_x, cfg.mode, p, t, 1, cfg.tau, &mut trace.escalations);
        projected_rank = projected_rank.max(out_x.result.tubal_rank());
        let x_next = out_x.result.projected;
        let mut ya = y.clone();
        ya.axpy(eta, &sobj.grad_y(&z, &w))?;
        let y_next = sobj.project_dual(&ya);
        budget += step.budget;

        let inv = 1.0 / t as f64;
        z_avg.scale_mut(1.0 - inv);
        z_avg.axpy(inv, &z)?;
        w_avg.scale_mut(1.0 - inv);
        w_avg.axpy(inv, &w)?;

        let checkpoint = cfg
            .gap_every
            .is_some_and(|g| g > 0 && (t % g == 0 || t == cfg.max_iter));
        let mut dual_gap = None;
        if checkpoint {
            let g_avg = saddle_gap_unchecked(&z_avg, &w_avg, sobj, cfg.tau)?;
            let g_cur = saddle_gap_unchecked(&z, &w, sobj, cfg.tau)?;
            dual_gap = Some(g_avg);
            for (gap, zz, ww, ergodic) in [(g_avg, &z_avg, &w_avg, true), (g_cur, &z, &w, false)] {
                if best.as_ref().is_none_or(|b| gap < b.gap) {
                    best = Some(SaddleCandidate {
                        z: zz.clone(),
                        w: ww.clone(),
                        gap,
                        iter: t,
                        ergodic,
                    });
                }
            }
        }
        trace.records.push(IterRecord {
            iter: t,
            objective: sobj.primal_value(&z),
            ergodic_objective: Some(sobj.primal_value(&z_avg)),
            ref_distance: ref_dist(&z_avg),
            svd_rank: step.svd_rank,
            projected_rank,
            certified: step.certified,
            escalations: step.escalations,
            rank_budget: budget,
            svd_iterations: step.svd_iterations,
            dual_gap,
            elapsed: elapsed(&start),
        });
        if let Some(f) = observe.as_mut() {
            f(t, &z, &w, &x_next, &y_next);
        }
        x = x_next;
        y = y_next;
        if let (Some(g), Some(tol)) = (best.as_ref().map(|b| b.gap), cfg.tol_gap) {
            if checkpoint && g < tol {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(ExtragradientOutput {
        x_avg: z_avg,
        y_avg: w_avg,
        x_last: x,
        y_last: y,
        best,
        trace,
        stopped_early,
    })
}
