//! Seeded experiment campaigns over the synthetic problems, written out as
//! CSV tables.
//!
//! Configs are flat `key = value` text. Every key can also be given as an
//! override, which is how command-line flags are applied.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{dual_gap_smooth, sc_measure_saddle, sc_measure_smooth};
use crate::error::{Result, TubalError};
use crate::linalg::SubspaceOptions;
use crate::problems::{gen_completion, gen_rpca};
use crate::proj::ProjectionMode;
use crate::solvers::{
    extragradient_observed, solve_smooth, SmoothMethod, SmoothObjective, SolverConfig, SolverTrace,
    StepSize,
};
use crate::tensor::DenseTensor;

pub const CSV_HEADER: &str = "# tubalkit-csv v1";

/// Rank tolerance used when reading off slice ranks of a solution.
const SC_RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Completion,
    Rpca,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Pgd,
    Fista,
    Rfgm,
    Eg,
}

/// Projection mode with the truncation rank left implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Full,
    Certified,
    Unchecked,
}

fn bad(line: Option<usize>, field: &str, reason: impl Into<String>) -> TubalError {
    TubalError::Config {
        line,
        field: field.to_string(),
        reason: reason.into(),
    }
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}`, expected one of: {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(ProblemKind { "completion" => Completion, "rpca" => Rpca });
keyword_enum!(SolverKind { "pgd" => Pgd, "fista" => Fista, "rfgm" => Rfgm, "eg" => Eg });
keyword_enum!(ModeKind { "full" => Full, "certified" => Certified, "unchecked" => Unchecked });

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub dims: Vec<usize>,
    pub r: usize,
    /// Observation probability, completion only.
    pub rho: f64,
    /// Corruption density, robust PCA only.
    pub m: f64,
    /// Radius as a fraction of the ground-truth TNN.
    pub tau_fraction: f64,
    pub solver: SolverKind,
    pub step: StepSize,
    pub iterations: usize,
    pub mode: ModeKind,
    /// Truncation rank of the projections; defaults to `r`.
    pub proj_rank: Option<usize>,
    pub restart_every: usize,
    pub gap_every: usize,
    pub svd_tol: f64,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for completion: `50^3`, rank 2, `rho = 0.6`, FISTA with unit
    /// step for 800 iterations at `tau = 0.7 tnn(M)`.
    pub fn completion() -> Self {
        Self {
            problem: ProblemKind::Completion,
            dims: vec![50, 50, 50],
            r: 2,
            rho: 0.6,
            m: 0.0,
            tau_fraction: 0.7,
            solver: SolverKind::Fista,
            step: StepSize::Fixed(1.0),
            iterations: 800,
            mode: ModeKind::Certified,
            proj_rank: None,
            restart_every: 50,
            gap_every: 100,
            svd_tol: SubspaceOptions::default().tol,
            seeds: (1..=10).collect(),
            output: PathBuf::from("results"),
        }
    }

    /// Defaults for robust PCA: `100^3`, rank 5, 5% corruption, extragradient
    /// with unit step for 10000 iterations at `tau = 0.75 tnn(M)`.
    pub fn rpca() -> Self {
        Self {
            problem: ProblemKind::Rpca,
            dims: vec![100, 100, 100],
            r: 5,
            rho: 0.0,
            m: 0.05,
            tau_fraction: 0.75,
            solver: SolverKind::Eg,
            step: StepSize::Fixed(1.0),
            iterations: 10_000,
            mode: ModeKind::Certified,
            proj_rank: None,
            restart_every: 50,
            gap_every: 100,
            svd_tol: 1e-10,
            seeds: (1..=10).collect(),
            output: PathBuf::from("results"),
        }
    }

    pub fn defaults(problem: ProblemKind) -> Self {
        match problem {
            ProblemKind::Completion => Self::completion(),
            ProblemKind::Rpca => Self::rpca(),
        }
    }

    pub const KEYS: &'static [&'static str] = &[
        "problem",
        "dims",
        "n",
        "r",
        "rho",
        "m",
        "tau_fraction",
        "solver",
        "eta",
        "iterations",
        "mode",
        "proj_rank",
        "restart_every",
        "gap_every",
        "svd_tol",
        "seeds",
        "output",
    ];

    /// Builds a config from file text followed by overrides. The `problem`
    /// key picks the defaults, so it is applied first wherever it appears.
    pub fn from_sources(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs: Vec<(Option<usize>, String, String)> = Vec::new();
        if let Some(text) = text {
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(bad(Some(i + 1), line, "expected `key = value`"));
                };
                pairs.push((Some(i + 1), k.trim().to_string(), v.trim().to_string()));
            }
        }
        pairs.extend(overrides.iter().map(|(k, v)| (None, k.clone(), v.clone())));

        let problem = match pairs.iter().rev().find(|(_, k, _)| k == "problem") {
            Some((line, k, v)) => v.parse().map_err(|e: String| bad(*line, k, e))?,
            None => ProblemKind::Completion,
        };
        let mut cfg = Self::defaults(problem);
        for (line, k, v) in &pairs {
            cfg.set(k, v).map_err(|reason| bad(*line, k, reason))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        Self::from_sources(Some(&fs::read_to_string(path)?), overrides)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        match key {
            // resolved before the defaults are chosen
            "problem" => {
                value.parse::<ProblemKind>()?;
            }
            "dims" => {
                self.dims = value
                    .split(['x', ',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(num)
                    .collect::<std::result::Result<_, _>>()?;
            }
            "n" => {
                let n: usize = num(value)?;
                self.dims = vec![n; 3];
            }
            "r" => self.r = num(value)?,
            "rho" => self.rho = num(value)?,
            "m" => self.m = num(value)?,
            "tau_fraction" => self.tau_fraction = num(value)?,
            "solver" => self.solver = value.parse()?,
            "eta" => {
                self.step = if value.eq_ignore_ascii_case("auto") {
                    StepSize::Auto
                } else {
                    StepSize::Fixed(num(value)?)
                }
            }
            "iterations" | "T" => self.iterations = num(value)?,
            "mode" => self.mode = value.parse()?,
            "proj_rank" => self.proj_rank = Some(num(value)?),
            "restart_every" => self.restart_every = num(value)?,
            "gap_every" => self.gap_every = num(value)?,
            "svd_tol" => self.svd_tol = num(value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "output" => self.output = PathBuf::from(value),
            _ => return Err(format!("unknown key; known keys: {}", Self::KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, reason: String| Err(bad(None, field, reason));
        if self.dims.len() < 3 || self.dims.contains(&0) {
            return err("dims", format!("need at least 3 positive dimensions, got {:?}", self.dims));
        }
        let p = self.dims[0].min(self.dims[1]);
        if self.r == 0 || self.r > self.dims.iter().copied().min().unwrap_or(0) {
            return err("r", format!("rank {} must lie in 1..=min(dims)", self.r));
        }
        if let Some(k) = self.proj_rank {
            if k == 0 || k >= p {
                return err("proj_rank", format!("{k} must lie in 1..{p}"));
            }
        }
        if !(self.tau_fraction > 0.0 && self.tau_fraction.is_finite()) {
            return err("tau_fraction", format!("must be positive, got {}", self.tau_fraction));
        }
        if let StepSize::Fixed(e) = self.step {
            if !(e > 0.0 && e.is_finite()) {
                return err("eta", format!("must be positive, got {e}"));
            }
        }
        if self.iterations == 0 {
            return err("iterations", "must be positive".into());
        }
        if self.restart_every == 0 {
            return err("restart_every", "must be positive".into());
        }
        if self.gap_every == 0 {
            return err("gap_every", "must be positive".into());
        }
        if !(self.svd_tol > 0.0 && self.svd_tol < 1.0) {
            return err("svd_tol", format!("must lie in (0, 1), got {}", self.svd_tol));
        }
        if self.seeds.is_empty() {
            return err("seeds", "need at least one seed".into());
        }
        match self.problem {
            ProblemKind::Completion => {
                if !(self.rho > 0.0 && self.rho <= 1.0) {
                    return err("rho", format!("must lie in (0, 1], got {}", self.rho));
                }
                if self.solver == SolverKind::Eg {
                    return err("solver", "completion is a smooth problem; use pgd, fista or rfgm".into());
                }
            }
            ProblemKind::Rpca => {
                if !(self.m > 0.0 && self.m <= 1.0) {
                    return err("m", format!("must lie in (0, 1], got {}", self.m));
                }
                if self.dims.len() != 3 || self.dims.iter().any(|&d| d != self.dims[0]) {
                    return err("dims", format!("robust PCA needs n x n x n, got {:?}", self.dims));
                }
                if self.solver != SolverKind::Eg {
                    return err("solver", "robust PCA is a saddle problem; use eg".into());
                }
            }
        }
        Ok(())
    }

    pub fn projection_rank(&self) -> usize {
        self.proj_rank.unwrap_or(self.r)
    }

    pub fn projection_mode(&self) -> ProjectionMode {
        let k = self.projection_rank();
        match self.mode {
            ModeKind::Full => ProjectionMode::Full,
            ModeKind::Certified => ProjectionMode::TruncatedCertified(k),
            ModeKind::Unchecked => ProjectionMode::TruncatedUnchecked(k),
        }
    }

    /// Canonical `key = value` text; parses back to the same config.
    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let eta = match self.step {
            StepSize::Auto => "auto".to_string(),
            StepSize::Fixed(e) => e.to_string(),
        };
        let mut s = format!(
            "problem = {}\ndims = {}\nr = {}\n",
            self.problem,
            dims.join("x"),
            self.r
        );
        match self.problem {
            ProblemKind::Completion => s += &format!("rho = {}\n", self.rho),
            ProblemKind::Rpca => s += &format!("m = {}\n", self.m),
        }
        s += &format!(
            "tau_fraction = {}\nsolver = {}\neta = {eta}\niterations = {}\nmode = {}\n",
            self.tau_fraction, self.solver, self.iterations, self.mode
        );
        if let Some(k) = self.proj_rank {
            s += &format!("proj_rank = {k}\n");
        }
        s += &format!(
            "restart_every = {}\ngap_every = {}\nsvd_tol = {:e}\nseeds = {}\noutput = {}\n",
            self.restart_every,
            self.gap_every,
            self.svd_tol,
            seeds.join(","),
            self.output.display()
        );
        s
    }

    /// Solver settings for one run at radius `tau`.
    pub fn solver_config(&self, tau: f64, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(tau, self.iterations);
        cfg.step = self.step;
        cfg.mode = self.projection_mode();
        cfg.restart_every = self.restart_every;
        cfg.seed = seed;
        cfg.gap_every = Some(self.gap_every);
        cfg.subspace.tol = self.svd_tol;
        cfg
    }
}

/// `1,2,5` or an inclusive range `1..10`, or a mix of both.
fn parse_seeds(value: &str) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            if b < a {
                return Err(format!("empty seed range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?);
        }
    }
    Ok(out)
}

/// One row of the per-iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    /// `objective - objective at the last iteration`.
    pub objective_gap: f64,
    pub recovery_error: f64,
    pub certified: Option<bool>,
    pub escalations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub init_error: f64,
    pub recovery_error: f64,
    pub dual_gap: f64,
    pub sc_measure: f64,
    pub first_certified_iteration: Option<usize>,
    pub wall_time: f64,
    pub escalations: usize,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub solver_trace: SolverTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub init_error: f64,
    pub recovery_error: f64,
    pub dual_gap: f64,
    pub sc_measure: f64,
    /// Absent when some run never certified.
    pub first_certified_iteration: Option<f64>,
    pub wall_time: f64,
    pub escalations: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub runs: Vec<SeedResult>,
    pub mean: Aggregate,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl ExperimentResult {
    fn new(runs: Vec<SeedResult>) -> Self {
        let first = runs
            .iter()
            .map(|r| r.first_certified_iteration.map(|t| t as f64))
            .collect::<Option<Vec<_>>>()
            .map(|v| mean(v.into_iter()));
        let mean = Aggregate {
            init_error: mean(runs.iter().map(|r| r.init_error)),
            recovery_error: mean(runs.iter().map(|r| r.recovery_error)),
            dual_gap: mean(runs.iter().map(|r| r.dual_gap)),
            sc_measure: mean(runs.iter().map(|r| r.sc_measure)),
            first_certified_iteration: first,
            wall_time: mean(runs.iter().map(|r| r.wall_time)),
            escalations: mean(runs.iter().map(|r| r.escalations as f64)),
        };
        Self { runs, mean }
    }
}

/// Runs one seed without touching the file system.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let start = Instant::now();
    let rank = cfg.projection_rank();
    match cfg.problem {
        ProblemKind::Completion => {
            let mut inst = gen_completion(&cfg.dims, cfg.r, cfg.rho, seed)?;
            inst.tau = cfg.tau_fraction * inst.truth_tnn;
            let x0 = inst.init(rank)?;
            let obj = inst.objective();
            let scfg = cfg.solver_config(inst.tau, seed);
            let method = match cfg.solver {
                SolverKind::Pgd => SmoothMethod::Pgd,
                SolverKind::Fista => SmoothMethod::Fista,
                SolverKind::Rfgm => SmoothMethod::Restarted(cfg.restart_every),
                SolverKind::Eg => unreachable!("rejected by validation"),
            };
            let mut errors = Vec::with_capacity(cfg.iterations + 1);
            let mut observe = |_: usize, x: &DenseTensor| {
                errors.push(inst.recovery_error(x).unwrap_or(f64::NAN));
            };
            let out = solve_smooth(method, &obj, &scfg, &x0, Some(&mut observe))?;
            let g = obj.gradient(&out.x);
            let objective: Vec<f64> = out.trace.records.iter().map(|r| r.objective).collect();
            Ok(SeedResult {
                seed,
                init_error: errors[0],
                recovery_error: inst.recovery_error(&out.x)?,
                dual_gap: dual_gap_smooth(&out.x, &g, inst.tau)?,
                sc_measure: sc_measure_smooth(&out.x, &g, SC_RANK_TOL),
                first_certified_iteration: out.trace.first_certified_iteration(),
                wall_time: start.elapsed().as_secs_f64(),
                escalations: out.trace.total_escalations(),
                trace: trace_rows(&out.trace, &objective, &errors),
                solver_trace: out.trace,
            })
        }
        ProblemKind::Rpca => {
            let mut inst = gen_rpca(cfg.dims[0], cfg.r, cfg.m, seed)?;
            inst.tau = cfg.tau_fraction * inst.truth_tnn;
            let (x0, y0) = inst.init(rank)?;
            let saddle = inst.saddle();
            let scfg = cfg.solver_config(inst.tau, seed);
            let mut errors = vec![inst.recovery_error(&x0)?];
            let mut avg = DenseTensor::zeros(x0.dims())?;
            let mut observe = |t: usize, z: &DenseTensor, _: &DenseTensor, _: &DenseTensor, _: &DenseTensor| {
                let inv = 1.0 / t as f64;
                avg.scale_mut(1.0 - inv);
                avg.axpy(inv, z).expect("matching shapes");
                errors.push(inst.recovery_error(&avg).unwrap_or(f64::NAN));
            };
            let out = extragradient_observed(&saddle, &scfg, &x0, &y0, Some(&mut observe))?;
            let best = out.best.expect("final iteration is a checkpoint");
            let objective: Vec<f64> = out
                .trace
                .records
                .iter()
                .map(|r| r.ergodic_objective.unwrap_or(r.objective))
                .collect();
            Ok(SeedResult {
                seed,
                init_error: errors[0],
                recovery_error: inst.recovery_error(&best.z)?,
                dual_gap: best.gap,
                sc_measure: sc_measure_saddle(&best.z, &best.w, &saddle, SC_RANK_TOL),
                first_certified_iteration: out.trace.first_certified_iteration(),
                wall_time: start.elapsed().as_secs_f64(),
                escalations: out.trace.total_escalations(),
                trace: trace_rows(&out.trace, &objective, &errors),
                solver_trace: out.trace,
            })
        }
    }
}

fn trace_rows(trace: &SolverTrace, objective: &[f64], errors: &[f64]) -> Vec<TraceRow> {
    let last = objective.last().copied().unwrap_or(f64::NAN);
    trace
        .records
        .iter()
        .zip(objective)
        .zip(errors)
        .map(|((rec, &obj), &err)| TraceRow {
            iteration: rec.iter,
            objective: obj,
            objective_gap: obj - last,
            recovery_error: err,
            certified: rec.certified,
            escalations: rec.escalations,
        })
        .collect()
}

/// Runs every seed, in parallel when the rayon pool allows it, and returns
/// the results in seed order.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::new(runs))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{CSV_HEADER}")?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(e: csv::Error) -> TubalError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => TubalError::Io(e),
        other => TubalError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "seed",
    "init_error",
    "recovery_error",
    "dual_gap",
    "sc_measure",
    "first_certified_iteration",
    "wall_time",
    "escalations",
];

/// Writes `summary.csv`, one `trace_seed<k>.csv` per seed and the resolved
/// `config.txt` into `dir`.
pub fn write_results(res: &ExperimentResult, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let mut w = csv_writer(&dir.join("summary.csv"))?;
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err)?;
    for r in &res.runs {
        w.write_record([
            r.seed.to_string(),
            r.init_error.to_string(),
            r.recovery_error.to_string(),
            r.dual_gap.to_string(),
            r.sc_measure.to_string(),
            opt(r.first_certified_iteration),
            r.wall_time.to_string(),
            r.escalations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let m = &res.mean;
    w.write_record([
        "mean".to_string(),
        m.init_error.to_string(),
        m.recovery_error.to_string(),
        m.dual_gap.to_string(),
        m.sc_measure.to_string(),
        opt(m.first_certified_iteration),
        m.wall_time.to_string(),
        m.escalations.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;

    for r in &res.runs {
        let mut w = csv_writer(&dir.join(format!("trace_seed{}.csv", r.seed)))?;
        w.write_record(["iteration", "objective", "objective_gap", "recovery_error", "certified", "escalations"])
            .map_err(csv_err)?;
        for row in &r.trace {
            w.write_record([
                row.iteration.to_string(),
                row.objective.to_string(),
                row.objective_gap.to_string(),
                row.recovery_error.to_string(),
                opt(row.certified),
                row.escalations.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Runs all seeds and writes the tables into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let res = run_seeds(cfg)?;
    write_results(&res, cfg, &cfg.output)?;
    Ok(res)
}
