//! Synthetic benchmark problems: low-rank tensor completion (smooth) and
//! tensor robust PCA (bilinear saddle), plus a quadratic toy.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TubalError};
use crate::fourier::t_product;
use crate::io::{load_tensor, save_tensor};
use crate::proj::{project_linf, truncated_project_tnn};
use crate::solvers::{SaddleObjective, SaddleSmoothness, SmoothObjective};
use crate::tensor::{validate_dims, DenseTensor};
use crate::tfactor::tnn;

/// Largest dimension for which masks are stored densely.
pub const DENSE_MASK_LIMIT: usize = 128;

/// Radius fraction of the ground-truth TNN used for completion.
pub const COMPLETION_TAU_FRACTION: f64 = 0.7;
pub const RPCA_TAU_FRACTION: f64 = 0.75;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `x` multiplied along dimension `j` by `a` (`n x dims[j]`).
pub fn mode_product(x: &DenseTensor, j: usize, a: &DMatrix<f64>) -> Result<DenseTensor> {
    let dims = x.dims();
    if j >= dims.len() || a.ncols() != dims[j] {
        return Err(TubalError::ShapeMismatch {
            context: "mode product",
            left: dims.to_vec(),
            right: vec![a.nrows(), a.ncols()],
        });
    }
    let left: usize = dims[..j].iter().product();
    let right: usize = dims[j + 1..].iter().product();
    let (m, n) = (dims[j], a.nrows());
    let mut out_dims = dims.to_vec();
    out_dims[j] = n;
    let mut out = DenseTensor::zeros(&out_dims)?;
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..right {
        for i in 0..m {
            let s = &src[left * (i + m * b)..left * (i + m * b + 1)];
            for k in 0..n {
                let c = a[(k, i)];
                if c == 0.0 {
                    continue;
                }
                let d = &mut dst[left * (k + n * b)..left * (k + n * b + 1)];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += c * sv;
                }
            }
        }
    }
    Ok(out)
}

/// Scaled relative squared error `||(tnn(M)/tau) x - M||^2 / ||M||^2`.
pub fn recovery_error(x: &DenseTensor, truth: &DenseTensor, truth_tnn: f64, tau: f64) -> Result<f64> {
    let s = truth_tnn / tau;
    let mut d = x.scale(s);
    d.axpy(-1.0, truth)?;
    let m = truth.fro_norm();
    Ok(d.fro_norm().powi(2) / (m * m))
}

/// Observed positions of a completion instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Mask {
    Dense(Vec<bool>),
    /// Sorted linear indices.
    Indices(Vec<usize>),
}

impl Mask {
    pub fn count(&self) -> usize {
        match self {
            Mask::Dense(b) => b.iter().filter(|&&v| v).count(),
            Mask::Indices(ix) => ix.len(),
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        match self {
            Mask::Dense(b) => b[k],
            Mask::Indices(ix) => ix.binary_search(&k).is_ok(),
        }
    }

    fn for_each(&self, mut f: impl FnMut(usize)) {
        match self {
            Mask::Dense(b) => b.iter().enumerate().filter(|(_, &v)| v).for_each(|(k, _)| f(k)),
            Mask::Indices(ix) => ix.iter().for_each(|&k| f(k)),
        }
    }

    fn to_tensor(&self, dims: &[usize]) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(dims)?;
        let d = t.data_mut();
        self.for_each(|k| d[k] = 1.0);
        Ok(t)
    }

    fn from_tensor(t: &DenseTensor) -> Self {
        let bits = t.data().iter().map(|&v| v != 0.0);
        if t.dims().iter().all(|&n| n <= DENSE_MASK_LIMIT) {
            Mask::Dense(bits.collect())
        } else {
            Mask::Indices(bits.enumerate().filter(|(_, b)| *b).map(|(k, _)| k).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CompletionMeta {
    dims: Vec<usize>,
    r: usize,
    rho: f64,
    tau: f64,
    seed: u64,
}

#[derive(Clone, Debug)]
pub struct CompletionInstance {
    pub dims: Vec<usize>,
    pub mask: Mask,
    /// Observed entries in place, zeros elsewhere.
    pub observed: DenseTensor,
    pub truth: DenseTensor,
    pub truth_tnn: f64,
    pub rho: f64,
    pub r: usize,
    pub tau: f64,
    pub seed: u64,
}

/// Tucker-structured ground truth with Gaussian core and factors, observed
/// entrywise with probability `rho`.
pub fn gen_completion(dims: &[usize], r: usize, rho: f64, seed: u64) -> Result<CompletionInstance> {
    validate_dims(dims)?;
    if r == 0 || r > *dims.iter().min().unwrap() {
        return Err(TubalError::InvalidParameter {
            name: "r",
            reason: format!("rank {r} must lie in 1..={}", dims.iter().min().unwrap()),
        });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(TubalError::InvalidParameter {
            name: "rho",
            reason: format!("observation probability {rho} outside [0, 1]"),
        });
    }
    let mut rng = seeded(seed);
    let core_dims = vec![r; dims.len()];
    let mut m = DenseTensor::from_fn(&core_dims, |_| StandardNormal.sample(&mut rng))?;
    for (j, &n) in dims.iter().enumerate() {
        let a = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
        m = mode_product(&m, j, &a)?;
    }
    let bits: Vec<bool> = (0..m.len()).map(|_| rng.random::<f64>() < rho).collect();
    let mask = if dims.iter().all(|&n| n <= DENSE_MASK_LIMIT) {
        Mask::Dense(bits)
    } else {
        Mask::Indices(bits.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect())
    };
    let mut observed = DenseTensor::zeros(dims)?;
    {
        let o = observed.data_mut();
        mask.for_each(|k| o[k] = m.data()[k]);
    }
    let truth_tnn = tnn(&m);
    Ok(CompletionInstance {
        dims: dims.to_vec(),
        mask,
        observed,
        truth: m,
        truth_tnn,
        rho,
        r,
        tau: COMPLETION_TAU_FRACTION * truth_tnn,
        seed,
    })
}

fn sidecar(dir: &Path, stem: &str, part: &str) -> PathBuf {
    dir.join(format!("{stem}.{part}"))
}

impl CompletionInstance {
    pub fn objective(&self) -> CompletionObjective<'_> {
        CompletionObjective { inst: self }
    }

    /// Rank-`r` truncated projection of the observed tensor.
    pub fn init(&self, r: usize) -> Result<DenseTensor> {
        Ok(truncated_project_tnn(&self.observed, self.tau, r)?.projected)
    }

    pub fn recovery_error(&self, x: &DenseTensor) -> Result<f64> {
        recovery_error(x, &self.truth, self.truth_tnn, self.tau)
    }

    /// Writes `stem.truth.tten`, `stem.mask.tten` and `stem.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        save_tensor(&self.truth, sidecar(dir, stem, "truth.tten"))?;
        save_tensor(&self.mask.to_tensor(&self.dims)?, sidecar(dir, stem, "mask.tten"))?;
        let meta = CompletionMeta {
            dims: self.dims.clone(),
            r: self.r,
            rho: self.rho,
            tau: self.tau,
            seed: self.seed,
        };
        fs::write(sidecar(dir, stem, "json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: CompletionMeta = serde_json::from_str(&fs::read_to_string(sidecar(dir, stem, "json"))?)?;
        let truth = load_tensor(sidecar(dir, stem, "truth.tten"))?;
        let mask_t = load_tensor(sidecar(dir, stem, "mask.tten"))?;
        truth.same_shape(&mask_t, "completion instance")?;
        let observed = truth.zip_map(&mask_t, |v, b| if b != 0.0 { v } else { 0.0 })?;
        Ok(Self {
            dims: meta.dims,
            mask: Mask::from_tensor(&mask_t),
            observed,
            truth_tnn: tnn(&truth),
            truth,
            rho: meta.rho,
            r: meta.r,
            tau: meta.tau,
            seed: meta.seed,
        })
    }
}

/// `f(X) = 1/2 sum over observed entries of (X - M)^2`.
#[derive(Clone, Copy, Debug)]
pub struct CompletionObjective<'a> {
    inst: &'a CompletionInstance,
}

impl SmoothObjective for CompletionObjective<'_> {
    fn value(&self, x: &DenseTensor) -> f64 {
        let (xd, od) = (x.data(), self.inst.observed.data());
        let mut s = 0.0;
        self.inst.mask.for_each(|k| s += (xd[k] - od[k]).powi(2));
        0.5 * s
    }

    fn gradient(&self, x: &DenseTensor) -> DenseTensor {
        let mut g = DenseTensor::zeros(x.dims()).expect("dims of a valid tensor");
        let (xd, od) = (x.data(), self.inst.observed.data());
        let gd = g.data_mut();
        self.inst.mask.for_each(|k| gd[k] = xd[k] - od[k]);
        g
    }

    fn smoothness(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RpcaMeta {
    n: usize,
    r: usize,
    m: f64,
    tau: f64,
    seed: u64,
}

#[derive(Clone, Debug)]
pub struct RpcaInstance {
    pub n: usize,
    pub r: usize,
    /// Probability that an entry is corrupted.
    pub m: f64,
    pub truth: DenseTensor,
    pub truth_tnn: f64,
    pub corrupted: DenseTensor,
    pub tau: f64,
    pub seed: u64,
}

/// `M = P * Q^T` with `P, Q` of size `n x r x n` and `N(0, 1/n)` entries, plus
/// sparse Rademacher noise of density `m`.
pub fn gen_rpca(n: usize, r: usize, m: f64, seed: u64) -> Result<RpcaInstance> {
    if n == 0 || r == 0 || r > n {
        return Err(TubalError::InvalidParameter {
            name: "r",
            reason: format!("need 1 <= r <= n, got r = {r}, n = {n}"),
        });
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(TubalError::InvalidParameter {
            name: "m",
            reason: format!("noise density {m} outside [0, 1]"),
        });
    }
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("positive variance");
    let p = DenseTensor::from_fn(&[n, r, n], |_| normal.sample(&mut rng))?;
    let q = DenseTensor::from_fn(&[n, r, n], |_| normal.sample(&mut rng))?;
    let truth = t_product(&p, &q.t_transpose())?;
    let noise = DenseTensor::from_fn(&[n, n, n], |_| {
        if rng.random::<f64>() < m {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })?;
    let corrupted = truth.add(&noise)?;
    let truth_tnn = tnn(&truth);
    Ok(RpcaInstance {
        n,
        r,
        m,
        truth,
        truth_tnn,
        corrupted,
        tau: RPCA_TAU_FRACTION * truth_tnn,
        seed,
    })
}

impl RpcaInstance {
    pub fn saddle(&self) -> BilinearSaddle {
        BilinearSaddle::new(self.corrupted.clone(), 1.0).expect("unit bound")
    }

    /// Rank-`r` truncated projection of the corrupted tensor and the sign of
    /// its residual.
    pub fn init(&self, r: usize) -> Result<(DenseTensor, DenseTensor)> {
        let x = truncated_project_tnn(&self.corrupted, self.tau, r)?.projected;
        let y = x.sub(&self.corrupted)?.signum0();
        Ok((x, y))
    }

    pub fn recovery_error(&self, x: &DenseTensor) -> Result<f64> {
        recovery_error(x, &self.truth, self.truth_tnn, self.tau)
    }

    pub fn noise(&self) -> DenseTensor {
        self.corrupted.sub(&self.truth).expect("same shape")
    }

    /// Writes `stem.truth.tten`, `stem.corrupted.tten` and `stem.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        save_tensor(&self.truth, sidecar(dir, stem, "truth.tten"))?;
        save_tensor(&self.corrupted, sidecar(dir, stem, "corrupted.tten"))?;
        let meta = RpcaMeta {
            n: self.n,
            r: self.r,
            m: self.m,
            tau: self.tau,
            seed: self.seed,
        };
        fs::write(sidecar(dir, stem, "json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: RpcaMeta = serde_json::from_str(&fs::read_to_string(sidecar(dir, stem, "json"))?)?;
        let truth = load_tensor(sidecar(dir, stem, "truth.tten"))?;
        let corrupted = load_tensor(sidecar(dir, stem, "corrupted.tten"))?;
        truth.same_shape(&corrupted, "robust PCA instance")?;
        Ok(Self {
            n: meta.n,
            r: meta.r,
            m: meta.m,
            truth_tnn: tnn(&truth),
            truth,
            corrupted,
            tau: meta.tau,
            seed: meta.seed,
        })
    }
}

/// `F(X, Y) = <X - C, Y>` over `||Y||_inf <= bound`, so that
/// `max_Y F(X, Y) = bound * ||X - C||_1`.
#[derive(Clone, Debug)]
pub struct BilinearSaddle {
    target: DenseTensor,
    bound: f64,
}

impl BilinearSaddle {
    pub fn new(target: DenseTensor, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(TubalError::InvalidParameter {
                name: "bound",
                reason: format!("dual bound must be positive, got {bound}"),
            });
        }
        Ok(Self { target, bound })
    }

    pub fn target(&self) -> &DenseTensor {
        &self.target
    }
}

impl SaddleObjective for BilinearSaddle {
    fn value(&self, x: &DenseTensor, y: &DenseTensor) -> f64 {
        x.sub(&self.target).and_then(|d| d.inner(y)).expect("matching shapes")
    }

    fn grad_x(&self, _x: &DenseTensor, y: &DenseTensor) -> DenseTensor {
        y.clone()
    }

    fn grad_y(&self, x: &DenseTensor, _y: &DenseTensor) -> DenseTensor {
        x.sub(&self.target).expect("matching shapes")
    }

    fn project_dual(&self, y: &DenseTensor) -> DenseTensor {
        project_linf(y, self.bound)
    }

    fn dual_support(&self, g: &DenseTensor) -> f64 {
        self.bound * g.l1_norm()
    }

    fn primal_value(&self, x: &DenseTensor) -> f64 {
        self.bound * x.sub(&self.target).expect("matching shapes").l1_norm()
    }

    fn smoothness(&self) -> SaddleSmoothness {
        SaddleSmoothness {
            beta_x: 0.0,
            beta_y: 0.0,
            beta_xy: 1.0,
            beta_yx: 1.0,
        }
    }
}

/// `f(X) = 1/2 ||X - C||_F^2`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub center: DenseTensor,
}

impl SmoothObjective for Quadratic {
    fn value(&self, x: &DenseTensor) -> f64 {
        0.5 * x.distance(&self.center).expect("matching shapes").powi(2)
    }

    fn gradient(&self, x: &DenseTensor) -> DenseTensor {
        x.sub(&self.center).expect("matching shapes")
    }

    fn smoothness(&self) -> f64 {
        1.0
    }
}
