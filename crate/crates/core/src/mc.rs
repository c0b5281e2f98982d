//! Monte-Carlo evaluation of the starting averages over the joint Gaussian
//! distribution, and numerical checks of the normalization and axis-fixing
//! identities they rest on.
//!
//! Delta functions are never smoothed. The pinned variables `f = g = 0` are
//! eliminated by Gaussian conditioning, and the pinned first derivatives,
//! independent of everything else, contribute their zero densities as a
//! constant prefactor.

use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::gaussian_model::{CorrelationModel2D, CorrelationModel3D};
use crate::linalg::{self, Mat};

/// Sampling plan. Samples are drawn in batches of `batch`; batch `i` uses
/// stream `i` of a ChaCha8 generator keyed by `seed`, so the estimate
/// depends on `(seed, batch)` but not on how batches are spread over
/// workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_workers: usize,
    pub batch: u64,
}

impl McConfig {
    pub const DEFAULT_BATCH: u64 = 1 << 16;

    pub fn new(n_samples: u64, seed: u64) -> Self {
        McConfig { n_samples, seed, n_workers: 1, batch: Self::DEFAULT_BATCH }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_samples == 0 || self.batch == 0 || self.n_workers == 0 {
            return Err(Error::InvalidArgument("samples, batch and workers must be positive".into()));
        }
        Ok(())
    }

    pub fn n_batches(&self) -> u64 {
        self.n_samples.div_ceil(self.batch)
    }

    /// Size of batch `index`; the last one takes the remainder.
    pub fn batch_len(&self, index: u64) -> u64 {
        self.batch.min(self.n_samples - index * self.batch)
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two disjoint sample sets; not commutative in rounding, so
    /// callers merge in a fixed order.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / ((self.n - 1) as f64 * self.n as f64)).sqrt()
    }
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mean {
    pub value: f64,
    pub stderr: f64,
}

/// Partition of the three-dimensional estimate by the sign of the
/// curvature determinant, and of the birth-plus-death part by the sign of
/// the closing velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McSplit {
    pub reconnection: Mean,
    pub birth_death: Mean,
    pub birth_death_positive_velocity: Mean,
    pub birth_death_negative_velocity: Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    /// Three-dimensional estimates only.
    pub split: Option<McSplit>,
}

impl McEstimate {
    /// Estimate of a field whose vortices never move.
    pub fn zero(n: u64, three_d: bool) -> Self {
        let z = Mean { value: 0.0, stderr: 0.0 };
        let split = McSplit {
            reconnection: z,
            birth_death: z,
            birth_death_positive_velocity: z,
            birth_death_negative_velocity: z,
        };
        McEstimate { value: 0.0, stderr: 0.0, n, split: three_d.then_some(split) }
    }

    /// `|value − reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.value - reference).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Per-sample contributions of one batch, before the constant prefactor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McAccumulator {
    pub total: Welford,
    pub reconnection: Welford,
    pub birth_death: Welford,
    pub bd_positive: Welford,
    pub bd_negative: Welford,
}

impl McAccumulator {
    pub fn merge(&mut self, other: &McAccumulator) {
        self.total.merge(&other.total);
        self.reconnection.merge(&other.reconnection);
        self.birth_death.merge(&other.birth_death);
        self.bd_positive.merge(&other.bd_positive);
        self.bd_negative.merge(&other.bd_negative);
    }
}

fn scaled(w: &Welford, c: f64) -> Mean {
    Mean { value: c * w.mean, stderr: c * w.stderr() }
}

/// Prepared sampler for the planar average
/// `π⟨δ(f)δ(g)δ(f_x)δ(g_x)|f_y g_t − f_t g_y||f_xx g_y − f_y g_xx|⟩`.
#[derive(Debug, Clone)]
pub struct Sampler2D {
    /// Cholesky factor of `(f_t, f_xx, g_t, g_xx)` given `f = g = 0`.
    chol: Option<Mat<4>>,
    sigma_y: f64,
    prefactor: f64,
}

impl Sampler2D {
    pub fn new(model: &CorrelationModel2D) -> Result<Self> {
        let e = &model.entries;
        let prefactor = PI / (2.0 * PI * e.f2) / (2.0 * PI * e.fx2());
        if model.is_degenerate() {
            return Ok(Sampler2D { chol: None, sigma_y: 0.0, prefactor });
        }
        let cond = linalg::schur_complement(&model.corr, [0, 3], [1, 2, 4, 5]).ok_or(Error::SingularConditioning)?;
        let chol = linalg::cholesky_semidefinite(&cond, 1e-12);
        Ok(Sampler2D { chol: Some(chol), sigma_y: e.fx2().sqrt(), prefactor })
    }

    pub fn batch(&self, cfg: &McConfig, index: u64) -> McAccumulator {
        let mut acc = McAccumulator::default();
        let Some(l) = &self.chol else {
            return acc;
        };
        let mut rng = cfg.rng(index);
        for _ in 0..cfg.batch_len(index) {
            let z: [f64; 4] = core::array::from_fn(|_| rng.sample(StandardNormal));
            let x = lower_mul(l, &z);
            let (ft, fxx, gt, gxx) = (x[0], x[1], x[2], x[3]);
            let fy = self.sigma_y * rng.sample::<f64, _>(StandardNormal);
            let gy = self.sigma_y * rng.sample::<f64, _>(StandardNormal);
            let v = fy * gt - ft * gy;
            let curv = fxx * gy - fy * gxx;
            acc.total.push((v * curv).abs());
        }
        acc
    }

    pub fn finish(&self, acc: &McAccumulator) -> McEstimate {
        let t = scaled(&acc.total, self.prefactor);
        McEstimate { value: t.value, stderr: t.stderr, n: acc.total.n, split: None }
    }
}

/// Prepared sampler for the spatial average
/// `2π⟨δ(f)δ(g)δ(f_x)δ(g_x)δ(f_y)δ(g_y)|f_z g_t − f_t g_z||E|⟩`, with `E`
/// the determinant of the difference of the curvature matrices.
#[derive(Debug, Clone)]
pub struct Sampler3D {
    /// Cholesky factor of `(f_t, f_xx, f_yy, g_t, g_xx, g_yy)` given `f = g = 0`.
    chol: Option<Mat<6>>,
    sigma_z: f64,
    sigma_xy: f64,
    prefactor: f64,
}

impl Sampler3D {
    pub fn new(model: &CorrelationModel3D) -> Result<Self> {
        let e = &model.entries;
        let px = 1.0 / (2.0 * PI * e.fx2());
        let prefactor = 2.0 * PI / (2.0 * PI * e.f2) * px * px;
        if model.is_degenerate() {
            return Ok(Sampler3D { chol: None, sigma_z: 0.0, sigma_xy: 0.0, prefactor });
        }
        let cond = linalg::schur_complement(&model.corr, [0, 4], [1, 2, 3, 5, 6, 7])
            .ok_or(Error::SingularConditioning)?;
        let chol = linalg::cholesky_semidefinite(&cond, 1e-12);
        Ok(Sampler3D { chol: Some(chol), sigma_z: e.fx2().sqrt(), sigma_xy: e.fxy2().sqrt(), prefactor })
    }

    pub fn batch(&self, cfg: &McConfig, index: u64) -> McAccumulator {
        let mut acc = McAccumulator::default();
        let Some(l) = &self.chol else {
            return acc;
        };
        let mut rng = cfg.rng(index);
        for _ in 0..cfg.batch_len(index) {
            let z: [f64; 6] = core::array::from_fn(|_| rng.sample(StandardNormal));
            let x = lower_mul(l, &z);
            let (ft, fxx, fyy, gt, gxx, gyy) = (x[0], x[1], x[2], x[3], x[4], x[5]);
            let mut n = || rng.sample::<f64, _>(StandardNormal);
            let (fz, gz) = (self.sigma_z * n(), self.sigma_z * n());
            let (fxy, gxy) = (self.sigma_xy * n(), self.sigma_xy * n());
            let v = fz * gt - ft * gz;
            let cxy = fxy * gz - fz * gxy;
            let e = (fz * gxx - fxx * gz) * (fz * gyy - fyy * gz) - cxy * cxy;
            let w = (v * e).abs();
            acc.total.push(w);
            // a negative determinant is a saddle: reconnection
            let (recon, bd) = if e < 0.0 { (w, 0.0) } else { (0.0, w) };
            acc.reconnection.push(recon);
            acc.birth_death.push(bd);
            acc.bd_positive.push(if v > 0.0 { bd } else { 0.0 });
            acc.bd_negative.push(if v > 0.0 { 0.0 } else { bd });
        }
        acc
    }

    pub fn finish(&self, acc: &McAccumulator) -> McEstimate {
        let c = self.prefactor;
        let recon = scaled(&acc.reconnection, c);
        let bd = scaled(&acc.birth_death, c);
        McEstimate {
            // the partition is exact, so report the sum of the parts
            value: recon.value + bd.value,
            stderr: scaled(&acc.total, c).stderr,
            n: acc.total.n,
            split: Some(McSplit {
                reconnection: recon,
                birth_death: bd,
                birth_death_positive_velocity: scaled(&acc.bd_positive, c),
                birth_death_negative_velocity: scaled(&acc.bd_negative, c),
            }),
        }
    }
}

fn lower_mul<const N: usize>(l: &Mat<N>, z: &[f64; N]) -> [f64; N] {
    core::array::from_fn(|i| (0..=i).map(|j| l[i][j] * z[j]).sum())
}

fn run(cfg: &McConfig, mut batch: impl FnMut(u64) -> McAccumulator) -> Result<McAccumulator> {
    cfg.check()?;
    let mut acc = McAccumulator::default();
    for i in 0..cfg.n_batches() {
        acc.merge(&batch(i));
    }
    Ok(acc)
}

/// Pair-event rate per unit area; zero for motionless vortices.
pub fn mc_rate_2d(model: &CorrelationModel2D, cfg: &McConfig) -> Result<McEstimate> {
    let s = Sampler2D::new(model)?;
    if model.is_degenerate() {
        cfg.check()?;
        return Ok(McEstimate::zero(cfg.n_samples, false));
    }
    Ok(s.finish(&run(cfg, |i| s.batch(cfg, i))?))
}

/// Total event rate per unit volume with its reconnection and
/// birth-plus-death parts; zero for motionless vortices.
pub fn mc_rate_3d(model: &CorrelationModel3D, cfg: &McConfig) -> Result<McEstimate> {
    let s = Sampler3D::new(model)?;
    if model.is_degenerate() {
        cfg.check()?;
        return Ok(McEstimate::zero(cfg.n_samples, true));
    }
    Ok(s.finish(&run(cfg, |i| s.batch(cfg, i))?))
}

/// Local form `f = ½F_xx x'² + F_y y' + F_t t` (and likewise `g`) of two
/// planar zero curves touching at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalForm2D {
    pub f_xx: f64,
    pub f_y: f64,
    pub f_t: f64,
    pub g_xx: f64,
    pub g_y: f64,
    pub g_t: f64,
}

/// Local form `f = ½(F_xx x'² + 2F_xy x'y' + F_yy y'²) + F_z z' + F_t t`
/// (and likewise `g`) of two zero surfaces touching at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalForm3D {
    pub f_xx: f64,
    pub f_xy: f64,
    pub f_yy: f64,
    pub f_z: f64,
    pub f_t: f64,
    pub g_xx: f64,
    pub g_xy: f64,
    pub g_yy: f64,
    pub g_z: f64,
    pub g_t: f64,
}

/// Relative size below which a closing speed or curvature gap counts as zero.
const DEGENERACY_TOL: f64 = 1e-9;

fn negligible(x: f64, scale: f64) -> bool {
    !(x.abs() > DEGENERACY_TOL * scale)
}

impl LocalForm2D {
    pub fn check(&self) -> Result<()> {
        let s1 = self.f_y.abs().max(self.f_t.abs()) * self.g_y.abs().max(self.g_t.abs());
        if negligible(self.f_y * self.g_t - self.f_t * self.g_y, s1) {
            return Err(Error::DegenerateLocalForm("zero closing speed"));
        }
        let s2 = self.f_xx.abs().max(self.f_y.abs()) * self.g_xx.abs().max(self.g_y.abs());
        if negligible(self.f_xx * self.g_y - self.f_y * self.g_xx, s2) {
            return Err(Error::DegenerateLocalForm("zero contours do not separate"));
        }
        Ok(())
    }

    /// `(f, g, f_x, g_x)` at lab point `(x, y, t)` with the local frame
    /// turned by `θ`.
    fn constraints(&self, p: [f64; 4]) -> [f64; 4] {
        let [x, y, t, th] = p;
        let (s, c) = th.sin_cos();
        let xp = c * x + s * y;
        let yp = -s * x + c * y;
        let f = 0.5 * self.f_xx * xp * xp + self.f_y * yp + self.f_t * t;
        let g = 0.5 * self.g_xx * xp * xp + self.g_y * yp + self.g_t * t;
        let fx = self.f_xx * xp * c - self.f_y * s;
        let gx = self.g_xx * xp * c - self.g_y * s;
        [f, g, fx, gx]
    }

    /// Weight `|f_y g_t − f_t g_y||f_xx g_y − f_y g_xx|` at the origin.
    fn weight(&self, th: f64) -> f64 {
        let c = th.cos();
        let (fy, gy) = (self.f_y * c, self.g_y * c);
        let (fxx, gxx) = (self.f_xx * c * c, self.g_xx * c * c);
        ((fy * self.g_t - self.f_t * gy) * (fxx * gy - fy * gxx)).abs()
    }
}

impl LocalForm3D {
    pub fn check(&self) -> Result<()> {
        let s1 = self.f_z.abs().max(self.f_t.abs()) * self.g_z.abs().max(self.g_t.abs());
        if negligible(self.f_z * self.g_t - self.f_t * self.g_z, s1) {
            return Err(Error::DegenerateLocalForm("zero closing speed"));
        }
        let [[a, b], [_, d]] = self.gap();
        let scale = [self.f_xx, self.f_xy, self.f_yy, self.f_z, self.g_xx, self.g_xy, self.g_yy, self.g_z]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if negligible(a * d - b * b, scale.powi(4)) {
            return Err(Error::DegenerateLocalForm("zero surfaces do not separate"));
        }
        Ok(())
    }

    /// `G_z H_F − F_z H_G`, the gap curvature between the touching surfaces.
    fn gap(&self) -> [[f64; 2]; 2] {
        let m = |f: f64, g: f64| self.g_z * f - self.f_z * g;
        let xy = m(self.f_xy, self.g_xy);
        [[m(self.f_xx, self.g_xx), xy], [xy, m(self.f_yy, self.g_yy)]]
    }

    /// `(f, g, f_x, g_x, f_y, g_y)` at `(x, y, z, t)` for a local frame
    /// whose normal is `pole · n(n1, n2)` and which is turned by `ψ` about it.
    fn constraints(&self, p: [f64; 6], pole: &Mat<3>, psi: f64) -> [f64; 6] {
        let [x, y, z, t, n1, n2] = p;
        let r = frame(pole, n1, n2, psi);
        // local coordinates r' = Rᵀ r
        let lp: [f64; 3] = core::array::from_fn(|i| r[0][i] * x + r[1][i] * y + r[2][i] * z);
        let h = |xx: f64, xy: f64, yy: f64| [[xx, xy, 0.0], [xy, yy, 0.0], [0.0, 0.0, 0.0]];
        let (hf, hg) = (h(self.f_xx, self.f_xy, self.f_yy), h(self.g_xx, self.g_xy, self.g_yy));
        let quad = |hm: &Mat<3>| -> f64 { (0..3).map(|i| (0..3).map(|j| lp[i] * hm[i][j] * lp[j]).sum::<f64>()).sum() };
        let f = 0.5 * quad(&hf) + self.f_z * lp[2] + self.f_t * t;
        let g = 0.5 * quad(&hg) + self.g_z * lp[2] + self.g_t * t;
        let grad = |hm: &Mat<3>, nz: f64| -> [f64; 3] {
            let local: [f64; 3] = core::array::from_fn(|i| (0..3).map(|j| hm[i][j] * lp[j]).sum::<f64>() + if i == 2 { nz } else { 0.0 });
            core::array::from_fn(|i| (0..3).map(|j| r[i][j] * local[j]).sum())
        };
        let (gf, gg) = (grad(&hf, self.f_z), grad(&hg, self.g_z));
        [f, g, gf[0], gg[0], gf[1], gg[1]]
    }

    /// Weight `|f_z g_t − f_t g_z||E|` at the origin; both factors are
    /// invariant under turns about the normal, so only the pole matters.
    fn weight(&self, pole: &Mat<3>) -> f64 {
        // the normal is ±z; the gradient components along z flip with it,
        // and so does the in-plane handedness, leaving E's sign intact
        let sz = pole[2][2];
        let (fz, gz) = (sz * self.f_z, sz * self.g_z);
        let [[a, b], [_, d]] = self.gap();
        let v = fz * self.g_t - self.f_t * gz;
        (v * (a * d - b * b)).abs()
    }
}

/// `pole · R_min(n) · R_z(ψ)`, where `R_min` is the least rotation taking
/// `ẑ` to `n = (n1, n2, √(1 − n1² − n2²))`.
fn frame(pole: &Mat<3>, n1: f64, n2: f64, psi: f64) -> Mat<3> {
    let nz = (1.0 - n1 * n1 - n2 * n2).sqrt();
    // k = ẑ × n
    let (kx, ky) = (-n2, n1);
    let kx_ = [[0.0, 0.0, ky], [0.0, 0.0, -kx], [-ky, kx, 0.0]];
    let kk = linalg::mat_mul(&kx_, &kx_);
    let mut rmin = linalg::identity::<3>();
    for i in 0..3 {
        for j in 0..3 {
            rmin[i][j] += kx_[i][j] + kk[i][j] / (1.0 + nz);
        }
    }
    let (s, c) = psi.sin_cos();
    let rz = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    linalg::mat_mul(pole, &linalg::mat_mul(&rmin, &rz))
}

/// Central-difference Jacobian, Richardson-extrapolated from steps `h` and `h/2`.
fn jacobian<const N: usize>(f: impl Fn([f64; N]) -> [f64; N], at: [f64; N], h: f64) -> Mat<N> {
    let diff = |j: usize, h: f64| -> [f64; N] {
        let (mut p, mut m) = (at, at);
        p[j] += h;
        m[j] -= h;
        let (fp, fm) = (f(p), f(m));
        core::array::from_fn(|i| (fp[i] - fm[i]) / (2.0 * h))
    };
    let mut out = [[0.0; N]; N];
    for j in 0..N {
        let (d1, d2) = (diff(j, h), diff(j, 0.5 * h));
        for i in 0..N {
            out[i][j] = (4.0 * d2[i] - d1[i]) / 3.0;
        }
    }
    out
}

const FD_STEP: f64 = 1e-3;

/// `π ∫∫ δ(f)δ(g)δ(f_x)δ(g_x) W dx dy dt dθ/2π` for a planar local form.
///
/// The delta functions fix `x = y = t = 0` and `θ ∈ {0, π}`; each root
/// contributes `W/|det J|` with `J` the Jacobian of the constraints in
/// `(x, y, t, θ)`, taken by finite differences.
pub fn normalization_2d(form: &LocalForm2D) -> Result<f64> {
    form.check()?;
    let mut sum = 0.0;
    for th in [0.0, PI] {
        let j = jacobian(|p| form.constraints(p), [0.0, 0.0, 0.0, th], FD_STEP);
        let det = linalg::det(&j);
        if det == 0.0 {
            return Err(Error::DegenerateLocalForm("singular constraint Jacobian"));
        }
        sum += form.weight(th) / det.abs();
    }
    Ok(PI * sum / (2.0 * PI))
}

/// `2π ∫ δ⁶ W dx dy dz dt dα d(cos β) dγ/8π²` for a spatial local form.
///
/// Rotations are parametrized by the lab direction of the local normal and
/// a turn `ψ` about it, with the same invariant measure. The delta
/// functions fix the event at the origin and the normal at either pole;
/// the turn is integrated by the periodic trapezoid rule on `n_psi` nodes.
pub fn normalization_3d(form: &LocalForm3D, n_psi: usize) -> Result<f64> {
    form.check()?;
    if n_psi == 0 {
        return Err(Error::InvalidArgument("n_psi must be positive".into()));
    }
    let north = linalg::identity::<3>();
    let south = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    let mut total = 0.0;
    for pole in [north, south] {
        let w = form.weight(&pole);
        let mut sum = 0.0;
        for i in 0..n_psi {
            let psi = 2.0 * PI * i as f64 / n_psi as f64;
            let j = jacobian(|p| form.constraints(p, &pole, psi), [0.0; 6], FD_STEP);
            let det = linalg::det(&j);
            if det == 0.0 {
                return Err(Error::DegenerateLocalForm("singular constraint Jacobian"));
            }
            // dΩ = dn1 dn2 / n_z, and n_z = 1 at the pole
            sum += w / det.abs();
        }
        total += 2.0 * PI * sum / n_psi as f64;
    }
    Ok(2.0 * PI * total / (8.0 * PI * PI))
}

/// The two axis-fixing checks on a planar model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisFixing {
    /// `⟨|∇f|²⟩ = 2⟨f_x²⟩`.
    pub gradient_lhs: f64,
    /// `π p(f_x = 0) ⟨|f_y|³⟩`.
    pub gradient_rhs: f64,
    /// `⟨f_x²⟩/(2π⟨f²⟩)`.
    pub density_closed_form: f64,
    /// `π p(f=0)p(g=0)p(f_x=0) ⟨f_y²|g_x|⟩`, sampled.
    pub density_mc: McEstimate,
}

/// Checks `⟨•⟩ = π⟨• δ(f_x/f_y)⟩` for `• = |∇f|²` by Gaussian moment
/// algebra, and the vortex density it implies by sampling.
pub fn axis_fixing_check(model: &CorrelationModel2D, cfg: &McConfig) -> Result<AxisFixing> {
    cfg.check()?;
    let e = &model.entries;
    let s2 = e.fx2();
    let s = s2.sqrt();
    let p0 = 1.0 / (2.0 * PI * s2).sqrt();
    // E|X|³ = 2√(2/π) σ³
    let abs3 = 2.0 * (2.0 / PI).sqrt() * s2 * s;
    let gradient_rhs = PI * p0 * abs3;
    let prefactor = PI / (2.0 * PI * e.f2) * p0;
    let mut acc = Welford::default();
    for i in 0..cfg.n_batches() {
        let mut rng = cfg.rng(i);
        let mut w = Welford::default();
        for _ in 0..cfg.batch_len(i) {
            let fy = s * rng.sample::<f64, _>(StandardNormal);
            let gx = s * rng.sample::<f64, _>(StandardNormal);
            w.push(fy * fy * gx.abs());
        }
        acc.merge(&w);
    }
    let m = scaled(&acc, prefactor);
    Ok(AxisFixing {
        gradient_lhs: 2.0 * s2,
        gradient_rhs,
        density_closed_form: s2 / (2.0 * PI * e.f2),
        density_mc: McEstimate { value: m.value, stderr: m.stderr, n: acc.n, split: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_model::{build_2d, build_3d};
    use crate::rates::{rate_2d, rates_3d};
    use crate::spectra::{Dimension, Spectrum, SpectrumKind};

    fn model_3d(kind: SpectrumKind) -> CorrelationModel3D {
        build_3d(&Spectrum::new(Dimension::Three, kind).moments().unwrap()).unwrap()
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: [f64; 7] = [1.0, 4.0, -2.0, 8.5, 0.25, 3.0, 3.0];
        let mut one = Welford::default();
        xs.iter().for_each(|&x| one.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..3].iter().for_each(|&x| a.push(x));
        xs[3..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.n, one.n);
        assert!((a.mean - one.mean).abs() < 1e-14);
        assert!((a.m2 - one.m2).abs() < 1e-12);
    }

    #[test]
    fn special_dispersion_2d() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 }).moments().unwrap();
        let exact = rate_2d(&m).unwrap().pair_events.unwrap();
        let est = mc_rate_2d(&build_2d(&m).unwrap(), &McConfig::new(200_000, 11)).unwrap();
        assert!(est.z_score(exact) < 4.0, "{est:?} vs {exact}");
    }

    #[test]
    fn blackbody_3d_and_split() {
        let model = model_3d(SpectrumKind::Blackbody { w: 1.0, c: 1.0 });
        let exact = rates_3d(&model.moments).unwrap();
        let est = mc_rate_3d(&model, &McConfig::new(200_000, 5)).unwrap();
        assert!(est.z_score(exact.total()) < 4.0, "{est:?}");
        let split = est.split.unwrap();
        assert!(((split.reconnection.value - exact.reconnection.unwrap()) / split.reconnection.stderr).abs() < 4.0);
        assert!((split.reconnection.value + split.birth_death.value - est.value).abs() <= 1e-12 * est.value);
        let (p, n) = (split.birth_death_positive_velocity, split.birth_death_negative_velocity);
        assert!((p.value - n.value).abs() < 4.0 * p.stderr.hypot(n.stderr));
    }

    #[test]
    fn motionless_vortices_give_zero() {
        let model = model_3d(SpectrumKind::Monochromatic { k: 1.0, omega: 1.0 });
        let est = mc_rate_3d(&model, &McConfig::new(1000, 1)).unwrap();
        assert_eq!((est.value, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn independent_of_batching_across_workers() {
        let model = model_3d(SpectrumKind::Blackbody { w: 1.0, c: 1.0 });
        let cfg = McConfig { n_samples: 10_000, seed: 3, n_workers: 1, batch: 1000 };
        let a = mc_rate_3d(&model, &cfg).unwrap();
        let b = mc_rate_3d(&model, &McConfig { n_workers: 8, ..cfg }).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = mc_rate_3d(&model, &McConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn planar_normalization() {
        let form = LocalForm2D { f_xx: 1.0, f_y: 1.0, f_t: 1.0, g_xx: -1.0, g_y: 2.0, g_t: 0.0 };
        assert!((normalization_2d(&form).unwrap() - 1.0).abs() < 1e-6);
        let prop = LocalForm2D { f_xx: 1.0, f_y: 2.0, f_t: 3.0, g_xx: 2.0, g_y: 4.0, g_t: 6.0 };
        assert!(matches!(normalization_2d(&prop), Err(Error::DegenerateLocalForm(_))));
    }

    #[test]
    fn spatial_normalization() {
        let form = LocalForm3D {
            f_xx: 1.3,
            f_xy: -0.4,
            f_yy: 0.7,
            f_z: 0.9,
            f_t: -1.1,
            g_xx: -0.2,
            g_xy: 0.8,
            g_yy: 1.5,
            g_z: -0.6,
            g_t: 0.5,
        };
        assert!((normalization_3d(&form, 8).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn axis_fixing() {
        let m = SpectralMoments::new(Dimension::Two, 1.0, 1.0, 1.0, 1.0, 1.0);
        let r = axis_fixing_check(&build_2d(&m).unwrap(), &McConfig::new(100_000, 2)).unwrap();
        assert!((r.gradient_lhs - r.gradient_rhs).abs() < 1e-12);
        assert!((r.density_closed_form - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(r.density_mc.z_score(r.density_closed_form) < 4.0);
    }

    use crate::spectra::SpectralMoments;
}
