//! Finite plane-wave realizations of the random field, and direct
//! detection of topological events in a spacetime box.
//!
//! An event is a point where the zero sets of `f` and `g` touch: in the
//! plane `f = g = f_x g_y − f_y g_x = 0`, in space `f = g = 0` with
//! `∇f × ∇g = 0`. Roots are found by damped Newton iteration from grid
//! seeds and classified from the local normal form.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectra::{Dimension, SpectralMoments, Spectrum};

/// Fewer waves than this give visibly non-Gaussian statistics.
pub const MIN_GAUSSIAN_WAVES: usize = 50;

/// `a exp[i(k·r − ωt + φ)]`; `k[2] = 0` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Wave {
    pub amplitude: f64,
    pub k: [f64; 3],
    pub omega: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldRealization {
    pub dimension: Dimension,
    pub waves: Vec<Wave>,
    pub seed: u64,
}

/// Value and derivatives of `f` and `g` up to second order in `(x, y, z, t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub g: f64,
    pub df: [f64; 4],
    pub dg: [f64; 4],
    pub d2f: [[f64; 4]; 4],
    pub d2g: [[f64; 4]; 4],
}

/// Draws `n_waves` waves from `spectrum` with isotropic directions and
/// uniform phases. Amplitudes are equal and normalized so that
/// `⟨f²⟩ = ⟨g²⟩` matches the spectrum's field variance.
///
/// Wave `i` takes its `(k, ω)` from a uniform quantile in
/// `[i/n, (i+1)/n)`. Each wave is still distributed as the spectrum, but
/// the realization's own moments scatter much less: with independent
/// draws a few hundred waves bias the 3D rates low by over ten percent,
/// because the rates are concave in the sampled `k̄⁴`.
pub fn synthesize(spectrum: &Spectrum, n_waves: usize, seed: u64) -> Result<FieldRealization> {
    if n_waves < 2 {
        return Err(Error::InvalidArgument(alloc::format!("need at least 2 waves, got {n_waves}")));
    }
    if n_waves < MIN_GAUSSIAN_WAVES {
        log::warn!("{n_waves} waves is too few for Gaussian statistics");
    }
    let sampler = spectrum.sampler()?;
    let amplitude = (2.0 * spectrum.field_variance / n_waves as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let waves = (0..n_waves)
        .map(|i| {
            let (k, omega) = sampler.sample_at((i as f64 + rng.random::<f64>()) / n_waves as f64);
            let dir = match spectrum.dimension {
                Dimension::Two => {
                    let th: f64 = angle.sample(&mut rng);
                    [th.cos(), th.sin(), 0.0]
                }
                Dimension::Three => loop {
                    let v: [f64; 3] = core::array::from_fn(|_| rng.sample(StandardNormal));
                    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    if n > 1e-12 {
                        break v.map(|c| c / n);
                    }
                },
            };
            let phase = angle.sample(&mut rng);
            Wave { amplitude, k: dir.map(|c| k * c), omega, phase }
        })
        .collect();
    Ok(FieldRealization { dimension: spectrum.dimension, waves, seed })
}

impl FieldRealization {
    pub fn value(&self, p: [f64; 4]) -> Complex64 {
        self.waves.iter().map(|w| Complex64::from_polar(w.amplitude, theta(w, p))).sum()
    }

    pub fn jet(&self, p: [f64; 4]) -> Jet {
        let mut j = Jet::default();
        for w in &self.waves {
            let (s, c) = theta(w, p).sin_cos();
            let (re, im) = (w.amplitude * c, w.amplitude * s);
            let kappa = [w.k[0], w.k[1], w.k[2], -w.omega];
            j.f += re;
            j.g += im;
            for m in 0..4 {
                // ∂ multiplies each wave by iκ
                j.df[m] -= kappa[m] * im;
                j.dg[m] += kappa[m] * re;
                for n in m..4 {
                    let kk = kappa[m] * kappa[n];
                    j.d2f[m][n] -= kk * re;
                    j.d2g[m][n] -= kk * im;
                }
            }
        }
        for m in 0..4 {
            for n in 0..m {
                j.d2f[m][n] = j.d2f[n][m];
                j.d2g[m][n] = j.d2g[n][m];
            }
        }
        j
    }

    /// `e^{iα} ψ`: same zeros and tangencies, different `f` and `g`.
    pub fn rotated_phase(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.waves.iter_mut().for_each(|w| w.phase += alpha);
        out
    }

    /// `ψ e^{iΩt}`. A time-dependent global phase leaves the zero set in
    /// spacetime unchanged, so events can be located on the field with its
    /// mean frequency removed, which varies on the slower scale of the
    /// frequency spread.
    pub fn demodulated(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.waves.iter_mut().for_each(|w| w.omega -= shift);
        out
    }

    pub fn mean_frequency(&self) -> f64 {
        let (num, den) = self
            .waves
            .iter()
            .fold((0.0, 0.0), |(n, d), w| (n + w.amplitude * w.amplitude * w.omega, d + w.amplitude * w.amplitude));
        num / den
    }

    /// Spectral moments of the realization itself, weighted by intensity.
    pub fn empirical_moments(&self) -> SpectralMoments {
        let mut acc = [0.0; 6];
        for w in &self.waves {
            let i = w.amplitude * w.amplitude;
            let k2 = w.k.iter().map(|c| c * c).sum::<f64>();
            for (a, v) in acc.iter_mut().zip([i, i * k2, i * k2 * k2, i * w.omega, i * w.omega * w.omega, i * w.omega * k2]) {
                *a += v;
            }
        }
        let n = acc[0];
        SpectralMoments::new(self.dimension, acc[1] / n, acc[2] / n, acc[3] / n, acc[4] / n, acc[5] / n)
            .with_field_variance(0.5 * n)
    }
}

fn theta(w: &Wave, p: [f64; 4]) -> f64 {
    w.k[0] * p[0] + w.k[1] * p[1] + w.k[2] * p[2] - w.omega * p[3] + w.phase
}

/// Half-open box `lo ≤ p < hi` in `(x, y, z, t)`; the `z` range is ignored
/// in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpacetimeBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl SpacetimeBox {
    pub fn cube(dimension: Dimension, side: f64, duration: f64) -> Self {
        let z = if dimension == Dimension::Three { side } else { 0.0 };
        SpacetimeBox { lo: [0.0; 4], hi: [side, side, z, duration] }
    }

    fn axes(&self, d: Dimension) -> &'static [usize] {
        match d {
            Dimension::Two => &[0, 1, 3],
            Dimension::Three => &[0, 1, 2, 3],
        }
    }

    /// Area (or volume) times duration.
    pub fn measure(&self, d: Dimension) -> f64 {
        self.axes(d).iter().map(|&i| self.hi[i] - self.lo[i]).product()
    }

    pub fn contains(&self, d: Dimension, p: &[f64; 4]) -> bool {
        self.axes(d).iter().all(|&i| p[i] >= self.lo[i] && p[i] < self.hi[i])
    }

    fn check(&self, d: Dimension) -> Result<()> {
        if self.axes(d).iter().all(|&i| self.hi[i] > self.lo[i]) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("box must have positive extent".into()))
        }
    }
}

/// Target spacing of the seeding grid; cells are shrunk to divide the box evenly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub spacing: f64,
    pub dt: f64,
}

impl Grid {
    /// A sixteenth of the dominant wavelength `2π/√k̄²` and of the period
    /// `2π/σ_ω` of the frequency spread. Coarser grids start Newton too far
    /// from some roots.
    pub fn for_moments(m: &SpectralMoments) -> Self {
        let spread = m.frequency_variance().sqrt();
        let dt = if spread > 0.0 { 2.0 * PI / spread / 16.0 } else { f64::INFINITY };
        Grid { spacing: 2.0 * PI / m.k2.sqrt() / 16.0, dt }
    }
}

/// Acceptance thresholds of a root.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootTolerance {
    /// Bound on `|f|` and `|g|`, relative to the field's standard deviation.
    pub value: f64,
    /// Bound on the sine of the angle between `∇f` and `∇g`.
    pub tangency: f64,
    pub max_iterations: u32,
}

impl Default for RootTolerance {
    fn default() -> Self {
        RootTolerance { value: 1e-9, tangency: 1e-8, max_iterations: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EventKind {
    Birth,
    Death,
    Reconnection,
    PairCreation,
    PairAnnihilation,
}

/// Convergence data of a root.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Residuals {
    pub f: f64,
    pub g: f64,
    /// `|∇f × ∇g|/(|∇f||∇g|)`.
    pub tangency: f64,
    pub iterations: u32,
}

/// Local normal form at a root: with `n` the common normal, the vortices
/// near the event lie on `ξᵀMξ = −2vt`, where `M = f_n H_g − g_n H_f`
/// restricted to the tangent directions and `v = f_n g_t − g_n f_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalForm {
    pub velocity: f64,
    /// `det M` in space, `M` itself in the plane.
    pub curvature_det: f64,
    /// `tr M` in space, `M` itself in the plane.
    pub curvature_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventRecord {
    /// `(x, y)` or `(x, y, z)`.
    pub location: Vec<f64>,
    pub time: f64,
    pub kind: EventKind,
    pub residuals: Residuals,
    pub normal_form: NormalForm,
}

impl EventRecord {
    fn point(&self) -> [f64; 4] {
        let z = self.location.get(2).copied().unwrap_or(0.0);
        [self.location[0], self.location[1], z, self.time]
    }
}

/// Grid axis: `n` cells of width `h` starting at `lo`.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    h: f64,
    n: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, target: f64) -> Self {
        let n = (((hi - lo) / target).ceil() as usize).max(1);
        Axis { lo, h: (hi - lo) / n as f64, n }
    }

    fn node(&self, i: usize) -> f64 {
        self.lo + self.h * i as f64
    }
}

/// Field and gradient on one time slice of the grid, by separable phasors.
/// Entry `[f, g, ∂f.., ∂g..]` with spatial gradients only.
fn slice(real: &FieldRealization, axes: &[Axis; 3], t: f64) -> Vec<[f64; 8]> {
    let phasors = |a: &Axis, c: usize| -> Vec<Vec<Complex64>> {
        real.waves
            .iter()
            .map(|w| (0..=a.n).map(|i| Complex64::from_polar(1.0, w.k[c] * a.node(i))).collect())
            .collect()
    };
    let (ex, ey, ez) = (phasors(&axes[0], 0), phasors(&axes[1], 1), phasors(&axes[2], 2));
    let base: Vec<Complex64> =
        real.waves.iter().map(|w| Complex64::from_polar(w.amplitude, w.phase - w.omega * t)).collect();
    let (nx, ny, nz) = (axes[0].n + 1, axes[1].n + 1, axes[2].n + 1);
    let mut out = alloc::vec![[0.0; 8]; nx * ny * nz];
    let mut bxy = alloc::vec![Complex64::new(0.0, 0.0); real.waves.len()];
    for i in 0..nx {
        for j in 0..ny {
            for (w, b) in bxy.iter_mut().enumerate() {
                *b = base[w] * ex[w][i] * ey[w][j];
            }
            for l in 0..nz {
                let mut acc = [Complex64::new(0.0, 0.0); 4];
                for (w, wave) in real.waves.iter().enumerate() {
                    let p = bxy[w] * ez[w][l];
                    acc[0] += p;
                    for c in 0..3 {
                        acc[c + 1] += p * wave.k[c];
                    }
                }
                // ∂ψ = i k ψ
                let node = &mut out[(i * ny + j) * nz + l];
                node[0] = acc[0].re;
                node[1] = acc[0].im;
                for c in 0..3 {
                    node[2 + c] = -acc[c + 1].im;
                    node[5 + c] = acc[c + 1].re;
                }
            }
        }
    }
    out
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Quantities that all vanish at an event: `f`, `g` and the tangency
/// indicator (`f_x g_y − f_y g_x`, or the three components of `∇f × ∇g`).
fn indicators(node: &[f64; 8]) -> [f64; 5] {
    let gf = [node[2], node[3], node[4]];
    let gg = [node[5], node[6], node[7]];
    let c = cross(gf, gg);
    [node[0], node[1], c[2], c[0], c[1]]
}

/// Finds events of `real` inside `bx` by Newton iteration from every grid
/// cell whose corner values of `ψ` surround zero and over which each
/// tangency indicator changes sign.
/// Returned events are sorted by `(t, x, y, z)`.
pub fn find_events(real: &FieldRealization, bx: &SpacetimeBox, grid: &Grid, tol: &RootTolerance) -> Result<Vec<EventRecord>> {
    let d = real.dimension;
    bx.check(d)?;
    if !(grid.spacing > 0.0) || !(grid.dt > 0.0) {
        return Err(Error::InvalidArgument("grid spacing and time step must be positive".into()));
    }
    if !grid.dt.is_finite() {
        // no frequency spread: the vortices do not move
        return Ok(Vec::new());
    }
    let three = d == Dimension::Three;
    let n_ind = if three { 5 } else { 3 };
    let axes = [
        Axis::new(bx.lo[0], bx.hi[0], grid.spacing),
        Axis::new(bx.lo[1], bx.hi[1], grid.spacing),
        if three { Axis::new(bx.lo[2], bx.hi[2], grid.spacing) } else { Axis { lo: 0.0, h: 0.0, n: 0 } },
    ];
    let taxis = Axis::new(bx.lo[3], bx.hi[3], grid.dt);
    let (ny, nz) = (axes[1].n + 1, axes[2].n + 1);
    let em = real.empirical_moments();
    let scales = Scales { value: em.f2.sqrt(), cross: em.f2 * em.k2 };
    let cell = [axes[0].h, axes[1].h, axes[2].h, taxis.h];
    let mut candidates: Vec<EventRecord> = Vec::new();
    let mut prev = slice(real, &axes, taxis.node(0)).iter().map(indicators).collect::<Vec<_>>();
    for it in 0..taxis.n {
        let next = slice(real, &axes, taxis.node(it + 1)).iter().map(indicators).collect::<Vec<_>>();
        for i in 0..axes[0].n {
            for j in 0..axes[1].n {
                for l in 0..axes[2].n.max(1) {
                    let dl = if three { 1 } else { 0 };
                    let mut lo = [f64::INFINITY; 5];
                    let mut hi = [f64::NEG_INFINITY; 5];
                    let mut phases = [0.0; 16];
                    let mut n_corner = 0;
                    for s in [&prev, &next] {
                        for (di, dj, dk) in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, dl), (1, 0, dl), (0, 1, dl), (1, 1, dl)] {
                            let v = &s[((i + di) * ny + j + dj) * nz + l + dk];
                            for q in 2..n_ind {
                                lo[q] = lo[q].min(v[q]);
                                hi[q] = hi[q].max(v[q]);
                            }
                            phases[n_corner] = v[1].atan2(v[0]);
                            n_corner += 1;
                        }
                    }
                    if (2..n_ind).any(|q| lo[q] > 0.0 || hi[q] < 0.0) || !encloses_zero(&mut phases[..n_corner]) {
                        continue;
                    }
                    let seed = [
                        axes[0].node(i) + 0.5 * axes[0].h,
                        axes[1].node(j) + 0.5 * axes[1].h,
                        if three { axes[2].node(l) + 0.5 * axes[2].h } else { 0.0 },
                        taxis.node(it) + 0.5 * taxis.h,
                    ];
                    if let Some(ev) = refine(real, seed, &cell, &scales, tol) {
                        if bx.contains(d, &ev.point()) {
                            candidates.push(ev);
                        }
                    }
                }
            }
        }
        prev = next;
    }
    Ok(dedupe(candidates, &cell))
}

/// Largest gap between successive corner phases that still admits a zero
/// in the cell. Exactly π for a field linear over the cell; the slack
/// covers curvature, which lets small short-lived loops hide between
/// corners.
const PHASE_GAP: f64 = 1.25 * PI;

/// Whether the corner values with these phases can surround a zero, i.e.
/// no gap between successive phases reaches [`PHASE_GAP`]. Unlike sign
/// changes of `f` and `g`, this is unchanged by a global phase rotation.
fn encloses_zero(phases: &mut [f64]) -> bool {
    phases.sort_by(f64::total_cmp);
    let wrap = phases[0] + 2.0 * PI - phases[phases.len() - 1];
    let gap = phases.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
    gap <= PHASE_GAP
}

/// Fraction of a cell within which two converged roots are the same root.
/// Converged roots agree far more closely; distinct events can be much
/// nearer than a cell, as a loop born and dying soon after.
const SAME_ROOT: f64 = 1e-4;

/// Merges roots found from several seeds, keeping the smallest residual,
/// and sorts by `(t, x, y, z)`.
fn dedupe(mut events: Vec<EventRecord>, cell: &[f64; 4]) -> Vec<EventRecord> {
    let key = |e: &EventRecord| e.residuals.f.abs() + e.residuals.g.abs() + e.residuals.tangency;
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut kept: Vec<EventRecord> = Vec::new();
    for e in events {
        let p = e.point();
        let dup = kept.iter_mut().rev().take_while(|k| p[3] - k.time <= SAME_ROOT * cell[3]).find(|k| {
            let q = k.point();
            (0..3).all(|c| (p[c] - q[c]).abs() <= SAME_ROOT * cell[c])
        });
        match dup {
            Some(k) if key(&e) < key(k) => *k = e,
            Some(_) => {}
            None => kept.push(e),
        }
    }
    kept.sort_by(|a, b| {
        let (p, q) = (a.point(), b.point());
        p[3].total_cmp(&q[3])
            .then(p[0].total_cmp(&q[0]))
            .then(p[1].total_cmp(&q[1]))
            .then(p[2].total_cmp(&q[2]))
    });
    kept
}

/// Damped Newton from `seed`; `None` on divergence, on leaving the seed's
/// neighbourhood, or when the gradients degenerate.
/// Fixed residual scales, so that the Newton Jacobian is exact: field
/// values by `σ`, gradient cross products by `σ² k̄²`.
struct Scales {
    value: f64,
    cross: f64,
}

fn refine(real: &FieldRealization, seed: [f64; 4], cell: &[f64; 4], scales: &Scales, tol: &RootTolerance) -> Option<EventRecord> {
    let sigma = scales.value;
    let three = real.dimension == Dimension::Three;
    let mut p = seed;
    let system = |j: &Jet| -> Option<([f64; 4], [[f64; 4]; 4])> {
        let (gf, gg) = ([j.df[0], j.df[1], j.df[2]], [j.dg[0], j.dg[1], j.dg[2]]);
        if norm(gf) == 0.0 {
            return None;
        }
        let scale = 1.0 / scales.cross;
        let mut r = [j.f / sigma, j.g / sigma, 0.0, 0.0];
        let mut m = [[0.0; 4]; 4];
        m[0] = j.df.map(|v| v / sigma);
        m[1] = j.dg.map(|v| v / sigma);
        // ∂_μ(∇f × ∇g) = ∇f_μ × ∇g + ∇f × ∇g_μ
        let dc: [[f64; 3]; 4] = core::array::from_fn(|mu| {
            let a = cross([j.d2f[0][mu], j.d2f[1][mu], j.d2f[2][mu]], gg);
            let b = cross(gf, [j.d2g[0][mu], j.d2g[1][mu], j.d2g[2][mu]]);
            [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
        });
        let c = cross(gf, gg);
        if three {
            // ∇f × ∇g ⟂ ∇f, so the component along ∇f's largest entry
            // follows from the other two
            let drop = (0..3).max_by(|&a, &b| gf[a].abs().total_cmp(&gf[b].abs())).unwrap();
            let keep: Vec<usize> = (0..3).filter(|&q| q != drop).collect();
            for (row, &q) in keep.iter().enumerate() {
                r[2 + row] = c[q] * scale;
                m[2 + row] = core::array::from_fn(|mu| dc[mu][q] * scale);
            }
        } else {
            r[2] = c[2] * scale;
            m[2] = core::array::from_fn(|mu| dc[mu][2] * scale);
            // unknowns (x, y, t): fold t into slot 2 and pin z
            for row in m.iter_mut().take(3) {
                row[2] = row[3];
                row[3] = 0.0;
            }
            m[3] = [0.0, 0.0, 0.0, 1.0];
        }
        Some((r, m))
    };
    let merit = |r: &[f64; 4]| r.iter().map(|v| v * v).sum::<f64>();
    let unpack = |dx: [f64; 4]| if three { dx } else { [dx[0], dx[1], 0.0, dx[2]] };
    let mut jet = real.jet(p);
    let (mut r, mut m) = system(&jet)?;
    let mut iterations = 0;
    loop {
        let (gf, gg) = ([jet.df[0], jet.df[1], jet.df[2]], [jet.dg[0], jet.dg[1], jet.dg[2]]);
        let tangency = norm(cross(gf, gg)) / (norm(gf) * norm(gg));
        if (jet.f / sigma).abs() <= tol.value && (jet.g / sigma).abs() <= tol.value && tangency <= tol.tangency {
            return Some(classify(real.dimension, p, &jet, Residuals { f: jet.f, g: jet.g, tangency, iterations }));
        }
        if iterations >= tol.max_iterations {
            return None;
        }
        iterations += 1;
        let step = unpack(linalg::solve(&m, &r.map(|v| -v))?);
        // a first step leaving the neighbourhood means no root nearby
        if iterations == 1 && (0..4).any(|c| step[c].abs() > 2.0 * cell[c]) {
            return None;
        }
        let m0 = merit(&r);
        let mut lambda = 1.0;
        loop {
            let trial: [f64; 4] = core::array::from_fn(|c| p[c] + lambda * step[c]);
            let tj = real.jet(trial);
            if let Some((tr, tm)) = system(&tj) {
                if merit(&tr) < m0 || lambda < 1e-3 {
                    p = trial;
                    jet = tj;
                    r = tr;
                    m = tm;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return None;
            }
        }
        // roots farther out belong to other seeds
        if (0..4).any(|c| (p[c] - seed[c]).abs() > 3.0 * cell[c]) {
            return None;
        }
    }
}

/// Normal-form classification at a converged root.
fn classify(d: Dimension, p: [f64; 4], j: &Jet, residuals: Residuals) -> EventRecord {
    let gf = [j.df[0], j.df[1], j.df[2]];
    let nf = norm(gf);
    let n = gf.map(|c| c / nf);
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let (fn_, gn) = (nf, dot([j.dg[0], j.dg[1], j.dg[2]], n));
    let velocity = fn_ * j.dg[3] - gn * j.df[3];
    let m = |a: [f64; 3], b: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                s += a[r] * (fn_ * j.d2g[r][c] - gn * j.d2f[r][c]) * b[c];
            }
        }
        s
    };
    let (normal_form, kind) = match d {
        Dimension::Two => {
            let tau = [-n[1], n[0], 0.0];
            let mtt = m(tau, tau);
            let kind = if velocity * mtt < 0.0 { EventKind::PairCreation } else { EventKind::PairAnnihilation };
            (NormalForm { velocity, curvature_det: mtt, curvature_trace: mtt }, kind)
        }
        Dimension::Three => {
            // any orthonormal pair spanning the tangent plane
            let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let e1 = {
                let c = cross(n, helper);
                let l = norm(c);
                c.map(|v| v / l)
            };
            let e2 = cross(n, e1);
            let (a, b, c) = (m(e1, e1), m(e1, e2), m(e2, e2));
            let (det, tr) = (a * c - b * b, a + c);
            let kind = if det < 0.0 {
                EventKind::Reconnection
            } else if velocity * tr < 0.0 {
                EventKind::Birth
            } else {
                EventKind::Death
            };
            (NormalForm { velocity, curvature_det: det, curvature_trace: tr }, kind)
        }
    };
    let location = match d {
        Dimension::Two => alloc::vec![p[0], p[1]],
        Dimension::Three => alloc::vec![p[0], p[1], p[2]],
    };
    EventRecord { location, time: p[3], kind, residuals, normal_form }
}

/// Signed vortex counts `(positive, negative)` at time `t` in the planar
/// rectangle `[lo, hi)`, from the phase winding around each grid plaquette.
pub fn count_vortices_2d(real: &FieldRealization, lo: [f64; 2], hi: [f64; 2], t: f64, spacing: f64) -> (usize, usize) {
    let ax = Axis::new(lo[0], hi[0], spacing);
    let ay = Axis::new(lo[1], hi[1], spacing);
    let zaxis = Axis { lo: 0.0, h: 0.0, n: 0 };
    let s = slice(real, &[ax, ay, zaxis], t);
    let ny = ay.n + 1;
    let phase = |i: usize, j: usize| {
        let v = &s[i * ny + j];
        v[1].atan2(v[0])
    };
    let wrap = |d: f64| {
        let mut d = d % (2.0 * PI);
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        d
    };
    let (mut pos, mut neg) = (0, 0);
    for i in 0..ax.n {
        for j in 0..ay.n {
            let ring = [phase(i, j), phase(i + 1, j), phase(i + 1, j + 1), phase(i, j + 1)];
            let w: f64 = (0..4).map(|q| wrap(ring[(q + 1) % 4] - ring[q])).sum();
            let n = (w / (2.0 * PI)).round() as i64;
            if n > 0 {
                pos += n as usize;
            } else if n < 0 {
                neg += (-n) as usize;
            }
        }
    }
    (pos, neg)
}

/// Vortex counts in a square of half-width `radius` about a planar event,
/// a time `dt` before and after it.
pub fn winding_around(real: &FieldRealization, ev: &EventRecord, radius: f64, dt: f64, spacing: f64) -> (usize, usize) {
    let (x, y) = (ev.location[0], ev.location[1]);
    let (lo, hi) = ([x - radius, y - radius], [x + radius, y + radius]);
    let count = |t: f64| {
        let (p, n) = count_vortices_2d(real, lo, hi, t, spacing);
        p + n
    };
    (count(ev.time - dt), count(ev.time + dt))
}

/// Event counts over a set of realizations and the rates they imply.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventCounts {
    pub birth: u64,
    pub death: u64,
    pub reconnection: u64,
    pub pair_creation: u64,
    pub pair_annihilation: u64,
}

impl EventCounts {
    pub fn add(&mut self, kind: EventKind) {
        match kind {
            EventKind::Birth => self.birth += 1,
            EventKind::Death => self.death += 1,
            EventKind::Reconnection => self.reconnection += 1,
            EventKind::PairCreation => self.pair_creation += 1,
            EventKind::PairAnnihilation => self.pair_annihilation += 1,
        }
    }

    pub fn merge(&mut self, o: &EventCounts) {
        self.birth += o.birth;
        self.death += o.death;
        self.reconnection += o.reconnection;
        self.pair_creation += o.pair_creation;
        self.pair_annihilation += o.pair_annihilation;
    }

    pub fn total(&self) -> u64 {
        self.birth + self.death + self.reconnection + self.pair_creation + self.pair_annihilation
    }
}

/// A count turned into a rate, with its Poisson standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountRate {
    pub count: u64,
    pub rate: f64,
    pub stderr: f64,
}

impl CountRate {
    pub fn new(count: u64, measure: f64) -> Self {
        CountRate { count, rate: count as f64 / measure, stderr: (count as f64).sqrt() / measure }
    }
}

/// Settings of an event-counting run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub n_waves: usize,
    pub realizations: u64,
    pub seed: u64,
    pub bx: SpacetimeBox,
    /// Defaults to [`Grid::for_moments`].
    pub grid: Option<Grid>,
    pub tol: RootTolerance,
    /// Planar vortex census; none if absent.
    pub census: Option<Census>,
}

/// Vortex count on a plaquette grid at `slices` evenly spaced times, the
/// first at the start of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Census {
    pub spacing: f64,
    pub slices: u32,
}

/// Per-realization output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RealizationResult {
    pub index: u64,
    pub seed: u64,
    pub events: Vec<EventRecord>,
    pub counts: EventCounts,
    /// Planar vortex count summed over the census slices.
    pub vortices: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationSummary {
    pub dimension: Dimension,
    pub realizations: u64,
    /// Total spacetime measure searched.
    pub measure: f64,
    pub counts: EventCounts,
    pub birth: CountRate,
    pub death: CountRate,
    pub reconnection: CountRate,
    pub pair_events: CountRate,
    /// Planar vortices per unit area, with Poisson error.
    pub vortex_density: Option<CountRate>,
}

/// Seed of realization `index`: the first word of ChaCha8 stream `index`
/// keyed by `seed`.
pub fn realization_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.random()
}

/// Synthesizes realization `index` and finds its events.
pub fn run_realization(spectrum: &Spectrum, cfg: &SimConfig, index: u64) -> Result<RealizationResult> {
    let seed = realization_seed(cfg.seed, index);
    let real = synthesize(spectrum, cfg.n_waves, seed)?;
    let grid = match cfg.grid {
        Some(g) => g,
        None => Grid::for_moments(&spectrum.moments()?),
    };
    let search = real.demodulated(real.mean_frequency());
    let events = find_events(&search, &cfg.bx, &grid, &cfg.tol)?;
    let mut counts = EventCounts::default();
    events.iter().for_each(|e| counts.add(e.kind));
    let vortices = match (spectrum.dimension, cfg.census) {
        (Dimension::Two, Some(c)) => {
            let (lo, hi) = ([cfg.bx.lo[0], cfg.bx.lo[1]], [cfg.bx.hi[0], cfg.bx.hi[1]]);
            let step = (cfg.bx.hi[3] - cfg.bx.lo[3]) / f64::from(c.slices.max(1));
            let n = (0..c.slices)
                .map(|j| {
                    let (p, n) = count_vortices_2d(&real, lo, hi, cfg.bx.lo[3] + f64::from(j) * step, c.spacing);
                    (p + n) as u64
                })
                .sum();
            Some(n)
        }
        _ => None,
    };
    Ok(RealizationResult { index, seed, events, counts, vortices })
}

/// Rates from per-realization results, in realization order.
pub fn summarize(dimension: Dimension, cfg: &SimConfig, results: &[RealizationResult]) -> SimulationSummary {
    let mut counts = EventCounts::default();
    results.iter().for_each(|r| counts.merge(&r.counts));
    let measure = cfg.bx.measure(dimension) * results.len() as f64;
    let area = (cfg.bx.hi[0] - cfg.bx.lo[0]) * (cfg.bx.hi[1] - cfg.bx.lo[1]);
    let vortex_density = match dimension {
        Dimension::Two if results.iter().all(|r| r.vortices.is_some()) && !results.is_empty() => {
            let n: u64 = results.iter().filter_map(|r| r.vortices).sum();
            let slices = cfg.census.map_or(1, |c| c.slices);
            Some(CountRate::new(n, area * results.len() as f64 * f64::from(slices)))
        }
        _ => None,
    };
    SimulationSummary {
        dimension,
        realizations: results.len() as u64,
        measure,
        counts,
        birth: CountRate::new(counts.birth, measure),
        death: CountRate::new(counts.death, measure),
        reconnection: CountRate::new(counts.reconnection, measure),
        pair_events: CountRate::new(counts.pair_creation + counts.pair_annihilation, measure),
        vortex_density,
    }
}

/// Runs every realization in order.
pub fn simulate(spectrum: &Spectrum, cfg: &SimConfig) -> Result<(Vec<RealizationResult>, SimulationSummary)> {
    let results = (0..cfg.realizations).map(|i| run_realization(spectrum, cfg, i)).collect::<Result<Vec<_>>>()?;
    let summary = summarize(spectrum.dimension, cfg, &results);
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SpectrumKind;

    fn special() -> Spectrum {
        Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
    }

    #[test]
    fn jet_matches_finite_differences() {
        let real = synthesize(&Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 }), 60, 4).unwrap();
        let p = [0.3, -0.2, 0.7, 0.4];
        let j = real.jet(p);
        let h = 1e-5;
        for m in 0..4 {
            let (mut a, mut b) = (p, p);
            a[m] += h;
            b[m] -= h;
            let (ja, jb) = (real.jet(a), real.jet(b));
            assert!(((ja.f - jb.f) / (2.0 * h) - j.df[m]).abs() < 1e-6 * (1.0 + j.df[m].abs()));
            for n in 0..4 {
                assert!(((ja.dg[n] - jb.dg[n]) / (2.0 * h) - j.d2g[m][n]).abs() < 1e-5 * (1.0 + j.d2g[m][n].abs()));
            }
        }
        let v = real.value(p);
        assert!((v.re - j.f).abs() < 1e-12 && (v.im - j.g).abs() < 1e-12);
    }

    #[test]
    fn slice_matches_pointwise_evaluation() {
        let real = synthesize(&special(), 30, 9).unwrap();
        let axes = [Axis::new(0.0, 2.0, 0.5), Axis::new(-1.0, 1.0, 0.5), Axis { lo: 0.0, h: 0.0, n: 0 }];
        let s = slice(&real, &axes, 0.7);
        let j = real.jet([axes[0].node(3), axes[1].node(1), 0.0, 0.7]);
        let node = s[3 * (axes[1].n + 1) + 1];
        assert!((node[0] - j.f).abs() < 1e-12 && (node[6] - j.dg[1]).abs() < 1e-12);
    }

    #[test]
    fn amplitudes_match_field_variance() {
        let s = Spectrum::new(Dimension::Three, SpectrumKind::Monochromatic { k: 1.0, omega: 1.0 }).with_field_variance(2.5);
        let real = synthesize(&s, 100, 1).unwrap();
        let m = real.empirical_moments();
        assert!((m.f2 - 2.5).abs() < 1e-12);
        assert!((m.k2 - 1.0).abs() < 1e-12);
        assert!(synthesize(&s, 1, 1).is_err());
    }

    #[test]
    fn single_frequency_intensity_is_static() {
        let s = Spectrum::new(Dimension::Two, SpectrumKind::Monochromatic { k: 1.0, omega: 2.0 });
        let real = synthesize(&s, 80, 3).unwrap();
        let p = [1.0, 2.0, 0.0, 0.0];
        let q = [1.0, 2.0, 0.0, 5.3];
        assert!((real.value(p).norm_sqr() - real.value(q).norm_sqr()).abs() < 1e-10);
        let bx = SpacetimeBox::cube(Dimension::Two, 10.0, 10.0);
        let g = Grid::for_moments(&s.moments().unwrap());
        let ev = find_events(&real.demodulated(real.mean_frequency()), &bx, &g, &RootTolerance::default()).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn planar_events_satisfy_tolerances_and_winding() {
        let s = special();
        let real = synthesize(&s, 200, 21).unwrap();
        let bx = SpacetimeBox::cube(Dimension::Two, 20.0, 20.0);
        let g = Grid::for_moments(&s.moments().unwrap());
        let tol = RootTolerance::default();
        let events = find_events(&real, &bx, &g, &tol).unwrap();
        assert!(!events.is_empty());
        for e in events.iter().take(40) {
            assert!(e.residuals.tangency <= tol.tangency);
            // separation √(2|v|dt/|M|) = 0.1, well inside the window
            let nf = e.normal_form;
            let dt = 0.005 * nf.curvature_det.abs() / nf.velocity.abs();
            let crowded = events.iter().any(|o| {
                !core::ptr::eq(o, e)
                    && (o.time - e.time).abs() <= dt
                    && (0..2).all(|c| (o.location[c] - e.location[c]).abs() <= 0.3)
            });
            if crowded {
                continue;
            }
            let (before, after) = winding_around(&real, e, 0.3, dt, 0.005);
            // bystander vortices may share the window
            let expect = if e.kind == EventKind::PairCreation { 2 } else { -2 };
            assert_eq!(after as i64 - before as i64, expect, "{e:?}");
        }
        // same events after a global phase rotation
        let rotated = find_events(&real.rotated_phase(1.1), &bx, &g, &tol).unwrap();
        assert_eq!(rotated.len(), events.len());
        for (a, b) in events.iter().zip(&rotated) {
            assert!((a.time - b.time).abs() < 1e-8 && a.kind == b.kind);
        }
    }

    #[test]
    fn spatial_events_converge() {
        let s = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 });
        let real = synthesize(&s, 200, 8).unwrap();
        let bx = SpacetimeBox::cube(Dimension::Three, 1.5, 1.5);
        let g = Grid::for_moments(&s.moments().unwrap());
        let tol = RootTolerance::default();
        let events = find_events(&real.demodulated(real.mean_frequency()), &bx, &g, &tol).unwrap();
        assert!(!events.is_empty());
        for e in &events {
            let j = real.jet(e.point());
            assert!(j.f.abs() < 1e-7 && j.g.abs() < 1e-7, "{e:?}");
            assert!(e.residuals.tangency <= tol.tangency);
            assert_eq!(e.kind == EventKind::Reconnection, e.normal_form.curvature_det < 0.0);
        }
    }

    #[test]
    fn vortex_census_counts_charges() {
        let real = synthesize(&special(), 100, 5).unwrap();
        let (p, n) = count_vortices_2d(&real, [0.0, 0.0], [30.0, 30.0], 0.0, 0.2);
        assert!(p + n > 0);
        // charges nearly balance in a large box
        assert!((p as i64 - n as i64).abs() < ((p + n) as f64).sqrt() as i64 * 3 + 3);
    }
}

