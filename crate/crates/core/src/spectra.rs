//! Isotropic power spectra and their normalized low-order moments.
//!
//! Moments are intensity-weighted averages over plane waves, with intensity
//! taken as squared amplitude. The field variance `f2` is carried alongside
//! and never enters the normalized moments.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::special::{gamma_int, zeta};

/// Relative tolerance applied to every moment inequality.
pub const MOMENT_TOL: f64 = 1e-12;

/// Number of spatial dimensions of the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u8", into = "u8"))]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub const fn get(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = Error;
    fn try_from(d: u8) -> Result<Self> {
        match d {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            _ => Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {d}"))),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.get() as u8
    }
}

impl core::fmt::Display for Dimension {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.get())
    }
}

/// One shell of a discrete spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ring {
    pub weight: f64,
    pub k: f64,
    pub omega: f64,
}

/// Density `phi[i][j] = Φ(omega_grid[i], k_grid[j])` on a rectangular grid.
///
/// `Φ` already contains every density factor: moments are
/// `∫ q Φ dω dk / ∫ Φ dω dk` with the trapezoid rule on the grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tabulated {
    pub omega_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumKind {
    /// Every wave has wavenumber `k` and frequency `omega`.
    Monochromatic { k: f64, omega: f64 },
    /// Wavenumber `k`, frequency `±omega` with equal weight.
    MonochromaticModulus { k: f64, omega: f64 },
    /// Thermal spectrum at frequency scale `w` with linear dispersion `ω = c k`.
    ///
    /// In `d` dimensions the density is `∝ ω k^(d-1) / (exp(ω/w) - 1)`.
    Blackbody { w: f64, c: f64 },
    /// Two-dimensional field whose `(k_x, k_y, ω/c)` is uniform on a sphere of radius `k`.
    SpecialDispersion { k: f64, c: f64 },
    RingMixture(Vec<Ring>),
    Tabulated(Tabulated),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub dimension: Dimension,
    pub kind: SpectrumKind,
    /// Single-point variance `⟨f²⟩`.
    pub field_variance: f64,
}

/// Normalized moments of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralMoments {
    pub dimension: Dimension,
    /// Mean squared wavenumber.
    pub k2: f64,
    /// Mean fourth power of the wavenumber.
    pub k4: f64,
    /// Mean frequency.
    pub w1: f64,
    /// Mean squared frequency.
    pub w2: f64,
    /// Mean of `ω k²`.
    pub wk2: f64,
    /// Field variance `⟨f²⟩`.
    pub f2: f64,
}

/// A violated moment constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Violation {
    NonFinite,
    NonPositiveFieldVariance { f2: f64 },
    NonPositiveWavenumber { k2: f64 },
    NegativeFrequencyVariance { w1: f64, w2: f64 },
    /// `k̄ₓ⁴` below the shell bound (9/5 or 3/2 times `(k̄ₓ²)²`).
    KurtosisBelowBound { kx4: f64, bound: f64 },
}

impl SpectralMoments {
    pub fn new(dimension: Dimension, k2: f64, k4: f64, w1: f64, w2: f64, wk2: f64) -> Self {
        SpectralMoments { dimension, k2, k4, w1, w2, wk2, f2: 1.0 }
    }

    /// Builds moments from the per-component values `k̄ₓ²`, `k̄ₓ⁴`.
    pub fn from_components(
        dimension: Dimension,
        kx2: f64,
        kx4: f64,
        w1: f64,
        w2: f64,
        wk2: f64,
    ) -> Self {
        let (c2, c4) = component_factors(dimension);
        Self::new(dimension, kx2 / c2, kx4 / c4, w1, w2, wk2)
    }

    pub fn with_field_variance(mut self, f2: f64) -> Self {
        self.f2 = f2;
        self
    }

    /// `(k̄ₓ², k̄ₓ⁴)`.
    pub fn component_moments(&self) -> (f64, f64) {
        let (c2, c4) = component_factors(self.dimension);
        (c2 * self.k2, c4 * self.k4)
    }

    /// `ω̄² - ω̄²`, snapped to zero when within the moment tolerance.
    pub fn frequency_variance(&self) -> f64 {
        let v = self.w2 - self.w1 * self.w1;
        if v <= MOMENT_TOL * self.w2.abs() {
            0.0
        } else {
            v
        }
    }

    /// Moments of the spectrum after `k → λk`, `ω → μω`.
    pub fn rescaled(&self, lambda: f64, mu: f64) -> Self {
        SpectralMoments {
            k2: lambda * lambda * self.k2,
            k4: lambda.powi(4) * self.k4,
            w1: mu * self.w1,
            w2: mu * mu * self.w2,
            wk2: mu * lambda * lambda * self.wk2,
            ..*self
        }
    }

    /// Checks every moment inequality; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let vals = [self.k2, self.k4, self.w1, self.w2, self.wk2, self.f2];
        if vals.iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFinite);
            return out;
        }
        if self.f2 <= 0.0 {
            out.push(Violation::NonPositiveFieldVariance { f2: self.f2 });
        }
        if self.k2 <= 0.0 {
            out.push(Violation::NonPositiveWavenumber { k2: self.k2 });
        }
        if self.w2 - self.w1 * self.w1 < -MOMENT_TOL * self.w2.abs() {
            out.push(Violation::NegativeFrequencyVariance { w1: self.w1, w2: self.w2 });
        }
        let (kx2, kx4) = self.component_moments();
        let bound = kurtosis_bound(self.dimension) * kx2 * kx2;
        if kx4 < bound * (1.0 - MOMENT_TOL) {
            out.push(Violation::KurtosisBelowBound { kx4, bound });
        }
        out
    }

    /// `Ok(self)` when valid, otherwise every violation.
    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidMoments(v))
        }
    }

    pub(crate) fn expect_dimension(&self, d: Dimension) -> Result<()> {
        if self.dimension == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: d.get(), found: self.dimension.get() })
        }
    }
}

/// `(k̄ₓ²/k̄², k̄ₓ⁴/k̄⁴)` for an isotropic field.
pub const fn component_factors(d: Dimension) -> (f64, f64) {
    match d {
        Dimension::Two => (0.5, 0.375),
        Dimension::Three => (1.0 / 3.0, 0.2),
    }
}

/// Minimum of `k̄ₓ⁴/(k̄ₓ²)²`, attained by a single shell.
pub const fn kurtosis_bound(d: Dimension) -> f64 {
    match d {
        Dimension::Two => 1.5,
        Dimension::Three => 1.8,
    }
}

/// Moments of `spectrum`; see [`Spectrum::moments`].
pub fn moments(spectrum: &Spectrum) -> Result<SpectralMoments> {
    spectrum.moments()
}

impl Spectrum {
    pub fn new(dimension: Dimension, kind: SpectrumKind) -> Self {
        Spectrum { dimension, kind, field_variance: 1.0 }
    }

    pub fn with_field_variance(mut self, f2: f64) -> Self {
        self.field_variance = f2;
        self
    }

    /// Checks the structural invariants of the spectrum description.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpectrum(m.into()));
        if !(self.field_variance > 0.0 && self.field_variance.is_finite()) {
            return bad("field variance must be positive");
        }
        let finite_k = |k: f64| k.is_finite() && k >= 0.0;
        match &self.kind {
            SpectrumKind::Monochromatic { k, omega } | SpectrumKind::MonochromaticModulus { k, omega } => {
                if !finite_k(*k) || !omega.is_finite() {
                    return bad("k must be finite and nonnegative, omega finite");
                }
            }
            SpectrumKind::Blackbody { w, c } => {
                if !(*w > 0.0 && *c > 0.0 && w.is_finite() && c.is_finite()) {
                    return bad("blackbody needs positive W and c");
                }
            }
            SpectrumKind::SpecialDispersion { k, c } => {
                if self.dimension != Dimension::Two {
                    return bad("special-dispersion is a two-dimensional preset");
                }
                if !(finite_k(*k) && c.is_finite()) {
                    return bad("k must be finite and nonnegative, c finite");
                }
            }
            SpectrumKind::RingMixture(rings) => {
                for r in rings {
                    if !(r.weight >= 0.0 && r.weight.is_finite()) {
                        return bad("ring weights must be finite and nonnegative");
                    }
                    if !finite_k(r.k) || !r.omega.is_finite() {
                        return bad("ring k must be finite and nonnegative, omega finite");
                    }
                }
                if !rings.iter().any(|r| r.weight > 0.0) {
                    return Err(Error::EmptySpectrum);
                }
            }
            SpectrumKind::Tabulated(t) => t.check()?,
        }
        Ok(())
    }

    /// Intensity-weighted, normalized moments.
    pub fn moments(&self) -> Result<SpectralMoments> {
        self.check()?;
        let d = self.dimension;
        let m = match &self.kind {
            SpectrumKind::Monochromatic { k, omega } => {
                let k2 = k * k;
                SpectralMoments::new(d, k2, k2 * k2, *omega, omega * omega, omega * k2)
            }
            SpectrumKind::MonochromaticModulus { k, omega } => {
                let k2 = k * k;
                SpectralMoments::new(d, k2, k2 * k2, 0.0, omega * omega, 0.0)
            }
            SpectrumKind::Blackbody { w, c } => {
                // E[x^m] for density x^d/(e^x - 1), x = ω/W
                let n = d.get() as u32;
                let base = gamma_int(n + 1) * zeta(f64::from(n + 1));
                let ex = |m: u32| gamma_int(n + m + 1) * zeta(f64::from(n + m + 1)) / base;
                let s = w / c;
                SpectralMoments::new(
                    d,
                    s * s * ex(2),
                    s.powi(4) * ex(4),
                    w * ex(1),
                    w * w * ex(2),
                    w * s * s * ex(3),
                )
            }
            SpectrumKind::SpecialDispersion { k, c } => {
                // sin²θ and sin⁴θ averaged over the sphere: 2/3 and 8/15
                let k2 = k * k;
                SpectralMoments::new(d, 2.0 * k2 / 3.0, 8.0 * k2 * k2 / 15.0, 0.0, c * c * k2 / 3.0, 0.0)
            }
            SpectrumKind::RingMixture(rings) => {
                weighted_moments(d, rings.iter().map(|r| (r.weight, r.k, r.omega)))?
            }
            SpectrumKind::Tabulated(t) => weighted_moments(d, t.nodes())?,
        };
        Ok(m.with_field_variance(self.field_variance))
    }

    /// Sampler drawing `(k, ω)` pairs proportionally to intensity.
    pub fn sampler(&self) -> Result<WaveSampler> {
        self.check()?;
        let d = self.dimension;
        let kind = match &self.kind {
            SpectrumKind::Monochromatic { k, omega } => SamplerKind::Fixed(*k, *omega),
            SpectrumKind::MonochromaticModulus { k, omega } => SamplerKind::SignFlip(*k, *omega),
            SpectrumKind::Blackbody { w, c } => SamplerKind::Thermal { cdf: thermal_cdf(d.get() as i32 + 1), w: *w, c: *c },
            SpectrumKind::SpecialDispersion { k, c } => SamplerKind::Sphere(*k, *c),
            SpectrumKind::RingMixture(rings) => {
                let (cdf, values) = cumulative(rings.iter().map(|r| (r.weight, (r.k, r.omega))));
                if !(cdf.last().copied().unwrap_or(0.0) > 0.0) {
                    return Err(Error::EmptySpectrum);
                }
                SamplerKind::Discrete { cdf, values }
            }
            SpectrumKind::Tabulated(t) => {
                let (cdf, values) = cumulative(t.nodes().map(|(w, k, om)| (w, (k, om))));
                let total = cdf.last().copied().unwrap_or(0.0);
                if !(total > 0.0) || !total.is_finite() {
                    return Err(Error::NotNormalizable(total));
                }
                SamplerKind::Discrete { cdf, values }
            }
        };
        Ok(WaveSampler { kind })
    }
}

fn weighted_moments(
    d: Dimension,
    nodes: impl Iterator<Item = (f64, f64, f64)>,
) -> Result<SpectralMoments> {
    let mut acc = [0.0f64; 6];
    for (w, k, om) in nodes {
        let k2 = k * k;
        acc[0] += w;
        acc[1] += w * k2;
        acc[2] += w * k2 * k2;
        acc[3] += w * om;
        acc[4] += w * om * om;
        acc[5] += w * om * k2;
    }
    let total = acc[0];
    if !(total > 0.0) || !total.is_finite() {
        return Err(if total == 0.0 { Error::EmptySpectrum } else { Error::NotNormalizable(total) });
    }
    Ok(SpectralMoments::new(
        d,
        acc[1] / total,
        acc[2] / total,
        acc[3] / total,
        acc[4] / total,
        acc[5] / total,
    ))
}

impl Tabulated {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpectrum(m.into()));
        let increasing = |g: &[f64]| g.windows(2).all(|p| p[1] > p[0]) && g.iter().all(|v| v.is_finite());
        if self.omega_grid.len() < 2 || self.k_grid.len() < 2 {
            return bad("tabulated grids need at least two nodes per axis");
        }
        if !increasing(&self.omega_grid) || !increasing(&self.k_grid) {
            return bad("tabulated grids must be strictly increasing");
        }
        if self.k_grid[0] < 0.0 {
            return bad("tabulated k grid must be nonnegative");
        }
        if self.phi.len() != self.omega_grid.len()
            || self.phi.iter().any(|row| row.len() != self.k_grid.len())
        {
            return bad("phi must have shape [omega_grid.len()][k_grid.len()]");
        }
        if self.phi.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("phi must be finite and nonnegative");
        }
        Ok(())
    }

    /// `(trapezoid weight × Φ, k, ω)` for every grid node.
    fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let wo = trapezoid_weights(&self.omega_grid);
        let wk = trapezoid_weights(&self.k_grid);
        self.omega_grid.iter().enumerate().flat_map(move |(i, &om)| {
            let wo_i = wo[i];
            self.k_grid
                .iter()
                .zip(wk.clone())
                .enumerate()
                .map(move |(j, (&k, wk_j))| (wo_i * wk_j * self.phi[i][j], k, om))
        })
    }
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Draws `(k, ω)` pairs from a spectrum.
#[derive(Debug, Clone)]
pub struct WaveSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Fixed(f64, f64),
    SignFlip(f64, f64),
    /// `ω/W` tabulated on a uniform grid of `[0, THERMAL_CUTOFF]`.
    Thermal { cdf: Vec<f64>, w: f64, c: f64 },
    Sphere(f64, f64),
    /// Running sums of the node weights.
    Discrete { cdf: Vec<f64>, values: Vec<(f64, f64)> },
}

/// Upper end of the tabulated `ω/W`; the tail beyond holds `~e^{-64}`.
const THERMAL_CUTOFF: f64 = 64.0;
const THERMAL_CELLS: usize = 16384;

/// Running Simpson integral of the thermal density `y^{n−1}/(e^y − 1)`
/// over `THERMAL_CELLS` equal cells of `[0, THERMAL_CUTOFF]`.
fn thermal_cdf(n: i32) -> Vec<f64> {
    let p = |y: f64| if y == 0.0 { 0.0 } else { y.powi(n - 1) / y.exp_m1() };
    let h = THERMAL_CUTOFF / THERMAL_CELLS as f64;
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(THERMAL_CELLS + 1);
    cdf.push(0.0);
    for i in 0..THERMAL_CELLS {
        let y = i as f64 * h;
        acc += h / 6.0 * (p(y) + 4.0 * p(y + 0.5 * h) + p(y + h));
        cdf.push(acc);
    }
    cdf
}

fn cumulative(nodes: impl Iterator<Item = (f64, (f64, f64))>) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut acc = 0.0;
    nodes
        .map(|(w, v)| {
            acc += w;
            (acc, v)
        })
        .unzip()
}

impl WaveSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        self.sample_at(rng.random())
    }

    /// The pair at quantile `u ∈ [0, 1)` of the spectrum's leading
    /// variable: wavenumber, or the frequency sign for the monochromatic
    /// modulus. Equally spaced `u` give a stratified draw, whose sample
    /// moments scatter far less than those of independent draws.
    pub fn sample_at(&self, u: f64) -> (f64, f64) {
        match &self.kind {
            SamplerKind::Fixed(k, om) => (*k, *om),
            SamplerKind::SignFlip(k, om) => {
                if u < 0.5 {
                    (*k, *om)
                } else {
                    (*k, -om)
                }
            }
            SamplerKind::Thermal { cdf, w, c } => {
                let t = u * cdf[cdf.len() - 1];
                let i = (cdf.partition_point(|&v| v <= t) - 1).min(cdf.len() - 2);
                let frac = (t - cdf[i]) / (cdf[i + 1] - cdf[i]);
                let om = w * (i as f64 + frac) * THERMAL_CUTOFF / THERMAL_CELLS as f64;
                (om / c, om)
            }
            SamplerKind::Sphere(k, c) => {
                let v = 2.0 * u - 1.0;
                (k * (1.0 - v * v).sqrt(), c * k * v)
            }
            SamplerKind::Discrete { cdf, values } => {
                let t = u * cdf[cdf.len() - 1];
                values[cdf.partition_point(|&v| v <= t).min(values.len() - 1)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn monochromatic_is_a_single_shell() {
        let m = Spectrum::new(Dimension::Three, SpectrumKind::Monochromatic { k: 1.0, omega: 1.0 })
            .moments()
            .unwrap();
        assert_eq!((m.k2, m.k4, m.w1, m.w2, m.wk2), (1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(m.component_moments(), (1.0 / 3.0, 0.2));
        assert!(m.validate().is_empty());
    }

    #[test]
    fn blackbody_component_moments() {
        let m = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 })
            .moments()
            .unwrap();
        let (kx2, kx4) = m.component_moments();
        let z4 = zeta(4.0);
        assert!(close(kx2, 20.0 / 3.0 * zeta(6.0) / z4, 1e-14));
        assert!(close(kx4, 168.0 * zeta(8.0) / z4, 1e-14));
        assert!(close(m.w1, 4.0 * zeta(5.0) / z4, 1e-14));
        assert!(close(m.w2, 20.0 * zeta(6.0) / z4, 1e-14));
        assert!(close(m.wk2, 120.0 * zeta(7.0) / z4, 1e-14));
    }

    #[test]
    fn symmetric_ring_pair_has_zero_mean_frequency() {
        let rings = vec![
            Ring { weight: 0.5, k: 1.0, omega: 1.0 },
            Ring { weight: 0.5, k: 1.0, omega: -1.0 },
        ];
        let m = Spectrum::new(Dimension::Three, SpectrumKind::RingMixture(rings)).moments().unwrap();
        assert_eq!((m.w1, m.w2, m.k2, m.wk2), (0.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn component_moment_definitions() {
        let m = SpectralMoments::new(Dimension::Three, 3.0, 5.0, 0.0, 1.0, 0.0);
        assert_eq!(m.component_moments(), (1.0, 1.0));
        let m = SpectralMoments::new(Dimension::Two, 2.0, 8.0 / 3.0, 0.0, 1.0, 0.0);
        assert_eq!(m.component_moments(), (1.0, 1.0));
    }

    #[test]
    fn validation_margins() {
        let ok = SpectralMoments::from_components(Dimension::Three, 1.0 / 3.0, 0.21, 0.0, 1.0, 0.0);
        assert!(ok.validate().is_empty());
        let low = SpectralMoments::from_components(Dimension::Three, 1.0 / 3.0, 0.19, 0.0, 1.0, 0.0);
        assert!(matches!(low.validate()[..], [Violation::KurtosisBelowBound { .. }]));
        let neg = SpectralMoments::new(Dimension::Two, 1.0, 1.0, 2.0, 1.0, 0.0);
        assert!(matches!(neg.validate()[..], [Violation::NegativeFrequencyVariance { .. }]));
    }

    #[test]
    fn modulus_preset_is_time_symmetric() {
        let m = Spectrum::new(Dimension::Three, SpectrumKind::MonochromaticModulus { k: 2.0, omega: 3.0 })
            .moments()
            .unwrap();
        assert_eq!((m.w1, m.wk2), (0.0, 0.0));
        assert_eq!(m.frequency_variance(), 9.0);
    }

    #[test]
    fn special_dispersion_moments() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
            .moments()
            .unwrap();
        let (kx2, kx4) = m.component_moments();
        assert!(close(kx2, 1.0 / 3.0, 1e-15));
        assert!(close(kx4, 0.2, 1e-15));
        assert!(close(m.w2, 1.0 / 3.0, 1e-15));
        assert!(Spectrum::new(Dimension::Three, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
            .moments()
            .is_err());
    }

    #[test]
    fn tabulated_matches_ring_mixture_on_same_nodes() {
        let t = Tabulated {
            omega_grid: vec![-1.0, 0.5, 2.0],
            k_grid: vec![0.5, 1.0],
            phi: vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![3.0, 0.5]],
        };
        let m = Spectrum::new(Dimension::Three, SpectrumKind::Tabulated(t.clone())).moments().unwrap();
        let rings: Vec<Ring> = t.nodes().map(|(weight, k, omega)| Ring { weight, k, omega }).collect();
        let r = Spectrum::new(Dimension::Three, SpectrumKind::RingMixture(rings)).moments().unwrap();
        assert_eq!(m, r);
    }

    #[test]
    fn bad_spectra_are_rejected() {
        let empty = Spectrum::new(
            Dimension::Two,
            SpectrumKind::RingMixture(vec![Ring { weight: 0.0, k: 1.0, omega: 1.0 }]),
        );
        assert_eq!(empty.moments(), Err(Error::EmptySpectrum));
        let t = Tabulated { omega_grid: vec![0.0, 1.0], k_grid: vec![1.0, 1.0], phi: vec![vec![1.0; 2]; 2] };
        assert!(Spectrum::new(Dimension::Two, SpectrumKind::Tabulated(t)).moments().is_err());
        let zero = Tabulated { omega_grid: vec![0.0, 1.0], k_grid: vec![1.0, 2.0], phi: vec![vec![0.0; 2]; 2] };
        assert!(Spectrum::new(Dimension::Two, SpectrumKind::Tabulated(zero)).moments().is_err());
    }

    #[test]
    fn thermal_sampler_reproduces_moments() {
        let s = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 2.0 });
        let m = s.moments().unwrap();
        let sampler = s.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let (mut k2, mut w1) = (0.0, 0.0);
        for _ in 0..n {
            let (k, om) = sampler.sample(&mut rng);
            k2 += k * k;
            w1 += om;
        }
        assert!(close(k2 / n as f64, m.k2, 2e-2));
        assert!(close(w1 / n as f64, m.w1, 1e-2));
    }

    #[test]
    fn sphere_sampler_reproduces_moments() {
        let s = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 2.0 });
        let m = s.moments().unwrap();
        let sampler = s.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let (mut k2, mut w2) = (0.0, 0.0);
        for _ in 0..n {
            let (k, om) = sampler.sample(&mut rng);
            k2 += k * k;
            w2 += om * om;
        }
        assert!(close(k2 / n as f64, m.k2, 1e-2));
        assert!(close(w2 / n as f64, m.w2, 1e-2));
    }
}
