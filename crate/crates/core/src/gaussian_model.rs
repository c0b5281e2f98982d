//! Single-point correlations of the field and its derivatives, and their
//! inverses.
//!
//! With `ψ = f + i g = Σ a exp(i(k n·r − ω t + φ))`, every derivative of a
//! plane wave is a power of `i` times a monomial in `(k_x, k_y, k_z, ω)`.
//! Averaging over phases, directions and the spectrum turns any pair
//! `⟨A B⟩` into `⟨f²⟩ × (±1 or 0) × angular factor × spectral moment`, which
//! is how [`correlation`] evaluates every entry, including the zero pattern.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;


#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::special::double_factorial_odd;
use crate::spectra::{Dimension, SpectralMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    /// Real part `f`.
    F,
    /// Imaginary part `g`.
    G,
}

/// A partial derivative of `f` or `g`, by counts of `x, y, z, t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Derivative {
    pub part: Part,
    pub x: u8,
    pub y: u8,
    pub z: u8,
    pub t: u8,
}

impl Derivative {
    pub const fn new(part: Part, x: u8, y: u8, z: u8, t: u8) -> Self {
        Derivative { part, x, y, z, t }
    }

    pub const fn spatial_order(&self) -> u8 {
        self.x + self.y + self.z
    }

    /// Exponent `e` with `i^e` the phase picked up by a plane wave.
    const fn phase(&self) -> u8 {
        // ∂_x → i k_x, ∂_t → −i ω = i³ ω
        (self.spatial_order() + 3 * self.t) % 4
    }
}

pub const F: Derivative = Derivative::new(Part::F, 0, 0, 0, 0);
pub const F_T: Derivative = Derivative::new(Part::F, 0, 0, 0, 1);
pub const F_X: Derivative = Derivative::new(Part::F, 1, 0, 0, 0);
pub const F_XX: Derivative = Derivative::new(Part::F, 2, 0, 0, 0);
pub const F_XY: Derivative = Derivative::new(Part::F, 1, 1, 0, 0);
pub const F_YY: Derivative = Derivative::new(Part::F, 0, 2, 0, 0);
pub const G: Derivative = Derivative::new(Part::G, 0, 0, 0, 0);
pub const G_T: Derivative = Derivative::new(Part::G, 0, 0, 0, 1);
pub const G_XX: Derivative = Derivative::new(Part::G, 2, 0, 0, 0);
pub const G_YY: Derivative = Derivative::new(Part::G, 0, 2, 0, 0);

/// Variable ordering of the two-dimensional correlation matrix.
pub const ORDER_2D: [Derivative; 6] = [F, F_T, F_XX, G, G_T, G_XX];
/// Variable ordering of the three-dimensional correlation matrix.
pub const ORDER_3D: [Derivative; 8] = [F, F_T, F_XX, F_YY, G, G_T, G_XX, G_YY];

impl fmt::Display for Derivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.part {
            Part::F => "f",
            Part::G => "g",
        })?;
        if self.spatial_order() + self.t > 0 {
            f.write_str("_")?;
        }
        for (c, n) in [('x', self.x), ('y', self.y), ('z', self.z), ('t', self.t)] {
            for _ in 0..n {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Derivative {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(alloc::format!("not a derivative label: {s:?}"));
        let mut chars = s.chars();
        let part = match chars.next() {
            Some('f') => Part::F,
            Some('g') => Part::G,
            _ => return Err(bad()),
        };
        let mut d = Derivative::new(part, 0, 0, 0, 0);
        match chars.next() {
            None => return Ok(d),
            Some('_') => {}
            Some(_) => return Err(bad()),
        }
        let mut any = false;
        for c in chars {
            let slot = match c {
                'x' => &mut d.x,
                'y' => &mut d.y,
                'z' => &mut d.z,
                't' => &mut d.t,
                _ => return Err(bad()),
            };
            *slot += 1;
            any = true;
        }
        if any {
            Ok(d)
        } else {
            Err(bad())
        }
    }
}

/// Average of `n_x^a n_y^b n_z^c` over isotropic unit vectors.
fn angular_average(d: Dimension, a: u8, b: u8, c: u8) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let num = double_factorial_odd(a.into()) * double_factorial_odd(b.into());
    match d {
        Dimension::Two if c > 0 => 0.0,
        // (a−1)!!(b−1)!!/(a+b)!!
        Dimension::Two => num / even_double_factorial(u32::from(a + b)),
        // (a−1)!!(b−1)!!(c−1)!!/(a+b+c+1)!!
        Dimension::Three => {
            num * double_factorial_odd(c.into()) / double_factorial_odd(u32::from(a + b + c) + 2)
        }
    }
}

/// `n!!` for even `n`.
fn even_double_factorial(n: u32) -> f64 {
    (1..=n / 2).map(|j| f64::from(2 * j)).product()
}

/// Spectral average of `k^kk ω^q`, when it is one of the tracked moments.
fn spectral_moment(m: &SpectralMoments, kk: u8, q: u8) -> Option<f64> {
    match (kk, q) {
        (0, 0) => Some(1.0),
        (2, 0) => Some(m.k2),
        (4, 0) => Some(m.k4),
        (0, 1) => Some(m.w1),
        (0, 2) => Some(m.w2),
        (2, 1) => Some(m.wk2),
        _ => None,
    }
}

/// `⟨a b⟩` for derivatives of `f`, `g`.
///
/// Returns `None` when the value needs a spectral moment beyond
/// `k̄², k̄⁴, ω̄, ω̄², ω̄k²`. Entries forced to vanish by parity are exactly 0.
pub fn correlation(m: &SpectralMoments, a: Derivative, b: Derivative) -> Option<f64> {
    // i^e with e = phase(b) − phase(a) comes from conj(c_a) c_b
    let e = (4 + b.phase() - a.phase()) % 4;
    let sign = match (a.part, b.part) {
        (Part::F, Part::F) | (Part::G, Part::G) => [1.0, 0.0, -1.0, 0.0][e as usize],
        // ⟨Re(c_a e^{iθ}) Im(c_b e^{iθ})⟩ = ½ Im(conj(c_a) c_b)
        (Part::F, Part::G) => [0.0, 1.0, 0.0, -1.0][e as usize],
        (Part::G, Part::F) => return correlation(m, b, a),
    };
    let ang = angular_average(m.dimension, a.x + b.x, a.y + b.y, a.z + b.z);
    if sign == 0.0 || ang == 0.0 {
        return Some(0.0);
    }
    let kk = a.spatial_order() + b.spatial_order();
    let q = a.t + b.t;
    Some(m.f2 * sign * ang * spectral_moment(m, kk, q)?)
}

/// The six independent single-point correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationEntries {
    pub dimension: Dimension,
    /// `⟨f²⟩`
    pub f2: f64,
    /// `⟨f_t²⟩`
    pub ft2: f64,
    /// `⟨f_xx²⟩`
    pub fxx2: f64,
    /// `⟨f g_t⟩`
    pub f_gt: f64,
    /// `⟨f f_xx⟩`
    pub f_fxx: f64,
    /// `⟨f_t g_xx⟩`
    pub ft_gxx: f64,
}

impl CorrelationEntries {
    /// `⟨f_x²⟩ = −⟨f f_xx⟩`.
    pub fn fx2(&self) -> f64 {
        -self.f_fxx
    }

    /// `⟨f_xy²⟩ = ⟨f_xx f_yy⟩ = ⟨f_xx²⟩/3`.
    pub fn fxy2(&self) -> f64 {
        self.fxx2 / 3.0
    }
}

/// The six independent correlations of `m`; every other entry follows
/// from [`correlation`].
pub fn correlation_entries(m: &SpectralMoments) -> CorrelationEntries {
    let c = |a, b| correlation(m, a, b).expect("tracked moment");
    CorrelationEntries {
        dimension: m.dimension,
        f2: c(F, F),
        ft2: c(F_T, F_T),
        fxx2: c(F_XX, F_XX),
        f_gt: c(F, G_T),
        f_fxx: c(F, F_XX),
        ft_gxx: c(F_T, G_XX),
    }
}

fn matrix<const N: usize>(m: &SpectralMoments, order: &[Derivative; N]) -> Mat<N> {
    let mut out = [[0.0; N]; N];
    for (i, &a) in order.iter().enumerate() {
        for (j, &b) in order.iter().enumerate() {
            out[i][j] = correlation(m, a, b).expect("tracked moment");
        }
    }
    out
}

fn invert<const N: usize>(corr: &Mat<N>) -> Result<(Mat<N>, f64)> {
    linalg::inverse_spd(corr).map_err(|(index, pivot)| Error::NotPositiveDefinite { index, pivot })
}

/// Named entries of the two-dimensional inverse `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Gamma2D {
    pub g00: f64,
    pub gtt: f64,
    pub gxxxx: f64,
    pub g0xx: f64,
    pub g0t: f64,
    pub gtxx: f64,
    /// `γ_x,x = γ_y,y`
    pub gx: f64,
    /// Square root of the determinant of the correlation matrix.
    pub sqrt_det_corr: f64,
}

/// Named entries of the three-dimensional inverse `Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Gamma3D {
    pub g00: f64,
    pub g0xx: f64,
    pub g0t: f64,
    pub gtt: f64,
    pub gtxx: f64,
    pub gxxxx: f64,
    pub gxxyy: f64,
    /// `Γ_x,x = Γ_y,y = Γ_z,z`
    pub gx: f64,
    /// `Γ_xy,xy`
    pub gxy: f64,
    /// Square root of the determinant of the correlation matrix.
    pub sqrt_det_corr: f64,
}

impl Gamma3D {
    /// Pole position `a = Γ_xx,xx − Γ_xx,yy`.
    pub fn a(&self) -> f64 {
        self.gxxxx - self.gxxyy
    }

    /// Branch point `b = −(Γ_xx,xx + Γ_xx,yy − 2Γ_t,xx²/Γ_t,t)`.
    pub fn b(&self) -> f64 {
        -(self.gxxxx + self.gxxyy - 2.0 * self.gtxx * self.gtxx / self.gtt)
    }

    /// `D = [Γ_t,t(Γ_xx,xx + Γ_xx,yy) − 2Γ_t,xx²](Γ_xx,xx − Γ_xx,yy)`.
    pub fn d(&self) -> f64 {
        (self.gtt * (self.gxxxx + self.gxxyy) - 2.0 * self.gtxx * self.gtxx) * self.a()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CorrelationModel2D {
    pub moments: SpectralMoments,
    pub entries: CorrelationEntries,
    /// Ordering [`ORDER_2D`].
    pub corr: Mat<6>,
    /// `None` when the frequency variance vanishes.
    pub gamma: Option<Mat<6>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CorrelationModel3D {
    pub moments: SpectralMoments,
    pub entries: CorrelationEntries,
    /// Ordering [`ORDER_3D`].
    pub corr: Mat<8>,
    /// `None` when the frequency variance vanishes.
    pub gamma: Option<Mat<8>>,
}

pub fn build_2d(m: &SpectralMoments) -> Result<CorrelationModel2D> {
    CorrelationModel2D::build(m)
}

pub fn build_3d(m: &SpectralMoments) -> Result<CorrelationModel3D> {
    CorrelationModel3D::build(m)
}

const DEGENERATE: Error = Error::Degenerate("zero frequency variance");

impl CorrelationModel2D {
    pub fn build(m: &SpectralMoments) -> Result<Self> {
        m.expect_dimension(Dimension::Two)?;
        let m = m.validated()?;
        let corr = matrix(&m, &ORDER_2D);
        let gamma = if m.frequency_variance() == 0.0 { None } else { Some(invert(&corr)?.0) };
        Ok(CorrelationModel2D { moments: m, entries: correlation_entries(&m), corr, gamma })
    }

    /// True when the vortices cannot move (zero frequency variance).
    pub fn is_degenerate(&self) -> bool {
        self.gamma.is_none()
    }

    /// `γ_x,x = 1/⟨f_x²⟩`.
    pub fn gamma_x(&self) -> f64 {
        1.0 / self.entries.fx2()
    }

    /// Named entries of the numeric inverse.
    pub fn inverse(&self) -> Result<Gamma2D> {
        let p = self.gamma.as_ref().ok_or(DEGENERATE)?;
        Ok(Gamma2D {
            g00: p[0][0],
            gtt: p[1][1],
            gxxxx: p[2][2],
            g0xx: p[0][2],
            g0t: p[0][4],
            gtxx: p[1][5],
            gx: self.gamma_x(),
            sqrt_det_corr: linalg::det(&self.corr).max(0.0).sqrt(),
        })
    }

    pub fn closed_form(&self) -> Result<Gamma2D> {
        closed_form_inverse_2d(&self.entries)
    }

    /// Closed-form inverse compared entry by entry with the numeric one.
    pub fn closed_form_report(&self) -> Result<Vec<ElementComparison>> {
        let c = self.closed_form()?;
        let n = self.inverse()?;
        Ok([
            ("gamma_0,0", c.g00, n.g00),
            ("gamma_t,t", c.gtt, n.gtt),
            ("gamma_xx,xx", c.gxxxx, n.gxxxx),
            ("gamma_0,xx", c.g0xx, n.g0xx),
            ("gamma_0,t", c.g0t, n.g0t),
            ("gamma_t,xx", c.gtxx, n.gtxx),
            ("gamma_x,x", c.gx, n.gx),
            ("sqrt det corr", c.sqrt_det_corr, n.sqrt_det_corr),
        ]
        .into_iter()
        .map(|(name, closed, numeric)| ElementComparison::new(name, closed, numeric))
        .collect())
    }
}

impl CorrelationModel3D {
    pub fn build(m: &SpectralMoments) -> Result<Self> {
        m.expect_dimension(Dimension::Three)?;
        let m = m.validated()?;
        let corr = matrix(&m, &ORDER_3D);
        let gamma = if m.frequency_variance() == 0.0 { None } else { Some(invert(&corr)?.0) };
        Ok(CorrelationModel3D { moments: m, entries: correlation_entries(&m), corr, gamma })
    }

    pub fn is_degenerate(&self) -> bool {
        self.gamma.is_none()
    }

    /// `Γ_x,x = 1/⟨f_x²⟩`.
    pub fn gamma_x(&self) -> f64 {
        1.0 / self.entries.fx2()
    }

    /// `Γ_xy,xy = 1/⟨f_xy²⟩`.
    pub fn gamma_xy(&self) -> f64 {
        1.0 / self.entries.fxy2()
    }

    pub fn inverse(&self) -> Result<Gamma3D> {
        let p = self.gamma.as_ref().ok_or(DEGENERATE)?;
        Ok(Gamma3D {
            g00: p[0][0],
            g0xx: p[0][2],
            g0t: p[0][5],
            gtt: p[1][1],
            gtxx: p[1][6],
            gxxxx: p[2][2],
            gxxyy: p[2][3],
            gx: self.gamma_x(),
            gxy: self.gamma_xy(),
            sqrt_det_corr: linalg::det(&self.corr).max(0.0).sqrt(),
        })
    }

    /// `√det Γ / D`, which the submatrix-determinant theorem fixes at `1/⟨f²⟩`.
    pub fn jacobi_ratio(&self) -> Result<f64> {
        let g = self.inverse()?;
        Ok(1.0 / (g.sqrt_det_corr * g.d()))
    }

    pub fn closed_form(&self) -> Result<Gamma3D> {
        closed_form_inverse_3d(&self.entries)
    }

    pub fn closed_form_report(&self) -> Result<Vec<ElementComparison>> {
        let c = self.closed_form()?;
        let n = self.inverse()?;
        Ok([
            ("Gamma_0,0", c.g00, n.g00),
            ("Gamma_0,xx", c.g0xx, n.g0xx),
            ("Gamma_0,t", c.g0t, n.g0t),
            ("Gamma_t,t", c.gtt, n.gtt),
            ("Gamma_t,xx", c.gtxx, n.gtxx),
            ("Gamma_xx,xx", c.gxxxx, n.gxxxx),
            ("Gamma_xx,yy", c.gxxyy, n.gxxyy),
            ("Gamma_x,x", c.gx, n.gx),
            ("Gamma_xy,xy", c.gxy, n.gxy),
            ("sqrt det corr", c.sqrt_det_corr, n.sqrt_det_corr),
        ]
        .into_iter()
        .map(|(name, closed, numeric)| ElementComparison::new(name, closed, numeric))
        .collect())
    }
}

/// Two-dimensional inverse from the six independent correlations, as
/// cofactors of the 3×3 block over `(f, g_t, f_xx)`.
pub fn closed_form_inverse_2d(e: &CorrelationEntries) -> Result<Gamma2D> {
    let CorrelationEntries { f2, ft2, fxx2, f_gt, f_fxx, ft_gxx, .. } = *e;
    let s = f2 * ft2 * fxx2
        - ft2 * f_fxx * f_fxx
        - fxx2 * f_gt * f_gt
        - f2 * ft_gxx * ft_gxx
        - 2.0 * f_fxx * f_gt * ft_gxx;
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Degenerate("closed-form determinant vanishes"));
    }
    Ok(Gamma2D {
        g00: (ft2 * fxx2 - ft_gxx * ft_gxx) / s,
        gtt: (f2 * fxx2 - f_fxx * f_fxx) / s,
        gxxxx: (f2 * ft2 - f_gt * f_gt) / s,
        g0xx: (-ft2 * f_fxx - f_gt * ft_gxx) / s,
        g0t: (-fxx2 * f_gt - f_fxx * ft_gxx) / s,
        gtxx: (-f_fxx * f_gt - f2 * ft_gxx) / s,
        gx: -1.0 / f_fxx,
        sqrt_det_corr: s,
    })
}

/// Three-dimensional inverse from the published closed forms, transcribed
/// as printed. Compare with [`CorrelationModel3D::closed_form_report`]
/// before trusting any entry.
pub fn closed_form_inverse_3d(e: &CorrelationEntries) -> Result<Gamma3D> {
    let CorrelationEntries { f2, ft2, fxx2, f_gt, f_fxx, ft_gxx, .. } = *e;
    let s = 2.0 / 9.0
        * fxx2
        * (6.0 * ft2 * f_fxx * f_fxx
            + 12.0 * f_gt * f_fxx * ft_gxx
            + 6.0 * f2 * ft_gxx * ft_gxx
            + 4.0 * f_gt * f_gt * fxx2
            - 4.0 * f2 * ft2 * fxx2);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Degenerate("closed-form determinant vanishes"));
    }
    let f8 = f2.powi(4);
    let den = 9.0 * s;
    let tail = fxx2 * (f_gt * f_gt - f2 * ft2);
    Ok(Gamma3D {
        g00: 4.0 * f8 * fxx2 * (2.0 * ft2 * fxx2 - 3.0 * ft_gxx * ft_gxx) / den,
        g0xx: 6.0 * f8 * fxx2 * (f_fxx * ft2 + f_gt * ft_gxx) / den,
        g0t: 4.0 * f8 * fxx2 * (3.0 * f_fxx * ft_gxx + 2.0 * f_gt * fxx2) / den,
        gtt: 4.0 * f8 * fxx2 * (3.0 * f_fxx * f_fxx - 2.0 * f2 * fxx2) / den,
        gtxx: 6.0 * f8 * fxx2 * (f_gt * f_fxx + f2 * ft_gxx) / den,
        gxxxx: 9.0
            * f8
            * (ft2 * f_fxx * f_fxx + 2.0 * f_gt * f_fxx * ft_gxx + f2 * ft_gxx * ft_gxx + tail)
            / den,
        gxxyy: -3.0
            * f8
            * (3.0 * ft2 * f_fxx * f_fxx
                + 6.0 * f_gt * f_fxx * ft_gxx
                + 3.0 * f2 * ft_gxx * ft_gxx
                + tail)
            / den,
        gx: -1.0 / f_fxx,
        gxy: 3.0 / fxx2,
        sqrt_det_corr: s,
    })
}

/// How a closed-form entry relates to its numeric counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    /// Relative error within [`CLOSED_FORM_TOL`].
    Match,
    /// Equal magnitude, opposite sign.
    SignFlip,
    /// Off by a constant factor; `ratio = closed / numeric`.
    ScaleMismatch { ratio: f64 },
}

/// Relative tolerance for a closed-form entry to count as matching.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElementComparison {
    pub name: &'static str,
    pub closed_form: f64,
    pub numeric: f64,
    pub verdict: Verdict,
}

impl ElementComparison {
    fn new(name: &'static str, closed_form: f64, numeric: f64) -> Self {
        let scale = numeric.abs().max(closed_form.abs()).max(f64::MIN_POSITIVE);
        let verdict = if (closed_form - numeric).abs() <= CLOSED_FORM_TOL * scale {
            Verdict::Match
        } else if (closed_form + numeric).abs() <= CLOSED_FORM_TOL * scale {
            Verdict::SignFlip
        } else {
            Verdict::ScaleMismatch { ratio: closed_form / numeric }
        };
        ElementComparison { name, closed_form, numeric, verdict }
    }

    pub fn matches(&self) -> bool {
        self.verdict == Verdict::Match
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{Spectrum, SpectrumKind};

    fn mono3() -> SpectralMoments {
        SpectralMoments::new(Dimension::Three, 1.0, 1.0, 1.0, 1.0, 1.0)
    }

    fn blackbody() -> SpectralMoments {
        Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 }).moments().unwrap()
    }

    #[test]
    fn labels_roundtrip() {
        for d in ORDER_3D.iter().chain(&[F_X, F_XY]) {
            assert_eq!(alloc::format!("{d}").parse::<Derivative>().unwrap(), *d);
        }
        assert_eq!("f_xyt".parse::<Derivative>().unwrap(), Derivative::new(Part::F, 1, 1, 0, 1));
        assert!("h_x".parse::<Derivative>().is_err());
        assert!("f_".parse::<Derivative>().is_err());
    }

    #[test]
    fn monochromatic_entries() {
        let e = correlation_entries(&mono3());
        assert_eq!(e.f2, 1.0);
        assert_eq!(e.ft2, 1.0);
        assert!((e.fxx2 - 0.2).abs() < 1e-16);
        assert!((e.f_fxx + 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(e.f_gt, -1.0);
        assert!((e.ft_gxx + 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn special_dispersion_entries() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
            .moments()
            .unwrap();
        let e = correlation_entries(&m);
        assert_eq!(e.f2, 1.0);
        assert!((e.ft2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.fxx2 - 0.2).abs() < 1e-15);
        assert!((e.f_fxx + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn transfer_and_symmetry_rules() {
        let m = blackbody();
        let c = |a: &str, b: &str| correlation(&m, a.parse().unwrap(), b.parse().unwrap()).unwrap();
        assert_eq!(c("f", "f_xx"), -c("f_x", "f_x"));
        assert_eq!(c("g", "g_xx"), c("f", "f_xx"));
        assert_eq!(c("f_t", "g"), -c("f", "g_t"));
        assert_eq!(c("f_xx", "g_t"), -c("f_t", "g_xx"));
        assert_eq!(c("f_xy", "f_xy"), c("f_xx", "f_yy"));
        assert!((3.0 * c("f_xx", "f_yy") - c("f_xx", "f_xx")).abs() < 1e-12);
        assert_eq!(c("f_x", "f_x"), c("f_z", "f_z"));
        assert_eq!(c("f_t", "g_xx"), c("f_t", "g_yy"));
        // parity zeros
        assert_eq!(c("f", "g"), 0.0);
        assert_eq!(c("f", "f_t"), 0.0);
        assert_eq!(c("f_x", "f"), 0.0);
        assert_eq!(c("f_xx", "g_xx"), 0.0);
        // a moment outside the tracked set
        let f_tt: Derivative = "f_tt".parse().unwrap();
        assert_eq!(correlation(&m, f_tt, f_tt), None);
    }

    #[test]
    fn time_symmetric_cross_terms_vanish() {
        let m = SpectralMoments::new(Dimension::Three, 2.0, 7.0, 0.0, 3.0, 0.0);
        let e = correlation_entries(&m);
        assert_eq!((e.f_gt, e.ft_gxx), (0.0, 0.0));
    }

    #[test]
    fn blackbody_model_is_positive_definite() {
        let model = build_3d(&blackbody()).unwrap();
        let g = model.inverse().unwrap();
        assert!(g.a() > 0.0 && g.b() < 0.0);
        assert!((g.a() - 0.5 * g.gxy).abs() < 1e-12 * g.gxy);
        let prod = linalg::mat_mul(&model.corr, model.gamma.as_ref().unwrap());
        assert!(linalg::max_abs_diff(&prod, &linalg::identity()) < 1e-12);
    }

    #[test]
    fn monochromatic_model_is_flagged_degenerate() {
        let model = build_3d(&mono3()).unwrap();
        assert!(model.is_degenerate());
        assert_eq!(model.inverse(), Err(DEGENERATE));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(matches!(build_2d(&mono3()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn inverse_has_the_same_zero_pattern() {
        let model = build_3d(&blackbody()).unwrap();
        let p = model.gamma.unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if model.corr[i][j] == 0.0 {
                    assert!(p[i][j].abs() < 1e-10, "({i},{j}) = {}", p[i][j]);
                }
            }
        }
        // antisymmetric off-diagonal blocks
        assert!((p[1][4] + p[0][5]).abs() < 1e-10);
        assert!((p[2][5] + p[1][6]).abs() < 1e-10);
    }

    #[test]
    fn closed_form_2d_matches_numeric() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
            .moments()
            .unwrap();
        let model = build_2d(&m).unwrap();
        for c in model.closed_form_report().unwrap() {
            assert!((c.closed_form - c.numeric).abs() <= 1e-10 * c.numeric.abs().max(1.0), "{c:?}");
        }
    }

    #[test]
    fn closed_form_2d_time_symmetric_zeros() {
        let m = SpectralMoments::new(Dimension::Two, 1.0, 2.0, 0.0, 1.0, 0.0);
        let g = closed_form_inverse_2d(&correlation_entries(&m)).unwrap();
        assert_eq!((g.g0t, g.gtxx), (0.0, 0.0));
    }

    #[test]
    fn closed_form_3d_discrepancies_are_named() {
        let report = build_3d(&blackbody()).unwrap().closed_form_report().unwrap();
        let g00 = report.iter().find(|c| c.name == "Gamma_0,0").unwrap();
        assert_eq!(g00.verdict, Verdict::SignFlip);
        let rest: Vec<_> = report.iter().filter(|c| c.name != "Gamma_0,0" && c.name != "sqrt det corr").collect();
        assert!(rest.iter().all(|c| c.matches()), "{rest:?}");
    }
}
