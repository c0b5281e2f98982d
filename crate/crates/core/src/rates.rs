//! Closed-form event rates, by the moment formulas and by the residues of
//! the contour integral.

use core::f64::consts::PI;


#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::gaussian_model::{CorrelationModel3D, Gamma3D};
use crate::spectra::{Dimension, SpectralMoments};

/// How a set of rates was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    ClosedForm,
    ContourResidue,
    Quadrature,
    MonteCarlo,
    Simulation,
}

/// Event rates per unit area (2D) or volume (3D) and per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventRates {
    pub dimension: Dimension,
    /// Vortex reconnections (3D only).
    pub reconnection: Option<f64>,
    /// Loop births (3D) or pair creations (2D).
    pub birth: f64,
    /// Loop deaths (3D) or pair annihilations (2D).
    pub death: f64,
    /// Creations plus annihilations (2D only).
    pub pair_events: Option<f64>,
    pub method: Method,
    /// Standard error of the total, for statistical methods.
    pub stderr: Option<f64>,
}

impl EventRates {
    pub fn birth_plus_death(&self) -> f64 {
        self.birth + self.death
    }

    /// Sum over every event kind.
    pub fn total(&self) -> f64 {
        self.birth + self.death + self.reconnection.unwrap_or(0.0)
    }

    pub fn units(&self) -> &'static str {
        units(self.dimension)
    }

    pub fn zero(dimension: Dimension, method: Method) -> Self {
        match dimension {
            Dimension::Two => Self::pair(0.0, method),
            Dimension::Three => Self::volume(0.0, 0.0, method),
        }
    }

    fn pair(omega: f64, method: Method) -> Self {
        EventRates {
            dimension: Dimension::Two,
            reconnection: None,
            birth: 0.5 * omega,
            death: 0.5 * omega,
            pair_events: Some(omega),
            method,
            stderr: None,
        }
    }

    fn volume(reconnection: f64, birth_plus_death: f64, method: Method) -> Self {
        EventRates {
            dimension: Dimension::Three,
            reconnection: Some(reconnection),
            birth: 0.5 * birth_plus_death,
            death: 0.5 * birth_plus_death,
            pair_events: None,
            method,
            stderr: None,
        }
    }
}

/// Units of a rate in `d` dimensions, in the spectrum's own length and time.
pub const fn units(d: Dimension) -> &'static str {
    match d {
        Dimension::Two => "length^-2 time^-1",
        Dimension::Three => "length^-3 time^-1",
    }
}

/// Lower bound of `(Ω_B + Ω_D)/Ω_R`, reached by a single-shell spectrum.
pub fn ratio_lower_bound() -> f64 {
    1.0 - 5.0 / (3.0 * 3.0f64.sqrt())
}

/// Pair-event rate `Ω = √(ω̄² − ω̄²) √(k̄ₓ⁴ − (k̄ₓ²)²) / π²` of a
/// two-dimensional field, split evenly into creations and annihilations.
pub fn rate_2d(m: &SpectralMoments) -> Result<EventRates> {
    m.expect_dimension(Dimension::Two)?;
    let m = m.validated()?;
    let (kx2, kx4) = m.component_moments();
    let spread = (kx4 - kx2 * kx2).max(0.0);
    let omega = m.frequency_variance().sqrt() * spread.sqrt() / (PI * PI);
    Ok(EventRates::pair(omega, Method::ClosedForm))
}

/// Reconnection, birth and death rates of a three-dimensional field.
pub fn rates_3d(m: &SpectralMoments) -> Result<EventRates> {
    m.expect_dimension(Dimension::Three)?;
    let m = m.validated()?;
    let (kx2, kx4) = m.component_moments();
    let var = m.frequency_variance();
    let recon = (kx4.powi(3) * var / (3.0 * kx2 * (kx4 - kx2 * kx2))).sqrt() / (2.0 * PI * PI);
    let birth = 0.5 * recon - 3.0 / (8.0 * PI * PI) * (kx2.powi(3) * var).sqrt();
    Ok(EventRates::volume(recon, 2.0 * birth, Method::ClosedForm))
}

/// Constants of the contour integral `Q ∫ (1 − 1/((1 − v/ia)√(1 − v/ib))) dv/v²`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContourConstants {
    pub q: f64,
    /// Simple pole at `i a`, `a > 0`.
    pub a: f64,
    /// Branch point at `i b`, `b < 0`.
    pub b: f64,
}

/// `Q` from the inverse-matrix entries.
pub fn q_from_inverse(g: &Gamma3D, f2: f64) -> f64 {
    let s = g.gxxxx + g.gxxyy;
    3.0 * g.gx.sqrt() * s.sqrt() / (4.0 * PI.powi(3) * f2 * (g.gtt * s - 2.0 * g.gtxx * g.gtxx).sqrt())
}

/// `Q = 3√(ω̄² − ω̄²)/(4π³√k̄ₓ²)` from the moments alone.
pub fn q_from_moments(m: &SpectralMoments) -> f64 {
    let (kx2, _) = m.component_moments();
    3.0 * m.frequency_variance().sqrt() / (4.0 * PI.powi(3) * kx2.sqrt())
}

/// Relative tolerance on the agreement of the two expressions for `Q`.
pub const Q_ROUTE_TOL: f64 = 1e-10;

/// `(Q, a, b)` of a nondegenerate model.
///
/// The matrix form of `Q` carries a factor `1/⟨f²⟩` relative to the moment
/// form (as do `a` and `b`, so the rates are unaffected); the two are
/// checked against each other to [`Q_ROUTE_TOL`].
pub fn contour_constants(model: &CorrelationModel3D) -> Result<ContourConstants> {
    let g = model.inverse()?;
    if !(g.gtt > 0.0) {
        return Err(Error::Degenerate("Gamma_t,t is not positive"));
    }
    let f2 = model.moments.f2;
    let q = q_from_inverse(&g, f2);
    let simple = q_from_moments(&model.moments) / f2;
    if (q - simple).abs() > Q_ROUTE_TOL * simple.abs() {
        return Err(Error::RouteMismatch { what: "Q from matrix vs moments", lhs: q, rhs: simple });
    }
    Ok(ContourConstants { q, a: g.a(), b: g.b() })
}

/// `Ω_R = πQ/(a√(1 − a/b))` and `Ω_B + Ω_D = Ω_R − πQ(1/a + 1/(2b))`.
pub fn rates_from_residues(c: ContourConstants) -> Result<EventRates> {
    let ContourConstants { q, a, b } = c;
    if !(a > 0.0) || !(b < 0.0) || !(q >= 0.0) {
        return Err(Error::InvalidContour(alloc::format!(
            "need a > 0, b < 0, Q >= 0; got a = {a}, b = {b}, Q = {q}"
        )));
    }
    let recon = PI * q / (a * (1.0 - a / b).sqrt());
    let bd = recon - PI * q * (1.0 / a + 0.5 / b);
    Ok(EventRates::volume(recon, bd, Method::ContourResidue))
}

/// Residue-route rates straight from moments; zero when the vortices are
/// motionless.
pub fn rates_3d_by_residues(m: &SpectralMoments) -> Result<EventRates> {
    let model = CorrelationModel3D::build(m)?;
    if model.is_degenerate() {
        return Ok(EventRates::zero(Dimension::Three, Method::ContourResidue));
    }
    rates_from_residues(contour_constants(&model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{Spectrum, SpectrumKind};

    fn blackbody() -> SpectralMoments {
        Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 }).moments().unwrap()
    }

    #[test]
    fn blackbody_rates() {
        let r = rates_3d(&blackbody()).unwrap();
        // independent evaluation of the moment formulas in double precision
        assert!((r.reconnection.unwrap() - 4.270_200_150_109_233).abs() < 1e-12);
        assert!((r.birth_plus_death() - 1.852_605_041_394_577_6).abs() < 1e-12);
        assert_eq!(r.birth, r.death);
    }

    #[test]
    fn residue_route_agrees_on_blackbody() {
        let a = rates_3d(&blackbody()).unwrap();
        let b = rates_3d_by_residues(&blackbody()).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        assert!(rel(b.reconnection.unwrap(), a.reconnection.unwrap()) < 1e-12);
        assert!(rel(b.birth_plus_death(), a.birth_plus_death()) < 1e-12);
        assert_eq!(b.method, Method::ContourResidue);
    }

    #[test]
    fn blackbody_contour_constants() {
        let model = CorrelationModel3D::build(&blackbody()).unwrap();
        let c = contour_constants(&model).unwrap();
        assert!((c.a - 0.009_624_358_363_766_558).abs() < 1e-15);
        assert!((c.b + 0.007_735_738_830_658_097).abs() < 1e-15);
        assert!((c.q - 0.019_597_258_492_580_875).abs() < 1e-15);
    }

    #[test]
    fn monochromatic_rates_vanish() {
        let m = SpectralMoments::new(Dimension::Three, 1.0, 1.0, 2.0, 4.0, 2.0);
        assert_eq!(rates_3d(&m).unwrap().total(), 0.0);
        assert_eq!(rates_3d_by_residues(&m).unwrap().total(), 0.0);
        let m2 = SpectralMoments::new(Dimension::Two, 1.0, 1.0, 2.0, 4.0, 2.0);
        assert_eq!(rate_2d(&m2).unwrap().pair_events, Some(0.0));
    }

    #[test]
    fn modulus_ratio_is_the_lower_bound() {
        let (k, w) = (1.3, 0.7);
        let m = Spectrum::new(Dimension::Three, SpectrumKind::MonochromaticModulus { k, omega: w })
            .moments()
            .unwrap();
        let r = rates_3d(&m).unwrap();
        let expect = 3.0 * w * k.powi(3) / (20.0 * PI * PI);
        assert!((r.reconnection.unwrap() - expect).abs() <= 1e-12 * expect);
        assert!((r.birth_plus_death() / r.reconnection.unwrap() - ratio_lower_bound()).abs() < 1e-10);
    }

    #[test]
    fn special_dispersion_pair_rate() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 })
            .moments()
            .unwrap();
        let r = rate_2d(&m).unwrap();
        let expect = 2.0 / (3.0 * PI * PI * 15.0f64.sqrt());
        assert!((r.pair_events.unwrap() - expect).abs() <= 1e-12 * expect);
        assert_eq!(r.birth, 0.5 * expect);
    }

    #[test]
    fn residue_preconditions() {
        let bad = ContourConstants { q: 1.0, a: -1.0, b: -1.0 };
        assert!(rates_from_residues(bad).is_err());
        let zero = rates_from_residues(ContourConstants { q: 0.0, a: 1.0, b: -1.0 }).unwrap();
        assert_eq!(zero.total(), 0.0);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(rate_2d(&blackbody()).is_err());
    }
}
