//! Numerical quadrature of the intermediate integrals behind the closed
//! forms: the shifted contour integral in `v` and the reduced two-fold
//! integrals over the auxiliary variables that replace the moduli.

use core::f64::consts::{FRAC_PI_2, PI};
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

use crate::error::{Error, Result};
use crate::gaussian_model::{CorrelationModel2D, CorrelationModel3D};
use crate::linalg::{self, Mat};
use crate::rates::ContourConstants;

/// Values a quadrature rule can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Stopping rule: converged once the error estimate is below
/// `max(abs, rel · |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Number of step halvings (double-exponential) or recursion depth (Simpson).
    pub max_level: u32,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, max_level: 10 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate<T> {
    pub value: T,
    /// Difference between the last two refinements.
    pub error: f64,
    pub evaluations: usize,
}

/// Half-width of the truncated `t` range of the double-exponential maps.
const T_MAX: f64 = 4.0;

/// Trapezoid sums of `f(x(t)) x'(t)` under a double-exponential map, with
/// the step halved until two successive sums agree.
fn double_exponential<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    map: impl Fn(f64) -> (f64, f64),
    tol: Tolerance,
) -> Result<Estimate<T>> {
    let mut eval = |t: f64, evaluations: &mut usize| -> T {
        let (x, w) = map(t);
        if w == 0.0 || !w.is_finite() || !x.is_finite() {
            return T::zero();
        }
        *evaluations += 1;
        f(x) * w
    };
    let mut evaluations = 0;
    let mut h = 0.5;
    let n0 = (T_MAX / h) as i64;
    let mut sum = T::zero();
    for k in -n0..=n0 {
        sum = sum + eval(k as f64 * h, &mut evaluations);
    }
    let mut prev = sum * h;
    for _ in 0..tol.max_level {
        h *= 0.5;
        let n = (T_MAX / h) as i64;
        let mut k = -n + 1;
        while k < n {
            sum = sum + eval(k as f64 * h, &mut evaluations);
            k += 2;
        }
        let cur = sum * h;
        let error = (cur - prev).magnitude();
        if !error.is_finite() {
            return Err(Error::NoConvergence { estimate: f64::NAN, error });
        }
        if error <= tol.target(cur.magnitude()) {
            return Ok(Estimate { value: cur, error, evaluations });
        }
        prev = cur;
    }
    Err(Error::NoConvergence { estimate: prev.magnitude(), error: f64::INFINITY })
}

/// `∫_{-∞}^{∞} f`, by the sinh-sinh map `x = s sinh(π/2 sinh t)`.
pub fn sinh_sinh<T: QuadValue>(f: impl FnMut(f64) -> T, scale: f64, tol: Tolerance) -> Result<Estimate<T>> {
    double_exponential(
        f,
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            (scale * u.sinh(), scale * u.cosh() * FRAC_PI_2 * t.cosh())
        },
        tol,
    )
}

/// `∫_0^∞ f`, by the exp-sinh map `x = s exp(π/2 sinh t)`.
pub fn exp_sinh<T: QuadValue>(f: impl FnMut(f64) -> T, scale: f64, tol: Tolerance) -> Result<Estimate<T>> {
    double_exponential(
        f,
        |t| {
            let x = scale * (FRAC_PI_2 * t.sinh()).exp();
            (x, x * FRAC_PI_2 * t.cosh())
        },
        tol,
    )
}

/// `∫_a^b f`, by the tanh-sinh map. Endpoint singularities are allowed.
pub fn tanh_sinh<T: QuadValue>(f: impl FnMut(f64) -> T, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>> {
    let r = 0.5 * (b - a);
    double_exponential(
        f,
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            let ch = u.cosh();
            // distance to the nearer endpoint without cancellation: 1 − tanh|u| = 2/(e^{2|u|} + 1)
            let d = r * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
            let x = if u < 0.0 { a + d } else { b - d };
            if d == 0.0 {
                return (x, 0.0);
            }
            (x, r * FRAC_PI_2 * t.cosh() / (ch * ch))
        },
        tol,
    )
}

/// `∫_a^b f` by recursive Simpson bisection with Richardson correction.
pub fn adaptive_simpson<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_evaluations: usize,
) -> Result<Estimate<T>> {
    struct Ctx {
        evaluations: usize,
        limit: usize,
        error: f64,
    }
    #[allow(clippy::too_many_arguments)]
    fn step<T: QuadValue>(
        f: &mut impl FnMut(f64) -> T,
        ctx: &mut Ctx,
        a: f64,
        b: f64,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        target: f64,
        depth: u32,
    ) -> Option<T> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        ctx.evaluations += 2;
        if ctx.evaluations > ctx.limit {
            return None;
        }
        let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
        let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
        let delta = left + right - whole;
        if depth == 0 || delta.magnitude() <= 15.0 * target {
            ctx.error += delta.magnitude() / 15.0;
            return Some(left + right + delta * (1.0 / 15.0));
        }
        let l = step(f, ctx, a, m, fa, flm, fm, left, 0.5 * target, depth - 1)?;
        let r = step(f, ctx, m, b, fm, frm, fb, right, 0.5 * target, depth - 1)?;
        Some(l + r)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    let mut ctx = Ctx { evaluations: 3, limit: max_evaluations, error: 0.0 };
    let target = tol.target(whole.magnitude());
    let depth = tol.max_level.max(40);
    let value = step(&mut f, &mut ctx, a, b, fa, fm, fb, whole, target, depth)
        .ok_or(Error::NoConvergence { estimate: whole.magnitude(), error: f64::INFINITY })?;
    Ok(Estimate { value, error: ctx.error, evaluations: ctx.evaluations })
}

/// Which side of the origin the integration line passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shift {
    /// `Im v = +ε`: twice the reconnection rate.
    Up,
    /// `Im v = −ε`: twice the birth plus death rate.
    Down,
    /// Average of the two: the principal value, twice the total rate.
    Principal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Rule {
    TanhSinh,
    AdaptiveSimpson,
}

/// Integration line and rule for [`contour_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContourSpec {
    /// Offset of the line from the real axis; defaults to `min(a, |b|)/10`.
    pub epsilon: Option<f64>,
    /// Truncation `|Re v| ≤ cutoff` for the Simpson rule, beyond which the
    /// `1/v²` tail is added analytically; chosen from the tolerance when absent.
    pub cutoff: Option<f64>,
    /// Upper bound on integrand evaluations.
    pub n_points: usize,
    pub rule: Rule,
    /// Absolute tolerance on the returned rate.
    pub tolerance: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec { epsilon: None, cutoff: None, n_points: 1 << 20, rule: Rule::TanhSinh, tolerance: 1e-8 }
    }
}

/// `½ Q (1 − 1/((1 + iv/a)√(1 + iv/b)))/v²`.
///
/// On the line `Im v = y` with `−|b| < y`, the radicand has real part
/// `1 + y/|b| > 0`, so the principal root is the branch continuous from
/// `v = 0`, where the root is 1.
fn contour_integrand(c: &ContourConstants, v: Complex64) -> Complex64 {
    let i = Complex64::i();
    let pole = Complex64::new(1.0, 0.0) + i * v / c.a;
    let root = (Complex64::new(1.0, 0.0) + i * v / c.b).sqrt();
    (Complex64::new(1.0, 0.0) - (pole * root).inv()) * (0.5 * c.q) / (v * v)
}

/// Rate given by the contour integral along `Im v = ±ε`.
///
/// `Up` gives the reconnection rate, `Down` the birth plus death rate and
/// `Principal` half their sum, i.e. half the total event rate.
pub fn contour_integral(c: ContourConstants, spec: &ContourSpec, shift: Shift) -> Result<Estimate<f64>> {
    if !(c.a > 0.0) || !(c.b < 0.0) {
        return Err(Error::InvalidContour(alloc::format!("need a > 0 > b, got a = {}, b = {}", c.a, c.b)));
    }
    if c.q == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let eps = spec.epsilon.unwrap_or(0.1 * c.a.min(-c.b));
    if !(eps > 0.0) {
        return Err(Error::InvalidContour("epsilon must be positive".into()));
    }
    match shift {
        Shift::Up if eps >= c.a => {
            return Err(Error::InvalidContour(alloc::format!("epsilon {eps} reaches the pole at i{}", c.a)))
        }
        Shift::Down if eps >= -c.b => {
            return Err(Error::InvalidContour(alloc::format!("epsilon {eps} reaches the branch point at i{}", c.b)))
        }
        Shift::Principal => {
            let up = contour_integral(c, spec, Shift::Up)?;
            let down = contour_integral(c, spec, Shift::Down)?;
            return Ok(Estimate {
                value: 0.5 * (up.value + down.value),
                error: 0.5 * (up.error + down.error),
                evaluations: up.evaluations + down.evaluations,
            });
        }
        _ => {}
    }
    let y = if shift == Shift::Up { eps } else { -eps };
    // h(−conj v) = conj h(v), so the line integral is twice the real part over x > 0
    let half = |x: f64| 2.0 * contour_integrand(&c, Complex64::new(x, y)).re;
    let tol = Tolerance { abs: spec.tolerance, rel: 0.0, max_level: 12 };
    match spec.rule {
        Rule::TanhSinh => {
            let est = exp_sinh(half, eps, tol)?;
            if est.evaluations > spec.n_points {
                return Err(Error::NoConvergence { estimate: est.value, error: est.error });
            }
            Ok(est)
        }
        Rule::AdaptiveSimpson => {
            // beyond L the bracket's second term is bounded by Q a √|b| x^(-7/2)
            let tail_bound = |l: f64| c.q * c.a * (-c.b).sqrt() * 0.4 * l.powf(-2.5);
            let cutoff = spec.cutoff.unwrap_or_else(|| {
                let target = 0.1 * spec.tolerance / (c.q * c.a * (-c.b).sqrt() * 0.4);
                target.powf(-0.4).max(100.0 * eps)
            });
            let truncation = tail_bound(cutoff);
            if truncation > spec.tolerance {
                return Err(Error::NoConvergence { estimate: f64::NAN, error: truncation });
            }
            let body_tol = Tolerance { abs: 0.5 * spec.tolerance, rel: 0.0, max_level: 60 };
            let body = adaptive_simpson(half, 0.0, cutoff, body_tol, spec.n_points)?;
            let tail = c.q * cutoff / (cutoff * cutoff + y * y);
            Ok(Estimate { value: body.value + tail, error: body.error + truncation, evaluations: body.evaluations })
        }
    }
}

/// Total event rate of a three-dimensional model, by quadrature over the
/// auxiliary variable `μ` and the radial gradient magnitude `r`.
///
/// The integrand is built from the complex 6×6 matrix of the remaining
/// Gaussian variables with the `μ` terms folded in; its determinant and the
/// velocity quadratic form are evaluated numerically rather than from their
/// factorized closed forms. `tol` is relative.
pub fn reduced_integral_3d(model: &CorrelationModel3D, tol: f64) -> Result<Estimate<f64>> {
    if model.is_degenerate() {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let g = model.inverse()?;
    let p = model.gamma.as_ref().expect("nondegenerate");
    let (gx, gxy) = (g.gx, g.gxy);
    // (f_t, f_xx, f_yy, g_t, g_xx, g_yy) within the 8×8 ordering
    const IDX: [usize; 6] = [1, 2, 3, 5, 6, 7];
    let mut base = [[0.0; 6]; 6];
    for (i, &a) in IDX.iter().enumerate() {
        for (j, &b) in IDX.iter().enumerate() {
            base[i][j] = p[a][b];
        }
    }
    // any direction in the (f_z, g_z) plane gives the same integrand
    let (cphi, sphi) = (0.3f64.cos(), 0.3f64.sin());
    let x_sigma = |mu: f64, r: f64| -> Complex64 {
        let (fz, gz) = (r * cphi, r * sphi);
        let i_mu = Complex64::new(0.0, mu);
        let mut m = base.map(|row| row.map(|v| Complex64::new(v, 0.0)));
        let mut add = |a: usize, b: usize, v: Complex64| {
            m[a][b] += v;
            if a != b {
                m[b][a] += v;
            }
        };
        add(1, 2, -i_mu * gz * gz);
        add(1, 5, i_mu * fz * gz);
        add(2, 4, i_mu * fz * gz);
        add(4, 5, -i_mu * fz * fz);
        let zero = Complex64::new(0.0, 0.0);
        let u = [Complex64::new(-gz, 0.0), zero, zero, Complex64::new(fz, 0.0), zero, zero];
        let (det, x) = linalg::complex_det_solve(&m, &u).expect("regular for real mu");
        let q: Complex64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
        let xy = Complex64::new(gxy * gxy, 2.0 * mu * gxy * r * r).sqrt();
        let gauss = (-0.5 * gx * r * r).exp();
        (2.0 * PI) / xy * ((2.0 * PI).powi(6) / det).sqrt() * (2.0 / PI).sqrt() * q.sqrt() * gauss
    };
    let small = 1e-3 * g.a().min(-g.b());
    let inner_tol = Tolerance { abs: 0.0, rel: 0.1 * tol, max_level: 12 };
    let mut evaluations = 0;
    let mut inner_error = 0.0f64;
    let mut fail: Option<Error> = None;
    let outer = exp_sinh(
        |r: f64| {
            if fail.is_some() {
                return 0.0;
            }
            let x0 = x_sigma(0.0, r).re;
            let mu_s = small / (r * r);
            let h = |mu: f64| {
                // below mu_s the difference is quadratic in mu and
                // rounding would dominate
                let m = mu.max(mu_s);
                (x0 - x_sigma(m, r).re) / (m * m)
            };
            match exp_sinh(h, g.a() / (r * r), inner_tol) {
                Ok(e) => {
                    evaluations += e.evaluations;
                    inner_error = inner_error.max(e.error / e.value.abs().max(f64::MIN_POSITIVE));
                    // the μ integral runs over both signs and carries 1/π
                    2.0 * e.value / PI * 2.0 * PI * r
                }
                Err(e) => {
                    fail = Some(e);
                    0.0
                }
            }
        },
        1.0 / gx.sqrt(),
        Tolerance { abs: 0.0, rel: tol, max_level: 10 },
    );
    if let Some(e) = fail {
        return Err(e);
    }
    let outer = outer?;
    let pref = 2.0 * PI * gx.powi(3) * gxy / g.sqrt_det_corr / (2.0 * PI).powi(8);
    let value = pref * outer.value;
    Ok(Estimate {
        value,
        error: pref * outer.error + inner_error * value.abs(),
        evaluations: evaluations + outer.evaluations,
    })
}

/// Pair-event rate of a two-dimensional model, by quadrature over the two
/// auxiliary variables `μ`, `μ'` after the Gaussian integrals over
/// `(f_t, f_xx, g_t, g_xx)` are done by a numeric 4×4 determinant.
/// `tol` is relative.
pub fn reduced_integral_2d(model: &CorrelationModel2D, tol: f64) -> Result<Estimate<f64>> {
    if model.is_degenerate() {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let g = model.inverse()?;
    let p = model.gamma.as_ref().expect("nondegenerate");
    let gy = g.gx;
    // (f_t, f_xx, g_t, g_xx) within the 6×6 ordering
    const IDX: [usize; 4] = [1, 2, 4, 5];
    let mut base: Mat<4> = [[0.0; 4]; 4];
    for (i, &a) in IDX.iter().enumerate() {
        for (j, &b) in IDX.iter().enumerate() {
            base[i][j] = p[a][b];
        }
    }
    // the auxiliary terms add W Wᵀ with W = [w, 0; 0, w], w = (ν, −μ)/√γ_y,
    // so det M = det B · det(I + Wᵀ B⁻¹ W) without cancellation
    let (binv, det_b) = linalg::inverse_spd(&base).map_err(|(index, pivot)| Error::NotPositiveDefinite { index, pivot })?;
    let gauss = |mu: f64, nu: f64| -> f64 {
        let w = [nu / gy.sqrt(), -mu / gy.sqrt()];
        let cols = [[w[0], w[1], 0.0, 0.0], [0.0, 0.0, w[0], w[1]]];
        let mut s = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for a in 0..4 {
                    for b in 0..4 {
                        acc += cols[i][a] * binv[a][b] * cols[j][b];
                    }
                }
                s[i][j] = acc;
            }
        }
        let det = det_b * (s[0][0] * s[1][1] - s[0][1] * s[1][0]);
        (2.0 * PI).powi(2) / det.sqrt()
    };
    let g00 = gauss(0.0, 0.0);
    let s_mu = (gy * g.gxxxx).sqrt();
    let s_nu = (gy * g.gtt).sqrt();
    let inner_tol = Tolerance { abs: 0.0, rel: 0.1 * tol, max_level: 12 };
    let mut evaluations = 0;
    let mut fail: Option<Error> = None;
    let outer = exp_sinh(
        |nu: f64| {
            if fail.is_some() {
                return 0.0;
            }
            let nu = nu.max(1e-3 * s_nu);
            let g0n = gauss(0.0, nu);
            let h = |mu: f64| {
                let mu = mu.max(1e-3 * s_mu);
                (g00 - g0n - gauss(mu, 0.0) + gauss(mu, nu)) / (mu * mu)
            };
            match exp_sinh(h, s_mu, inner_tol) {
                Ok(e) => {
                    evaluations += e.evaluations;
                    e.value / (nu * nu)
                }
                Err(e) => {
                    fail = Some(e);
                    0.0
                }
            }
        },
        s_nu,
        Tolerance { abs: 0.0, rel: tol, max_level: 10 },
    );
    if let Some(e) = fail {
        return Err(e);
    }
    let outer = outer?;
    // four sign quadrants, 1/π² from the moduli, Gaussian factor 2π/γ_y
    let pref = PI * g.gx * gy / g.sqrt_det_corr / (2.0 * PI).powi(5) * (2.0 * PI / gy) * 4.0 / (PI * PI);
    Ok(Estimate {
        value: pref * outer.value,
        error: pref * outer.error,
        evaluations: evaluations + outer.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_model::{build_2d, build_3d};
    use crate::rates::{contour_constants, rate_2d, rates_3d, rates_from_residues};
    use crate::spectra::{Dimension, Spectrum, SpectrumKind};

    fn blackbody_constants() -> ContourConstants {
        let m = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 }).moments().unwrap();
        contour_constants(&build_3d(&m).unwrap()).unwrap()
    }

    #[test]
    fn rules_on_known_integrals() {
        let tol = Tolerance::new(1e-13, 1e-13);
        let g = sinh_sinh(|x: f64| (-x * x).exp(), 1.0, tol).unwrap();
        assert!((g.value - PI.sqrt()).abs() < 1e-13);
        let e = exp_sinh(|x: f64| 1.0 / (1.0 + x * x), 1.0, tol).unwrap();
        assert!((e.value - FRAC_PI_2).abs() < 1e-12);
        let t = tanh_sinh(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, tol).unwrap();
        assert!((t.value - 2.0).abs() < 1e-12);
        let s = adaptive_simpson(|x: f64| x.sin(), 0.0, PI, Tolerance::new(1e-12, 0.0), 1 << 20).unwrap();
        assert!((s.value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn contour_matches_residues() {
        let c = blackbody_constants();
        let exact = rates_from_residues(c).unwrap();
        let spec = ContourSpec::default();
        let up = contour_integral(c, &spec, Shift::Up).unwrap();
        let down = contour_integral(c, &spec, Shift::Down).unwrap();
        assert!((up.value - exact.reconnection.unwrap()).abs() < 1e-8, "{up:?}");
        assert!((down.value - exact.birth_plus_death()).abs() < 1e-8, "{down:?}");
        let simpson = ContourSpec { rule: Rule::AdaptiveSimpson, ..spec };
        let up_s = contour_integral(c, &simpson, Shift::Up).unwrap();
        assert!((up_s.value - exact.reconnection.unwrap()).abs() < 1e-7, "{up_s:?}");
    }

    #[test]
    fn contour_is_independent_of_epsilon() {
        let c = blackbody_constants();
        let base = contour_integral(c, &ContourSpec::default(), Shift::Up).unwrap().value;
        for f in [0.01, 0.05, 0.2, 1.0 / 3.0] {
            let spec = ContourSpec { epsilon: Some(f * c.a), ..Default::default() };
            let v = contour_integral(c, &spec, Shift::Up).unwrap().value;
            assert!((v - base).abs() < 1e-8, "eps = {f} a: {v} vs {base}");
        }
    }

    #[test]
    fn shifts_differ_by_the_origin_residue() {
        let c = blackbody_constants();
        let spec = ContourSpec::default();
        let up = contour_integral(c, &spec, Shift::Up).unwrap().value;
        let down = contour_integral(c, &spec, Shift::Down).unwrap().value;
        let pv = contour_integral(c, &spec, Shift::Principal).unwrap().value;
        assert!((down - up + PI * c.q * (1.0 / c.a + 0.5 / c.b)).abs() < 1e-8);
        assert!((pv - 0.5 * (up + down)).abs() < 1e-15);
    }

    #[test]
    fn contour_rejects_crossing_the_pole() {
        let c = blackbody_constants();
        let spec = ContourSpec { epsilon: Some(2.0 * c.a), ..Default::default() };
        assert!(contour_integral(c, &spec, Shift::Up).is_err());
        let spec = ContourSpec { epsilon: Some(-c.b), ..Default::default() };
        assert!(contour_integral(c, &spec, Shift::Down).is_err());
        let zero = ContourConstants { q: 0.0, ..c };
        assert_eq!(contour_integral(zero, &ContourSpec::default(), Shift::Principal).unwrap().value, 0.0);
    }

    #[test]
    fn reduced_3d_matches_closed_form() {
        let m = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 }).moments().unwrap();
        let total = rates_3d(&m).unwrap().total();
        let r = reduced_integral_3d(&build_3d(&m).unwrap(), 1e-7).unwrap();
        assert!((r.value - total).abs() < 1e-5 * total, "{} vs {total}", r.value);
    }

    #[test]
    fn reduced_2d_matches_closed_form() {
        let m = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 }).moments().unwrap();
        let omega = rate_2d(&m).unwrap().pair_events.unwrap();
        let r = reduced_integral_2d(&build_2d(&m).unwrap(), 1e-8).unwrap();
        assert!((r.value - omega).abs() < 1e-6 * omega, "{} vs {omega}", r.value);
    }
}
