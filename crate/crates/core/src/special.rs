//! Riemann zeta and small helpers for the thermal spectrum.

#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

/// Riemann zeta function for real `s > 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta is only implemented for s > 1");
    const N: usize = 32;
    let n = N as f64;
    let mut sum = 0.0;
    for k in (1..N).rev() {
        sum += (k as f64).powf(-s);
    }
    // tail: integral, half endpoint, then Bernoulli corrections B2..B8
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut fact = 1.0; // (2j)!
    let mut rising = s; // s (s+1) ... (s+2j-2)
    let mut power = n.powf(-s - 1.0);
    for (j, b) in bernoulli.iter().enumerate() {
        let two_j = 2.0 * (j as f64 + 1.0);
        fact *= (two_j - 1.0) * two_j;
        sum += b / fact * rising * power;
        rising *= (s + two_j - 1.0) * (s + two_j);
        power /= n * n;
    }
    sum
}

/// Gamma function at a positive integer, `(n - 1)!`.
pub fn gamma_int(n: u32) -> f64 {
    (1..n).map(f64::from).product()
}

/// `(n - 1)!!` for even `n`, which is the `n`-th moment of a unit normal.
pub(crate) fn double_factorial_odd(n: u32) -> f64 {
    let mut p = 1.0;
    let mut k = 1;
    while k < n {
        p *= f64::from(k);
        k += 2;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn even_zeta_values() {
        let e = zeta(2.0) - PI * PI / 6.0; assert!(e.abs() < 1e-15, "{e}");
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-15);
        assert!((zeta(6.0) - PI.powi(6) / 945.0).abs() < 1e-15);
        assert!((zeta(8.0) - PI.powi(8) / 9450.0).abs() < 1e-15);
    }

    #[test]
    fn odd_zeta_values() {
        // Apery's constant and zeta(5), zeta(7) to 16 digits
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-15);
        assert!((zeta(5.0) - 1.036_927_755_143_37).abs() < 1e-15);
        assert!((zeta(7.0) - 1.008_349_277_381_922_8).abs() < 1e-15);
    }

    #[test]
    fn factorials() {
        assert_eq!(gamma_int(1), 1.0);
        assert_eq!(gamma_int(6), 120.0);
        assert_eq!(double_factorial_odd(4), 3.0);
        assert_eq!(double_factorial_odd(6), 15.0);
        assert_eq!(double_factorial_odd(0), 1.0);
    }
}
