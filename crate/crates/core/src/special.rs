//! Special functions backing the count distributions.

use crate::error::{domain, Result};

// Stopping criterion on the Lentz update; comfortably inside a 1e-12 relative error.
const CF_TOLERANCE: f64 = 1e-14;
const CF_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction (modified Lentz) on whichever of `I_x(a,b)` or
/// `1 - I_{1-x}(b,a)` converges faster.
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return domain(format!("beta_reg needs a, b > 0 (got {a}, {b})"));
    }
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("beta_reg needs 0 <= x <= 1 (got {x})"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_cf_scaled(b, a, 1.0 - x))
    } else {
        Ok(beta_cf_scaled(a, b, x))
    }
}

/// `x^a (1-x)^b / (a B(a,b))` times the continued fraction.
fn beta_cf_scaled(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp() / a;
    if front == 0.0 {
        return 0.0;
    }

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOLERANCE {
            break;
        }
    }
    front * h
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_uniform() {
        assert_eq!(beta_reg(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(beta_reg(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert!((beta_reg(1.0, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn closed_forms() {
        // I_x(a, 1) = x^a ; I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            for &a in &[0.5, 1.0, 3.0, 17.0] {
                let v = beta_reg(a, 1.0, x).unwrap();
                assert!((v - x.powf(a)).abs() < 1e-13, "a={a} x={x}");
                let v = beta_reg(1.0, a, x).unwrap();
                assert!((v - (1.0 - (1.0 - x).powf(a))).abs() < 1e-13, "b={a} x={x}");
            }
        }
    }

    #[test]
    fn symmetry_relation() {
        for &(a, b, x) in &[(2.0, 5000.0, 6e-4), (30.0, 4.0, 0.8), (7.5, 7.5, 0.5)] {
            let lhs = beta_reg(a, b, x).unwrap();
            let rhs = 1.0 - beta_reg(b, a, 1.0 - x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(beta_reg(0.0, 1.0, 0.5).is_err());
        assert!(beta_reg(1.0, -1.0, 0.5).is_err());
        assert!(beta_reg(1.0, 1.0, 1.5).is_err());
    }
}
