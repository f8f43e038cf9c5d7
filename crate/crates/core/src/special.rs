//! Log-space helpers for Poisson-like weights.

use statrs::function::factorial::{ln_binomial, ln_factorial};

/// `ln(x^k / k!)`, with `0^0 = 1`. Negative `k` gives `-inf`.
pub fn ln_pow_over_factorial(x: f64, k: i64) -> f64 {
    if k < 0 {
        return f64::NEG_INFINITY;
    }
    if k == 0 {
        return 0.0;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    k as f64 * x.ln() - ln_factorial(k as u64)
}

/// `exp(ln_prefactor) · x^k / k!`, zero for negative `k`.
pub fn pow_over_factorial(x: f64, k: i64, ln_prefactor: f64) -> f64 {
    let l = ln_pow_over_factorial(x, k);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        (ln_prefactor + l).exp()
    }
}

/// `C(m, n) η^n (1-η)^(m-n)` with exact handling of `η ∈ {0, 1}`.
pub fn binomial_weight(m: u64, n: u64, eta: f64) -> f64 {
    if n > m {
        return 0.0;
    }
    if eta == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if eta == 1.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    (ln_binomial(m, n) + n as f64 * eta.ln() + (m - n) as f64 * (1.0 - eta).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_values() {
        assert_relative_eq!(pow_over_factorial(3.0, 2, 0.0), 4.5);
        assert_eq!(pow_over_factorial(3.0, -1, 0.0), 0.0);
        assert_eq!(pow_over_factorial(0.0, 0, 0.0), 1.0);
        assert_eq!(pow_over_factorial(0.0, 3, 0.0), 0.0);
        assert_relative_eq!(pow_over_factorial(2.0, 3, -2.0), 8.0 / 6.0 * (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn large_k_does_not_overflow() {
        let v = pow_over_factorial(200.0, 200, -200.0);
        assert!(v.is_finite() && v > 0.0);
        // Poisson mode height ~ 1/sqrt(2π λ)
        assert_relative_eq!(v, 1.0 / (2.0 * std::f64::consts::PI * 200.0).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn binomial_edges() {
        assert_relative_eq!(binomial_weight(4, 2, 0.5), 0.375, max_relative = 1e-14);
        assert_eq!(binomial_weight(4, 0, 0.0), 1.0);
        assert_eq!(binomial_weight(4, 4, 1.0), 1.0);
        assert_eq!(binomial_weight(4, 3, 1.0), 0.0);
        assert_eq!(binomial_weight(3, 4, 0.5), 0.0);
    }
}
