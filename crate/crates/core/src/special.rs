//! Special functions used by the closed-form Lévy measure moments.

use statrs::function::gamma::{gamma, gamma_ur, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_int_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // modified Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Upper incomplete gamma `Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt` for any real
/// `a` and `x > 0` (`x = 0` allowed when `a > 0`).
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if a > 0.0 {
        if x <= 0.0 {
            return gamma(a);
        }
        return gamma_ur(a, x) * gamma(a);
    }
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if a == 0.0 {
        return exp_int_e1(x);
    }
    // Γ(a, x) = (Γ(a+1, x) − x^a e^{-x}) / a, recursing upward to a > 0 or a = 0
    let up = upper_incomplete_gamma(a + 1.0, x);
    (up - (a * x.ln() - x).exp()) / a
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// `B(a, b) = Γ(a)Γ(b)/Γ(a+b)` evaluated through log-gamma.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}
