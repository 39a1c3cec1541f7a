//! Bessel functions of the first kind for real order `ν ≥ 0` and their zeros.

use std::sync::OnceLock;

use crate::quadrature::ln_gamma;
use crate::{Error, Result};

/// Largest order and zero index covered by [`bessel_zero`].
pub const MAX_ORDER: f64 = 50.0;
pub const MAX_INDEX: usize = 50;

const SERIES_LIMIT: f64 = 12.0;
const RESCALE: f64 = 1e250;

/// `J_ν(x) / x^p` for `x ≥ 0`, `0 ≤ p ≤ ν`. At `x = 0` returns the limit.
pub fn bessel_j_scaled(nu: f64, x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return if nu == p {
            (-(nu * std::f64::consts::LN_2) - ln_gamma(nu + 1.0)).exp()
        } else {
            0.0
        };
    }
    if x <= SERIES_LIMIT || 0.25 * x * x <= nu + 1.0 {
        series(nu, x, p)
    } else {
        miller(nu, x) / x.powf(p)
    }
}

/// `J_ν(x)` for `ν ≥ 0`, `x ≥ 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    bessel_j_scaled(nu, x, 0.0)
}

// Ascending series; the prefactor (x/2)^ν / x^p is formed in log space.
fn series(nu: f64, x: f64, p: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let k = k as f64;
        term *= -q / (k * (k + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    let log_pref = nu * (0.5 * x).ln() - p * x.ln() - ln_gamma(nu + 1.0);
    sum * log_pref.exp()
}

// Miller backward recurrence from a high order, normalized with
// (x/2)^ν0 / Γ(ν0+1) = Σ_k w_k J_{ν0+2k}(x), where ν0 = frac(ν).
fn miller(nu: f64, x: f64) -> f64 {
    let n_target = nu.floor() as usize;
    let nu0 = nu - nu.floor();
    let top = (x.max(nu) + 30.0 + 2.0 * x.sqrt() * 3.0).ceil() as usize + 20;
    let top = top + (top % 2);
    let mut f_next = 0.0f64;
    let mut f = 1e-300f64;
    let mut target = 0.0f64;
    let mut norm = 0.0f64;
    // Weights w_k for k = n/2 at even n, computed forward then used backward.
    let half = top / 2;
    let mut weights = Vec::with_capacity(half + 1);
    let mut g = 1.0f64;
    weights.push(1.0);
    for k in 1..=half {
        if k > 1 {
            g *= (nu0 + (k - 1) as f64) / k as f64;
        }
        weights.push((nu0 + 2.0 * k as f64) * g);
    }
    for n in (0..=top).rev() {
        // f holds the unnormalized value at order nu0 + n.
        if n == n_target {
            target = f;
        }
        if n % 2 == 0 {
            norm += weights[n / 2] * f;
        }
        if n == 0 {
            break;
        }
        let order = nu0 + n as f64;
        let f_prev = 2.0 * order / x * f - f_next;
        f_next = f;
        f = f_prev;
        if f.abs() > RESCALE {
            f /= RESCALE;
            f_next /= RESCALE;
            target /= RESCALE;
            norm /= RESCALE;
        }
    }
    let lhs = (nu0 * (0.5 * x).ln() - ln_gamma(nu0 + 1.0)).exp();
    target * lhs / norm
}

/// `m`-th positive zero of `J_ν`, for `0 ≤ ν ≤ 50`, `1 ≤ m ≤ 50`.
pub fn bessel_zero(nu: f64, m: usize) -> Result<f64> {
    if !(0.0..=MAX_ORDER).contains(&nu) || m == 0 || m > MAX_INDEX {
        return Err(Error::BesselRange { order: nu, index: m });
    }
    let twice = 2.0 * nu;
    if twice.fract() == 0.0 {
        let table = cached_zeros(twice as usize);
        return Ok(table[m - 1]);
    }
    Ok(compute_zeros(nu, m)[m - 1])
}

fn cached_zeros(twice_order: usize) -> &'static [f64] {
    const SLOTS: usize = 2 * MAX_ORDER as usize + 1;
    static TABLE: [OnceLock<Vec<f64>>; SLOTS] = [const { OnceLock::new() }; SLOTS];
    TABLE[twice_order].get_or_init(|| compute_zeros(twice_order as f64 / 2.0, MAX_INDEX))
}

// Sign changes are bracketed by a scan starting at x = ν (the first zero
// exceeds ν) with step 1/4, well below the zero spacing (> π/2 here), and
// refined by bisection to machine resolution.
fn compute_zeros(nu: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let step = 0.25;
    let mut a = nu.max(step);
    let mut fa = bessel_j(nu, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j(nu, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi) = (a, b);
            let mut flo = fa;
            while hi - lo > 4.0 * f64::EPSILON * hi {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_j(nu, mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// McMahon's large-zero expansion, used as a cross-check of the scan.
pub fn mcmahon(nu: f64, m: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let beta = (m as f64 + 0.5 * nu - 0.25) * std::f64::consts::PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
        - 32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) / (15.0 * e.powi(5))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values frozen from an arbitrary-precision library.
    const J_VALUES: [(f64, f64, f64); 8] = [
        (0.0, 1.0, 0.765_197_686_557_966_6),
        (1.0, 2.5, 0.497_094_102_464_274_4),
        (0.5, 3.0, 0.065_008_182_877_375_8),
        (0.0, 30.0, -0.086_367_983_581_040_2),
        (3.0, 25.0, 0.108_343_081_061_508_9),
        (10.5, 40.0, 0.066_231_235_511_012_01),
        (50.0, 60.0, -0.137_982_731_485_352_1),
        (20.0, 5.0, 2.770_330_052_128_941_7e-11),
    ];

    #[test]
    fn values_match_reference() {
        for (nu, x, want) in J_VALUES {
            let got = bessel_j(nu, x);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1e-3), "J_{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn half_order_is_elementary() {
        for &x in &[0.3, 2.0, 7.5, 13.0, 40.0, 120.0] {
            let want = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn series_and_recurrence_agree_near_switch() {
        for nu in [0.0, 1.0, 2.5, 7.0] {
            for x in [9.0, 11.0, 12.0] {
                let a = series(nu, x, 0.0);
                let b = miller(nu, x);
                assert!((a - b).abs() < 1e-11, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_examples() {
        assert!((bessel_zero(0.0, 1).unwrap() - 2.404_825_557_695_773).abs() < 1e-10);
        assert!((bessel_zero(1.0, 1).unwrap() - 3.831_705_970_207_512).abs() < 1e-10);
        assert!((bessel_zero(0.0, 2).unwrap() - 5.520_078_110_286_311).abs() < 1e-10);
        assert!((bessel_zero(0.5, 3).unwrap() - 3.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!((bessel_zero(50.0, 50).unwrap() - 229.362_879_668_553_4).abs() < 1e-8);
    }

    #[test]
    fn zeros_vanish_and_agree_with_mcmahon() {
        for nu in [0.0, 1.0, 1.5, 4.0, 12.0] {
            for m in [5, 20, 50] {
                let z = bessel_zero(nu, m).unwrap();
                assert!(bessel_j(nu, z).abs() < 1e-12);
                assert!((z - mcmahon(nu, m)).abs() < 1e-3 * z, "nu={nu} m={m}");
            }
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert!(bessel_zero(50.5, 1).is_err());
        assert!(bessel_zero(-0.1, 1).is_err());
        assert!(bessel_zero(1.0, 0).is_err());
        assert!(bessel_zero(1.0, 51).is_err());
    }

    #[test]
    fn interlacing_holds_for_tabulated_orders() {
        for l in 0..50 {
            let a = cached_zeros(2 * l);
            let b = cached_zeros(2 * (l + 1));
            for m in 0..49 {
                assert!(a[m] < b[m] && b[m] < a[m + 1], "l={l} m={m}");
            }
        }
    }
}
