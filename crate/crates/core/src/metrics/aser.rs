use num_complex::Complex;

use super::AccessPreamble;
use crate::error::{DspError, Result};
use crate::Real;

/// Least-squares complex gain `ĥ` with `rx ≈ ĥ·known`.
pub fn least_squares_gain<T: Real>(rx: &[Complex<T>], known: &[Complex<T>]) -> Complex<f64> {
    let mut num = Complex::new(0.0, 0.0);
    let mut den = 0.0;
    for (r, p) in rx.iter().zip(known) {
        let r = Complex::new(r.re.as_f64(), r.im.as_f64());
        let p = Complex::new(p.re.as_f64(), p.im.as_f64());
        num += p.conj() * r;
        den += p.norm_sqr();
    }
    num / den
}

/// Fraction of preamble symbols decided wrongly after removing the
/// least-squares gain. Each symbol is equalized with the gain estimated from
/// the other preamble symbols, so its own noise does not pull it towards the
/// right decision.
pub fn compute_aser<T: Real>(rx: &[Complex<T>], preamble: &AccessPreamble<T>) -> Result<f64> {
    if rx.len() != preamble.len() {
        return Err(DspError::Length(format!("{} received symbols for a {}-symbol preamble", rx.len(), preamble.len())));
    }
    let to64 = |z: &Complex<T>| Complex::new(z.re.as_f64(), z.im.as_f64());
    let mut num = Complex::new(0.0, 0.0);
    let mut den = 0.0;
    for (r, p) in rx.iter().zip(preamble.symbols()) {
        num += to64(p).conj() * to64(r);
        den += to64(p).norm_sqr();
    }
    if !(num.norm() > 0.0 && num.norm().is_finite()) {
        return Ok(1.0);
    }
    let c = preamble.constellation();
    let errors = rx
        .iter()
        .zip(preamble.symbols())
        .filter(|(r, p)| {
            let (r, p64) = (to64(r), to64(p));
            let rest = den - p64.norm_sqr();
            let h = if rest > 0.0 { (num - p64.conj() * r) / rest } else { num / den };
            if !(h.norm() > 0.0) {
                return true;
            }
            let z = r / h;
            c.decide(Complex::new(T::lit(z.re), T::lit(z.im))) != c.decide(**p)
        })
        .count();
    Ok(errors as f64 / rx.len() as f64)
}

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form QPSK symbol error probability at a given Es/N0 (linear).
pub fn qpsk_ser(es_n0: f64) -> f64 {
    let q = q_function(es_n0.sqrt());
    2.0 * q - q * q
}
