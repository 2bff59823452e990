//! Adaptive Gauss-Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and error estimate on one interval.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(x))
        }
    };
    let fc = eval(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for (i, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let f1 = eval(c - h * x)?;
        let f2 = eval(c + h * x)?;
        k += w * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Integrates `f` over `[a, b]` until the estimated error falls below
/// `rel_tol` times the magnitude of the integral (or a tiny absolute floor).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_INTERVALS: usize = 4096;
    let (v, e) = kronrod(&f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        let scale: f64 = parts.iter().map(|p| p.2.abs()).sum();
        if error <= rel_tol * scale || error <= 1e-300 || parts.len() >= MAX_INTERVALS {
            return Ok(total);
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            return Ok(total);
        }
        let (v1, e1) = kronrod(&f, lo, mid)?;
        let (v2, e2) = kronrod(&f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|t| 0.2 * t * t, 0.0, 10.0, 1e-12).unwrap();
        assert!((v - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_functions() {
        let v = integrate(f64::exp, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-11);
        let v = integrate(|t| 1.0 / (1.0 + (-8.0 * (t - 5.0)).exp()), 0.0, 10.0, 1e-12).unwrap();
        assert!((v - 5.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(integrate(|t| 1.0 / t, 0.0, 1.0, 1e-10).is_err());
    }
}
