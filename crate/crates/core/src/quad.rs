//! Adaptive Gauss–Kronrod (7/15) quadrature.

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
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over a finite `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let mut parts = vec![(a, b, kronrod(&f, a, b))];
    for _ in 0..20_000 {
        let value: f64 = parts.iter().map(|p| p.2 .0).sum();
        let error: f64 = parts.iter().map(|p| p.2 .1).sum();
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand not finite on [{a}, {b}]"
            )));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature { value, error });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        parts.push((lo, mid, kronrod(&f, lo, mid)));
        parts.push((mid, hi, kronrod(&f, mid, hi)));
    }
    let value: f64 = parts.iter().map(|p| p.2 .0).sum();
    let error: f64 = parts.iter().map(|p| p.2 .1).sum();
    if error <= 1e3 * abs_tol.max(rel_tol * value.abs()) {
        return Ok(Quadrature { value, error });
    }
    Err(Error::Numerical(format!(
        "quadrature did not converge: estimate {value}, residual {error}"
    )))
}

/// Integrates over `[a, inf)` through the map `x = a + s/(1-s)`.
pub fn integrate_to_infinity(
    f: impl Fn(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    integrate(
        |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - s;
            f(a + s / d) / (d * d)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-13, 0.0).unwrap();
        assert!((q.value - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-12);
        let q = integrate(f64::exp, 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert!((q.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_and_infinite_range() {
        // x^{-1/2} on (0,1]
        let q = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-9, 0.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-7, "{}", q.value);
        let q = integrate_to_infinity(|x| (-x * x / 2.0).exp(), 0.0, 1e-13, 0.0).unwrap();
        assert!((q.value - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-11);
    }
}
