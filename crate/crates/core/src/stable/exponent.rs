use num_complex::Complex64;
use std::sync::OnceLock;

use super::CharTriple;
use crate::error::Result;
use crate::quad;

const TOL: f64 = 1e-13;

/// `cos(y) - 1`, accurate for small `y`.
fn cosm1(y: f64) -> f64 {
    let h = (0.5 * y).sin();
    -2.0 * h * h
}

/// `sin(y) - y`, accurate for small `y`.
fn sinmy(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        let y2 = y * y;
        -y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0))
    } else {
        y.sin() - y
    }
}

/// `int_A^inf cos(zx) x^-b dx` (or the sine version) by repeated integration
/// by parts.
fn oscillatory_tail(z: f64, a: f64, b: f64, cosine: bool, depth: u32) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    let (s, c) = (z * a).sin_cos();
    let lead = a.powf(-b) / z;
    if cosine {
        -s * lead + b / z * oscillatory_tail(z, a, b + 1.0, false, depth - 1)
    } else {
        c * lead - b / z * oscillatory_tail(z, a, b + 1.0, true, depth - 1)
    }
}

/// For `z > 0`: `(int_0^inf (cos zx - 1) x^(-a-1) dx,
/// int_0^inf (sin zx - zx 1{x<=1}) x^(-a-1) dx)`.
fn half_line(alpha: f64, z: f64) -> Result<(f64, f64)> {
    // x = s^m removes the x^(1-alpha) endpoint behaviour on [0, 1]
    let m = 2.0 / (2.0 - alpha);
    let jac = |s: f64| {
        let x = s.powf(m);
        (x, x.powf(-alpha - 1.0) * m * s.powf(m - 1.0))
    };
    let near_r = quad::integrate(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            let (x, w) = jac(s);
            cosm1(z * x) * w
        },
        0.0,
        1.0,
        TOL,
        0.0,
    )?;
    let near_s = quad::integrate(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            let (x, w) = jac(s);
            sinmy(z * x) * w
        },
        0.0,
        1.0,
        TOL,
        0.0,
    )?;
    let far = (1000.0f64).max(1000.0 / z);
    let width = std::f64::consts::PI / z;
    let mut far_c = 0.0;
    let mut far_s = 0.0;
    let mut lo = 1.0;
    while lo < far {
        let hi = (lo + width).min(far);
        far_c += quad::integrate(|x| (z * x).cos() * x.powf(-alpha - 1.0), lo, hi, TOL * 1e-2, 0.0)?
            .value;
        far_s += quad::integrate(|x| (z * x).sin() * x.powf(-alpha - 1.0), lo, hi, TOL * 1e-2, 0.0)?
            .value;
        lo = hi;
    }
    far_c += oscillatory_tail(z, far, alpha + 1.0, true, 6);
    far_s += oscillatory_tail(z, far, alpha + 1.0, false, 6);
    Ok((near_r.value + far_c - 1.0 / alpha, near_s.value + far_s))
}

/// `int_0^inf (sin x - x 1{x<=1}) x^-2 dx`, evaluated by quadrature.
pub fn sine_constant() -> f64 {
    static S: OnceLock<f64> = OnceLock::new();
    *S.get_or_init(|| half_line(1.0, 1.0).expect("sine constant quadrature").1)
}

/// `i gamma1 z + int (e^{izx} - 1 - izx 1{|x|<=1}) nu_1(dx)`, by quadrature
/// over `nu_1(dx) = theta alpha (c+ 1{x>0} + c- 1{x<0}) |x|^(-alpha-1) dx`.
pub fn levy_exponent(z: f64, triple: &CharTriple) -> Result<Complex64> {
    if z == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (r, s) = half_line(triple.alpha, z.abs())?;
    let k = triple.theta * triple.alpha;
    let re = k * (triple.c_plus + triple.c_minus) * r;
    let im = triple.gamma1 * z + k * z.signum() * (triple.c_plus - triple.c_minus) * s;
    Ok(Complex64::new(re, im))
}
