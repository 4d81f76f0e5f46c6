//! Stationary regularly varying sequences with known tail quantities.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cadlag::fmt_f64;
use crate::error::{Error, Result};
use crate::quad;
use crate::seeds;
use crate::stable::ClusterDistribution;

/// Two-sided Pareto law: `P(|X| > x) = (x/scale)^-alpha` for `x >= scale`,
/// positive sign with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegVarSpec {
    pub alpha: f64,
    pub p: f64,
    pub scale: f64,
}

impl RegVarSpec {
    pub fn new(alpha: f64, p: f64, scale: f64) -> Result<Self> {
        let s = Self { alpha, p, scale };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidModel(format!(
                "alpha = {} outside (0, 2)",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidModel(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "scale = {} is not positive",
                self.scale
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// `a_n` solving `n P(|X| > a_n) = 1`.
    pub fn a_n(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(1.0 / self.alpha)
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        // 1 - U lies in (0, 1], keeping the magnitude finite
        let u: f64 = 1.0 - rng.random::<f64>();
        let mag = self.scale * u.powf(-1.0 / self.alpha);
        if rng.random::<f64>() < self.p {
            mag
        } else {
            -mag
        }
    }
}

/// GARCH(1,1) with standard normal noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchSpec {
    pub omega: f64,
    pub a1: f64,
    pub b1: f64,
}

impl GarchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::InvalidModel("garch omega must be positive".into()));
        }
        if !(self.a1 >= 0.0 && self.b1 >= 0.0) {
            return Err(Error::InvalidModel("garch a1, b1 must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        let s = (self.a1 + self.b1).min(0.99);
        (50.0 / (1.0 - s)).ceil().max(1000.0) as usize
    }

    pub fn degenerate(&self) -> bool {
        self.a1 == 0.0 && self.b1 == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Iid(RegVarSpec),
    Linear { coeffs: Vec<f64>, innovation: RegVarSpec },
    Garch(GarchSpec),
    SquaredGarch(GarchSpec),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Iid(rv) => rv.validate(),
            ModelSpec::Linear { coeffs, innovation } => {
                innovation.validate()?;
                if coeffs.is_empty() || coeffs.iter().all(|&c| c == 0.0) {
                    return Err(Error::InvalidModel(
                        "linear coefficients are all zero".into(),
                    ));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidModel("non-finite linear coefficient".into()));
                }
                Ok(())
            }
            ModelSpec::Garch(g) | ModelSpec::SquaredGarch(g) => g.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Iid(_) => "iid",
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Garch(_) => "garch",
            ModelSpec::SquaredGarch(_) => "squared_garch",
        }
    }

    /// Innovation law of the i.i.d. and linear variants.
    pub fn regvar(&self) -> Option<RegVarSpec> {
        match self {
            ModelSpec::Iid(rv) => Some(*rv),
            ModelSpec::Linear { innovation, .. } => Some(*innovation),
            _ => None,
        }
    }

    /// Tail index of the emitted first coordinate, when known analytically.
    pub fn tail_index(&self) -> Result<f64> {
        match self {
            ModelSpec::Iid(rv) | ModelSpec::Linear { innovation: rv, .. } => Ok(rv.alpha),
            ModelSpec::Garch(g) => Ok(2.0 * solve_garch_alpha(g, 1e-10)?),
            ModelSpec::SquaredGarch(g) => solve_garch_alpha(g, 1e-10),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<SeriesSample> {
        match self {
            ModelSpec::Iid(rv) => sample_iid(rv, n, seed),
            ModelSpec::Linear { coeffs, innovation } => sample_linear(coeffs, innovation, n, seed),
            ModelSpec::Garch(g) => sample_garch(g, n, seed),
            ModelSpec::SquaredGarch(g) => sample_squared_garch(g, n, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    /// First coordinate: `X_k`, or `X_k^2` for the squared GARCH series.
    pub values: Vec<f64>,
    /// Volatility `sigma_k^2` of the GARCH variants.
    pub sigma2: Option<Vec<f64>>,
    pub seed: u64,
    pub spec: ModelSpec,
    pub warnings: Vec<String>,
}

impl SeriesSample {
    /// CSV with header `i,x` or, for GARCH variants, `i,x,x2,sigma2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.sigma2 {
            None => {
                out.push_str("i,x\n");
                for (i, x) in self.values.iter().enumerate() {
                    out.push_str(&format!("{},{}\n", i + 1, fmt_f64(*x)));
                }
            }
            Some(s2) => {
                out.push_str("i,x,x2,sigma2\n");
                let squared = matches!(self.spec, ModelSpec::SquaredGarch(_));
                for (i, (x, s)) in self.values.iter().zip(s2).enumerate() {
                    let (xv, x2) = if squared { (x.sqrt(), *x) } else { (*x, x * x) };
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        i + 1,
                        fmt_f64(xv),
                        fmt_f64(x2),
                        fmt_f64(*s)
                    ));
                }
            }
        }
        out
    }
}

fn need_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be at least 1".into()));
    }
    Ok(())
}

pub fn sample_iid(spec: &RegVarSpec, n: usize, seed: u64) -> Result<SeriesSample> {
    need_n(n)?;
    spec.validate()?;
    let mut rng = seeds::rng(seed, "innovations");
    let values = (0..n).map(|_| spec.draw(&mut rng)).collect();
    Ok(SeriesSample {
        values,
        sigma2: None,
        seed,
        spec: ModelSpec::Iid(*spec),
        warnings: Vec::new(),
    })
}

/// `X_i = sum_j phi_j Z_{i-j}`; the first `m` innovations are burn-in.
pub fn sample_linear(
    coeffs: &[f64],
    innovation: &RegVarSpec,
    n: usize,
    seed: u64,
) -> Result<SeriesSample> {
    need_n(n)?;
    let spec = ModelSpec::Linear {
        coeffs: coeffs.to_vec(),
        innovation: *innovation,
    };
    spec.validate()?;
    let m = coeffs.len() - 1;
    let mut rng = seeds::rng(seed, "innovations");
    let z: Vec<f64> = (0..n + m).map(|_| innovation.draw(&mut rng)).collect();
    let values = (0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * z[i + m - j])
                .sum()
        })
        .collect();
    let mut warnings = Vec::new();
    if coeffs.iter().sum::<f64>() == 0.0 {
        warnings.push("coefficients sum to zero".into());
    }
    Ok(SeriesSample {
        values,
        sigma2: None,
        seed,
        spec,
        warnings,
    })
}

fn garch_path(g: &GarchSpec, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
    need_n(n)?;
    g.validate()?;
    let mut warnings = Vec::new();
    if g.degenerate() {
        warnings.push("a1 = b1 = 0: i.i.d. scaled noise".to_string());
    }
    let mut rng = seeds::rng(seed, "garch-noise");
    let burn = g.burn_in();
    let persistence = g.a1 + g.b1;
    let mut s2 = if persistence < 1.0 {
        g.omega / (1.0 - persistence)
    } else {
        g.omega
    };
    let mut x = Vec::with_capacity(n);
    let mut sig = Vec::with_capacity(n);
    let mut prev_z2 = 0.0;
    for k in 0..burn + n {
        if k > 0 {
            s2 = g.omega + (g.a1 * prev_z2 + g.b1) * s2;
        }
        let z: f64 = rng.sample(StandardNormal);
        prev_z2 = z * z;
        if k >= burn {
            x.push(s2.sqrt() * z);
            sig.push(s2);
        }
    }
    Ok((x, sig, warnings))
}

/// `sigma_k^2 = omega + (a1 Z_{k-1}^2 + b1) sigma_{k-1}^2`, `X_k = sigma_k Z_k`.
pub fn sample_garch(g: &GarchSpec, n: usize, seed: u64) -> Result<SeriesSample> {
    let (x, sig, warnings) = garch_path(g, n, seed)?;
    Ok(SeriesSample {
        values: x,
        sigma2: Some(sig),
        seed,
        spec: ModelSpec::Garch(*g),
        warnings,
    })
}

/// The nonnegative pair `(X_k^2, sigma_k^2)`.
pub fn sample_squared_garch(g: &GarchSpec, n: usize, seed: u64) -> Result<SeriesSample> {
    let (x, sig, warnings) = garch_path(g, n, seed)?;
    Ok(SeriesSample {
        values: x.iter().map(|v| v * v).collect(),
        sigma2: Some(sig),
        seed,
        spec: ModelSpec::SquaredGarch(*g),
        warnings,
    })
}

/// `sum_j |phi_j|^alpha`, the limit of `P(|X_0| > x) / P(|Z_0| > x)`.
pub fn linear_tail_ratio(coeffs: &[f64], alpha: f64) -> f64 {
    coeffs.iter().map(|c| c.abs().powf(alpha)).sum()
}

/// `max_j |phi_j|^alpha / sum_j |phi_j|^alpha`.
pub fn linear_extremal_index(coeffs: &[f64], alpha: f64) -> f64 {
    let top = coeffs.iter().map(|c| c.abs().powf(alpha)).fold(0.0, f64::max);
    top / linear_tail_ratio(coeffs, alpha)
}

/// Law of the anchor position `M`: `P(M = m) = |phi_m|^alpha / sum_j |phi_j|^alpha`.
pub fn linear_anchor_law(coeffs: &[f64], alpha: f64) -> Vec<f64> {
    let total = linear_tail_ratio(coeffs, alpha);
    coeffs.iter().map(|c| c.abs().powf(alpha) / total).collect()
}

pub fn linear_cluster_law(coeffs: &[f64], innovation: &RegVarSpec) -> ClusterDistribution {
    ClusterDistribution::Linear {
        coeffs: coeffs.to_vec(),
        alpha: innovation.alpha,
        p: innovation.p,
    }
}

/// `E[(a1 Z^2 + b1)^alpha]` for standard normal `Z`.
pub fn garch_moment(g: &GarchSpec, alpha: f64) -> Result<f64> {
    let norm = (2.0 / std::f64::consts::PI).sqrt();
    let f = |z: f64| (g.a1 * z * z + g.b1).powf(alpha) * (-0.5 * z * z).exp() * norm;
    // split at 1 so the z^(2 alpha) cusp at the origin stays in its own piece
    let head = quad::integrate(f, 0.0, 1.0, 1e-15, 1e-14)?;
    let tail = quad::integrate_to_infinity(f, 1.0, 1e-15, 1e-14)?;
    Ok(head.value + tail.value)
}

/// Positive root of `E[(a1 Z^2 + b1)^alpha] = 1` on `(0, 2]`, by bisection.
pub fn solve_garch_alpha(g: &GarchSpec, tol: f64) -> Result<f64> {
    g.validate()?;
    if g.b1 >= 1.0 {
        return Err(Error::NoSolution(
            "b1 >= 1: the moment function exceeds 1 for every alpha > 0".into(),
        ));
    }
    if g.degenerate() {
        return Err(Error::NoSolution("a1 = b1 = 0: moment function is 0".into()));
    }
    let h = |a: f64| garch_moment(g, a).map(|v| v - 1.0);
    // h(0) = 0 and h is convex: scan for the first point where h turns positive
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    let mut prev = 1e-3;
    if h(prev)? >= 0.0 {
        return Err(Error::NoSolution(
            "moment function does not dip below 1 near 0".into(),
        ));
    }
    for k in 1..=40 {
        let a = 0.05 * k as f64;
        if h(a)? >= 0.0 {
            lo = prev;
            hi = a;
            break;
        }
        prev = a;
    }
    if hi.is_nan() {
        return Err(Error::NoSolution(
            "no sign change of E[(a1 Z^2 + b1)^alpha] - 1 on (0, 2]".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = h(mid)?;
        if v.abs() <= tol || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pareto(alpha: f64, p: f64) -> RegVarSpec {
        RegVarSpec::new(alpha, p, 1.0).unwrap()
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(RegVarSpec::new(2.0, 0.5, 1.0).is_err());
        assert!(RegVarSpec::new(0.5, 1.5, 1.0).is_err());
        let bad = ModelSpec::Linear {
            coeffs: vec![0.0, 0.0],
            innovation: pareto(1.0, 0.5),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pareto_top_quantile_matches_n_to_one_over_alpha() {
        let n = 1_000_000;
        let s = sample_iid(&pareto(1.0, 1.0), n, 3).unwrap();
        assert!(s.values.iter().all(|&x| x >= 1.0));
        let mut v = s.values.clone();
        v.sort_by(f64::total_cmp);
        let q = v[n - 2];
        assert!(q > 0.3e6 && q < 3e6, "{q}");
    }

    #[test]
    fn order_zero_linear_is_iid() {
        let rv = pareto(1.2, 0.3);
        let a = sample_iid(&rv, 500, 11).unwrap();
        let b = sample_linear(&[1.0], &rv, 500, 11).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(sample_iid(&rv, 500, 11).unwrap(), a);
    }

    #[test]
    fn analytic_linear_quantities() {
        assert!((linear_tail_ratio(&[1.0, 0.5], 1.0) - 1.5).abs() < 1e-15);
        assert!((linear_tail_ratio(&[1.0, 1.0], 0.5) - 2.0).abs() < 1e-15);
        assert!((linear_extremal_index(&[1.0, 0.5], 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((linear_extremal_index(&[1.0, 1.0], 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(linear_extremal_index(&[1.0], 0.7), 1.0);
        let m = linear_anchor_law(&[1.0, 0.5], 1.0);
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-15 && (m[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn garch_degenerate_and_stationary_mean() {
        let g0 = GarchSpec { omega: 2.0, a1: 0.0, b1: 0.0 };
        let s = sample_garch(&g0, 100, 5).unwrap();
        assert!(s.sigma2.as_ref().unwrap().iter().all(|&v| v == 2.0));
        assert!(!s.warnings.is_empty());
        let sq = sample_squared_garch(&g0, 100, 5).unwrap();
        for (x2, x) in sq.values.iter().zip(&s.values) {
            assert_eq!(*x2, x * x);
        }
        let g = GarchSpec { omega: 1.0, a1: 0.5, b1: 0.3 };
        let s = sample_garch(&g, 400_000, 9).unwrap();
        let mean = s.sigma2.unwrap().iter().sum::<f64>() / 400_000.0;
        assert!((mean - 5.0).abs() < 0.3, "{mean}");
    }

    #[test]
    fn garch_moment_equation() {
        let a = solve_garch_alpha(&GarchSpec { omega: 1.0, a1: 1.0, b1: 0.0 }, 1e-10).unwrap();
        assert!((a - 1.0).abs() < 1e-8, "{a}");
        let g = GarchSpec { omega: 1.0, a1: 0.5, b1: 0.3 };
        let a = solve_garch_alpha(&g, 1e-10).unwrap();
        assert!(a > 1.0 && a < 2.0);
        assert!((garch_moment(&g, a).unwrap() - 1.0).abs() <= 1e-6);
        // a1 Z^2 moments: E Z^2 = 1, E Z^4 = 3
        let m2 = garch_moment(&GarchSpec { omega: 1.0, a1: 1.0, b1: 0.0 }, 2.0).unwrap();
        assert!((m2 - 3.0).abs() < 1e-12);
        assert!(solve_garch_alpha(&GarchSpec { omega: 1.0, a1: 0.2, b1: 1.0 }, 1e-8).is_err());
    }

    #[test]
    fn csv_layouts() {
        let s = sample_iid(&pareto(1.0, 1.0), 3, 1).unwrap();
        assert!(s.to_csv().starts_with("i,x\n1,"));
        let g = GarchSpec { omega: 1.0, a1: 0.1, b1: 0.1 };
        let csv = sample_garch(&g, 2, 1).unwrap().to_csv();
        assert!(csv.starts_with("i,x,x2,sigma2\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
