//! Partial-sum functionals: the joint process `L_n`, its truncation, the
//! centering constants and the self-normalized path.

use crate::cadlag::{fmt_f64, CadlagPath};
use crate::error::{Error, Result};
use crate::inference::BlockingScheme;
use crate::models::{linear_tail_ratio, ModelSpec};
use crate::seeds;
use crate::stable::Regime;

/// Atoms `(i/n, X_i/a_n)` with nonzero marks.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    pub n: usize,
    pub atoms: Vec<(f64, f64)>,
}

pub fn build_point_measure(data: &[f64], a_n: f64) -> Result<PointMeasure> {
    if !(a_n > 0.0) {
        return Err(Error::Domain(format!("a_n = {a_n} must be positive")));
    }
    let n = data.len();
    let atoms = data
        .iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, x)| ((i + 1) as f64 / n as f64, x / a_n))
        .collect();
    Ok(PointMeasure { n, atoms })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteringConstants {
    pub b1n: f64,
    pub b2n: f64,
    pub regime: Regime,
    /// Monte Carlo standard errors of `(b1n, b2n)`, when not closed form.
    pub se: Option<(f64, f64)>,
}

impl CenteringConstants {
    pub fn zero(alpha: f64) -> Self {
        Self {
            b1n: 0.0,
            b2n: 0.0,
            regime: Regime::of(alpha),
            se: None,
        }
    }
}

/// `E[(X/a_n) 1{|X| <= a_n}]` and `E[(X/a_n)^2 1{|X| <= a_n}]` for a Pareto
/// law with the given scale.
fn pareto_truncated_moments(alpha: f64, p: f64, scale: f64, a_n: f64) -> (f64, f64) {
    if a_n <= scale {
        return (0.0, 0.0);
    }
    let k = alpha * scale.powf(alpha);
    let first = if alpha == 1.0 {
        k * (a_n / scale).ln()
    } else {
        k * (a_n.powf(1.0 - alpha) - scale.powf(1.0 - alpha)) / (1.0 - alpha)
    };
    let second = k * (a_n.powf(2.0 - alpha) - scale.powf(2.0 - alpha)) / (2.0 - alpha);
    ((2.0 * p - 1.0) * first / a_n, second / (a_n * a_n))
}

/// Monte Carlo settings for models without closed-form truncated moments.
#[derive(Debug, Clone, Copy)]
pub struct CenteringMc {
    pub draws: usize,
    pub seed: u64,
    /// Largest acceptable standard error of either constant.
    pub se_tol: f64,
}

/// Zero for `alpha < 1`; truncated first and second moments otherwise:
/// closed form for the i.i.d. Pareto model, mean minus the asymptotic tail
/// term for linear models with `alpha > 1`, and Monte Carlo over a long
/// stationary sample for the others.
pub fn centering_constants(
    spec: &ModelSpec,
    a_n: f64,
    mc: &CenteringMc,
) -> Result<CenteringConstants> {
    let alpha = spec.tail_index()?;
    if alpha < 1.0 {
        return Ok(CenteringConstants::zero(alpha));
    }
    if let ModelSpec::Iid(rv) = spec {
        let (b1n, b2n) = pareto_truncated_moments(rv.alpha, rv.p, rv.scale, a_n);
        return Ok(CenteringConstants {
            b1n,
            b2n,
            regime: Regime::High,
            se: None,
        });
    }
    if let (ModelSpec::Linear { coeffs, innovation: rv }, true) = (spec, alpha > 1.0) {
        // exact mean minus the regularly varying tail contribution
        let ratio = linear_tail_ratio(coeffs, alpha);
        let n_eff = (a_n / rv.scale).powf(alpha) / ratio;
        let mean_z = (2.0 * rv.p - 1.0) * rv.scale * alpha / (alpha - 1.0);
        let mean_x = coeffs.iter().sum::<f64>() * mean_z;
        let signed: f64 = coeffs
            .iter()
            .map(|c| {
                let w = c.abs().powf(alpha);
                if *c > 0.0 {
                    (rv.p - rv.q()) * w
                } else {
                    (rv.q() - rv.p) * w
                }
            })
            .sum();
        return Ok(CenteringConstants {
            b1n: mean_x / a_n - signed / ratio * alpha / ((alpha - 1.0) * n_eff),
            b2n: alpha / ((2.0 - alpha) * n_eff),
            regime: Regime::High,
            se: None,
        });
    }
    let sample = spec.sample(mc.draws, seeds::derive(mc.seed, "centering"))?;
    let n = sample.values.len() as f64;
    let mut m = [0.0f64; 4];
    for x in &sample.values {
        let y = x / a_n;
        let (a, b) = if y.abs() <= 1.0 { (y, y * y) } else { (0.0, 0.0) };
        m[0] += a;
        m[1] += a * a;
        m[2] += b;
        m[3] += b * b;
    }
    let (b1n, b2n) = (m[0] / n, m[2] / n);
    let se1 = ((m[1] / n - b1n * b1n).max(0.0) / n).sqrt();
    let se2 = ((m[3] / n - b2n * b2n).max(0.0) / n).sqrt();
    if se1.max(se2) > mc.se_tol {
        return Err(Error::Numerical(format!(
            "centering standard error {} above {}; increase the Monte Carlo sample",
            se1.max(se2),
            mc.se_tol
        )));
    }
    Ok(CenteringConstants {
        b1n,
        b2n,
        regime: Regime::High,
        se: Some((se1, se2)),
    })
}

/// The pair `(L_1n, L_2n)` as step paths on `{k/n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPathPair {
    pub l1n: CadlagPath,
    pub l2n: CadlagPath,
    pub n: usize,
    pub a_n: f64,
    pub centered: bool,
    pub u: Option<f64>,
    pub b1n: f64,
    pub b2n: f64,
}

impl JointPathPair {
    /// Metadata line, `t,l1,l2` header, then rows on the merged grid.
    pub fn to_csv(&self) -> String {
        let u = self.u.map_or("none".to_string(), fmt_f64);
        let mut out = format!(
            "# n={} an={} u={} b1n={} b2n={}\n# kind={} d=2\nt,l1,l2\n",
            self.n,
            fmt_f64(self.a_n),
            u,
            fmt_f64(self.b1n),
            fmt_f64(self.b2n),
            self.l1n.kind().tag()
        );
        let mut ts: Vec<f64> = self.l1n.times().iter().chain(self.l2n.times()).copied().collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        for t in ts {
            let a = self.l1n.eval(t).map(|v| v[0]).unwrap_or(f64::NAN);
            let b = self.l2n.eval(t).map(|v| v[0]).unwrap_or(f64::NAN);
            out.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(a), fmt_f64(b)));
        }
        out
    }

    /// Both coordinates as one two-dimensional path.
    pub fn joint(&self) -> Result<CadlagPath> {
        if self.l1n.times() != self.l2n.times() {
            return Err(Error::Precondition("coordinates do not share breakpoints".into()));
        }
        let a = self.l1n.coordinate_values(0);
        let b = self.l2n.coordinate_values(0);
        let values = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
        CadlagPath::new(self.l1n.kind(), 2, self.l1n.times().to_vec(), values)
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

/// `L_1n(k/n) = sum_{i<=k} X_i/a_n - k b1n`, `L_2n(k/n) = sum_{i<=k} X_i^2/a_n^2 - k b2n`.
pub fn build_ln(data: &[f64], a_n: f64, constants: &CenteringConstants) -> Result<JointPathPair> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if !(a_n > 0.0) {
        return Err(Error::Domain(format!("a_n = {a_n} must be positive")));
    }
    let n = data.len();
    let mut l1 = Vec::with_capacity(n + 1);
    let mut l2 = Vec::with_capacity(n + 1);
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    l1.push(0.0);
    l2.push(0.0);
    for (k, x) in data.iter().enumerate() {
        let y = x / a_n;
        s1 += y;
        s2 += y * y;
        let kk = (k + 1) as f64;
        l1.push(s1 - kk * constants.b1n);
        l2.push(s2 - kk * constants.b2n);
    }
    let times = grid(n);
    Ok(JointPathPair {
        l1n: CadlagPath::step(times.clone(), l1)?,
        l2n: CadlagPath::step(times, l2)?,
        n,
        a_n,
        centered: constants.b1n != 0.0 || constants.b2n != 0.0,
        u: None,
        b1n: constants.b1n,
        b2n: constants.b2n,
    })
}

/// Sums of atoms with `|mark| > u`, and of their squares.
pub fn truncate_ln(pm: &PointMeasure, u: f64) -> Result<JointPathPair> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("truncation level {u} must be positive")));
    }
    let n = pm.n.max(1);
    let mut inc1 = vec![0.0f64; n + 1];
    let mut inc2 = vec![0.0f64; n + 1];
    for &(t, x) in &pm.atoms {
        if x.abs() > u {
            let k = ((t * n as f64).round() as usize).min(n);
            inc1[k] += x;
            inc2[k] += x * x;
        }
    }
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    let mut l1 = Vec::with_capacity(n + 1);
    let mut l2 = Vec::with_capacity(n + 1);
    for k in 0..=n {
        s1 += inc1[k];
        s2 += inc2[k];
        l1.push(s1);
        l2.push(s2);
    }
    let times = grid(n);
    Ok(JointPathPair {
        l1n: CadlagPath::step(times.clone(), l1)?,
        l2n: CadlagPath::step(times, l2)?,
        n: pm.n,
        a_n: f64::NAN,
        centered: false,
        u: Some(u),
        b1n: 0.0,
        b2n: 0.0,
    })
}

/// `V_n = (sum X_k^2)^(1/2)`.
fn self_normalizer(data: &[f64]) -> Result<f64> {
    let v = data.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("self-normalizer V_n = {v} is not positive")));
    }
    Ok(v)
}

/// Step path `t -> S_floor(nt) / V_n`.
pub fn self_normalized_path(data: &[f64]) -> Result<CadlagPath> {
    let v = self_normalizer(data)?;
    let mut vals = Vec::with_capacity(data.len() + 1);
    let mut s = 0.0;
    vals.push(0.0);
    for x in data {
        s += x;
        vals.push(s / v);
    }
    CadlagPath::step(grid(data.len()), vals)
}

/// `S_floor(nt) / V_n` at each `t` of the grid.
pub fn self_normalized_at(data: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    let v = self_normalizer(data)?;
    let n = data.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    prefix.push(0.0);
    for x in data {
        s += x;
        prefix.push(s);
    }
    t_grid
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
            }
            Ok(prefix[floor_index(t, n)] / v)
        })
        .collect()
}

/// `floor(n t)` robust to `t = k/n` rounding.
pub fn floor_index(t: f64, n: usize) -> usize {
    let x = t * n as f64;
    let k = (x + 1e-9).floor();
    (k.max(0.0) as usize).min(n)
}

/// Path sampled at block ends: `t -> S_{r floor(k t)}` on the block grid,
/// followed by the final value when `n` is not a multiple of `r`.
pub fn collapse_clusters(path: &CadlagPath, scheme: &BlockingScheme) -> Result<CadlagPath> {
    let n = path.len().saturating_sub(1);
    if scheme.r > n.max(1) {
        return Err(Error::Precondition(format!(
            "block length {} exceeds path length {n}",
            scheme.r
        )));
    }
    if path.dim() != 1 {
        return Err(Error::Unsupported("collapse_clusters needs a scalar path".into()));
    }
    let times = path.times();
    let vals = path.coordinate_values(0);
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    let mut i = 0;
    while i <= n {
        ts.push(times[i]);
        vs.push(vals[i]);
        i += scheme.r;
    }
    if *ts.last().unwrap() < times[n] {
        ts.push(times[n]);
        vs.push(vals[n]);
    }
    CadlagPath::step(ts, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::{j1_distance, m1_distance, uniform_distance};
    use crate::models::{sample_iid, sample_linear, RegVarSpec};

    #[test]
    fn point_measure_examples() {
        let pm = build_point_measure(&[1.0, 0.0, -2.0, 3.0], 1.0).unwrap();
        assert_eq!(pm.atoms, vec![(0.25, 1.0), (0.75, -2.0), (1.0, 3.0)]);
        assert!(build_point_measure(&[0.0; 3], 1.0).unwrap().atoms.is_empty());
        let a = build_point_measure(&[1.0, -2.0], 1.0).unwrap();
        let b = build_point_measure(&[4.0, -8.0], 4.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centering_regimes_and_closed_form() {
        let mc = CenteringMc { draws: 10_000, seed: 1, se_tol: 1.0 };
        let low = ModelSpec::Iid(RegVarSpec::new(0.8, 1.0, 1.0).unwrap());
        let c = centering_constants(&low, 10.0, &mc).unwrap();
        assert_eq!((c.b1n, c.b2n), (0.0, 0.0));
        let rv = RegVarSpec::new(1.5, 1.0, 1.0).unwrap();
        let an = 1e4f64.powf(1.0 / 1.5);
        let c = centering_constants(&ModelSpec::Iid(rv), an, &mc).unwrap();
        let want = 1.5 / 0.5 * (1.0 - an.powf(-0.5)) / an;
        assert!((c.b1n - want).abs() < 1e-15 * want);
        // Monte Carlo cross-check of the truncated moment
        let x = sample_iid(&rv, 2_000_000, 3).unwrap().values;
        let mc_b1: f64 = x.iter().map(|v| if v.abs() <= an { v / an } else { 0.0 }).sum::<f64>()
            / x.len() as f64;
        assert!((mc_b1 - want).abs() < 0.02 * want, "{mc_b1} vs {want}");
        let sym = ModelSpec::Iid(RegVarSpec::new(1.5, 0.5, 1.0).unwrap());
        assert_eq!(centering_constants(&sym, an, &mc).unwrap().b1n, 0.0);
        // a one-term linear model is the i.i.d. model
        let one = ModelSpec::Linear { coeffs: vec![1.0], innovation: RegVarSpec::new(1.5, 0.7, 2.0).unwrap() };
        let iid = ModelSpec::Iid(RegVarSpec::new(1.5, 0.7, 2.0).unwrap());
        let a = centering_constants(&one, 2.0 * an, &mc).unwrap();
        let b = centering_constants(&iid, 2.0 * an, &mc).unwrap();
        assert!((a.b1n - b.b1n).abs() < 1e-12 * b.b1n.abs());
        // the tail term is asymptotic for longer filters: Monte Carlo agreement
        let lin = ModelSpec::Linear { coeffs: vec![1.0, 0.5], innovation: rv };
        let c = centering_constants(&lin, an, &mc).unwrap();
        let x = lin.sample(2_000_000, 5).unwrap().values;
        let mc_b1: f64 = x.iter().map(|v| if v.abs() <= an { v / an } else { 0.0 }).sum::<f64>()
            / x.len() as f64;
        assert!((mc_b1 - c.b1n).abs() < 0.03 * c.b1n, "{mc_b1} vs {}", c.b1n);
        let garch = ModelSpec::SquaredGarch(crate::models::GarchSpec { omega: 1.0, a1: 0.5, b1: 0.3 });
        let c = centering_constants(&garch, 30.0, &CenteringMc { draws: 100_000, seed: 2, se_tol: 1.0 })
            .unwrap();
        assert!(c.se.is_some());
        let tight = CenteringMc { draws: 1000, seed: 2, se_tol: 1e-12 };
        assert!(centering_constants(&garch, 30.0, &tight).is_err());
    }

    #[test]
    fn ln_examples() {
        let pair = build_ln(&[1.0, -1.0], 1.0, &CenteringConstants::zero(0.5)).unwrap();
        assert_eq!(pair.l1n.coordinate_values(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(pair.l2n.coordinate_values(0), vec![0.0, 1.0, 2.0]);
        assert!(pair.to_csv().starts_with("# n=2 an="));
        assert!(pair.to_csv().contains("\nt,l1,l2\n"));
        let back = CadlagPath::from_csv(&pair.to_csv()).unwrap();
        assert_eq!(back, pair.joint().unwrap());
    }

    #[test]
    fn truncation_examples() {
        let data = [1.0, -2.0, 3.0];
        let pm = build_point_measure(&data, 1.0).unwrap();
        let t = truncate_ln(&pm, 1.5).unwrap();
        assert_eq!(t.l1n.coordinate_values(0), vec![0.0, 0.0, -2.0, 1.0]);
        assert_eq!(t.l2n.coordinate_values(0), vec![0.0, 0.0, 4.0, 13.0]);
        let full = build_ln(&data, 1.0, &CenteringConstants::zero(0.5)).unwrap();
        let low = truncate_ln(&pm, 0.5).unwrap();
        assert_eq!(low.l1n, full.l1n);
        assert_eq!(low.l2n, full.l2n);
        let none = truncate_ln(&pm, 10.0).unwrap();
        assert_eq!(none.l1n.max_abs(), 0.0);
    }

    #[test]
    fn truncation_converges_monotonically() {
        let x = sample_iid(&RegVarSpec::new(0.7, 0.5, 1.0).unwrap(), 500, 4).unwrap().values;
        let pm = build_point_measure(&x, 500f64.powf(1.0 / 0.7)).unwrap();
        let full = build_ln(&x, 500f64.powf(1.0 / 0.7), &CenteringConstants::zero(0.7)).unwrap();
        let mut mags: Vec<f64> = pm.atoms.iter().map(|a| a.1.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let mut prev = f64::INFINITY;
        for u in mags.iter().step_by(50) {
            let d = uniform_distance(&truncate_ln(&pm, *u).unwrap().l2n, &full.l2n).unwrap();
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn self_normalized_examples() {
        let p = self_normalized_path(&[-3.0]).unwrap();
        assert_eq!(p.coordinate_values(0), vec![0.0, -1.0]);
        assert!(self_normalized_path(&[0.0, 0.0]).is_err());
        let x = sample_iid(&RegVarSpec::new(1.2, 0.5, 1.0).unwrap(), 300, 5).unwrap().values;
        let base = self_normalized_path(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * 1024.0).collect();
        assert_eq!(self_normalized_path(&scaled).unwrap(), base);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(self_normalized_path(&neg).unwrap(), base.scaled(-1.0));
        assert!(base.max_abs() <= (300f64).sqrt());
        let at = self_normalized_at(&x, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(at[2], base.eval(1.0).unwrap()[0]);
        assert_eq!(at[1], base.eval(0.5).unwrap()[0]);
    }

    #[test]
    fn collapse_examples() {
        let x = sample_linear(&[1.0, 1.0], &RegVarSpec::new(0.8, 1.0, 1.0).unwrap(), 400, 2)
            .unwrap()
            .values;
        let path = self_normalized_path(&x).unwrap();
        let id = collapse_clusters(&path, &BlockingScheme::new(400, 1).unwrap()).unwrap();
        assert_eq!(id, path);
        let two = collapse_clusters(&path, &BlockingScheme::new(400, 400).unwrap()).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two.coordinate_values(0)[1], path.coordinate_values(0)[400]);
        let c = collapse_clusters(&path, &BlockingScheme::new(400, 20).unwrap()).unwrap();
        let m1 = m1_distance(&path, &c, 8 * 400).unwrap();
        let j1 = j1_distance(&path, &c).unwrap();
        assert!(m1 <= j1 + 1e-9);
        assert!(collapse_clusters(&path, &BlockingScheme { n: 900, r: 900, k: 1 }).is_err());
    }
}
