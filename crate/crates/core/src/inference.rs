//! Tail estimators and empirical surrogates for the limit-theorem conditions.

use crate::cadlag::fmt_f64;
use crate::error::{Error, Result};

/// Blocks of length `r` covering the first `k * r` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingScheme {
    pub n: usize,
    pub r: usize,
    pub k: usize,
}

impl BlockingScheme {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if r == 0 || r > n {
            return Err(Error::Precondition(format!(
                "block length {r} outside [1, {n}]"
            )));
        }
        Ok(Self { n, r, k: n / r })
    }

    /// `r = ceil(n^kappa)`.
    pub fn from_kappa(n: usize, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Domain(format!("kappa = {kappa} outside (0, 1)")));
        }
        Self::new(n, ((n as f64).powf(kappa).ceil() as usize).clamp(1, n.max(1)))
    }

    pub fn blocks<'a>(&self, data: &'a [f64]) -> impl Iterator<Item = &'a [f64]> {
        data[..self.k * self.r].chunks(self.r)
    }
}

fn abs_sorted_desc(data: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = data.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// Empirical `level`-quantile of `|data|` (order statistic `ceil(level n)`).
pub fn abs_quantile(data: &[f64], level: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Domain(format!("quantile level {level} outside [0, 1]")));
    }
    let mut a: Vec<f64> = data.iter().map(|x| x.abs()).collect();
    let idx = ((level * a.len() as f64).ceil() as usize).clamp(1, a.len()) - 1;
    let (_, v, _) = a.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*v)
}

/// Hill estimator of the tail index from the `k` largest `|X|`.
pub fn hill_alpha(data: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= data.len() {
        return Err(Error::Precondition(format!(
            "need 0 < k < n, got k = {k}, n = {}",
            data.len()
        )));
    }
    let a = abs_sorted_desc(data);
    let base = a[k];
    if !(base > 0.0) {
        return Err(Error::InsufficientData(
            "order statistic k+1 is zero: too many ties at zero".into(),
        ));
    }
    let mean = a[..k].iter().map(|x| (x / base).ln()).sum::<f64>() / k as f64;
    if !(mean > 0.0) {
        return Err(Error::InsufficientData("top order statistics are all tied".into()));
    }
    Ok(1.0 / mean)
}

/// `a_n = scale n^(1/alpha)` for the canonical Pareto law.
pub fn pareto_an(alpha: f64, scale: f64, n: usize) -> f64 {
    scale * (n as f64).powf(1.0 / alpha)
}

/// `(1 - 1/n)`-quantile of `|X|` over a pooled sample.
pub fn empirical_an(pooled: &[f64], n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition("n must be at least 2".into()));
    }
    abs_quantile(pooled, 1.0 - 1.0 / n as f64)
}

fn exceedance_counts(data: &[f64], scheme: &BlockingScheme, u: f64) -> (usize, usize) {
    let mut blocks = 0;
    let mut exceed = 0;
    for b in scheme.blocks(data) {
        let c = b.iter().filter(|x| x.abs() > u).count();
        exceed += c;
        if c > 0 {
            blocks += 1;
        }
    }
    (blocks, exceed)
}

fn check_threshold(data: &[f64], u: f64) -> Result<()> {
    let q90 = abs_quantile(data, 0.9)?;
    if u < q90 {
        return Err(Error::Precondition(format!(
            "threshold {u} below the 90% quantile {q90} of |data|"
        )));
    }
    Ok(())
}

/// Ratio of blocks with an exceedance of `u` to the number of exceedances.
pub fn extremal_index_naive(data: &[f64], scheme: &BlockingScheme, u: f64) -> Result<f64> {
    check_threshold(data, u)?;
    let (blocks, exceed) = exceedance_counts(data, scheme, u);
    if exceed == 0 {
        return Err(Error::InsufficientData(format!("no exceedances of {u}")));
    }
    Ok((blocks as f64 / exceed as f64).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Blocks estimator in logarithmic form,
/// `ln(1 - K/k) / (r ln(1 - N/(k r)))` with `K` blocks exceeding `u` and `N`
/// exceedances, clipped to `(0, 1]`.
pub fn extremal_index_blocks(data: &[f64], scheme: &BlockingScheme, u: f64) -> Result<f64> {
    check_threshold(data, u)?;
    let (blocks, exceed) = exceedance_counts(data, scheme, u);
    if exceed == 0 {
        return Err(Error::InsufficientData(format!("no exceedances of {u}")));
    }
    let used = (scheme.k * scheme.r) as f64;
    if blocks == scheme.k || exceed as f64 >= used {
        return Ok(1.0);
    }
    let num = (-(blocks as f64) / scheme.k as f64).ln_1p();
    let den = scheme.r as f64 * (-(exceed as f64) / used).ln_1p();
    Ok((num / den).clamp(f64::MIN_POSITIVE, 1.0))
}

/// `P(max_{m <= |i| < r} |X_{t+i}| > thr | |X_t| > thr)` for each `m`,
/// scanning every anchor. The window is empty at `m = r`.
pub fn anticluster_diagnostic(
    data: &[f64],
    scheme: &BlockingScheme,
    thr: f64,
    m_grid: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if !(thr > 0.0) {
        return Err(Error::Domain("threshold must be positive".into()));
    }
    let n = data.len() as isize;
    let anchors: Vec<usize> = (0..data.len()).filter(|&t| data[t].abs() > thr).collect();
    if anchors.is_empty() {
        return Err(Error::InsufficientData("no anchor exceedances".into()));
    }
    let r = scheme.r as isize;
    let mut out = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        if m < 1 || m > scheme.r {
            return Err(Error::Domain(format!("m = {m} outside [1, {}]", scheme.r)));
        }
        let hits = anchors
            .iter()
            .filter(|&&t| {
                let t = t as isize;
                (m as isize..r).any(|i| {
                    [t - i, t + i]
                        .iter()
                        .any(|&j| j >= 0 && j < n && data[j as usize].abs() > thr)
                })
            })
            .count();
        out.push((m, hits as f64 / anchors.len() as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignSwitch {
    pub violations: usize,
    pub blocks_with_exceedances: usize,
}

/// Number of blocks whose exceedances of `thr` carry both signs.
pub fn sign_switch_diagnostic(data: &[f64], scheme: &BlockingScheme, thr: f64) -> SignSwitch {
    let mut out = SignSwitch {
        violations: 0,
        blocks_with_exceedances: 0,
    };
    for b in scheme.blocks(data) {
        let pos = b.iter().any(|x| *x > thr);
        let neg = b.iter().any(|x| *x < -thr);
        if pos || neg {
            out.blocks_with_exceedances += 1;
        }
        if pos && neg {
            out.violations += 1;
        }
    }
    out
}

/// One point of the small-jump curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallJumpPoint {
    pub u: f64,
    /// Replicate fraction for the sums of `X / a_n`.
    pub prob_first: f64,
    /// Replicate fraction for the sums of `X^2 / a_n^2`.
    pub prob_second: f64,
}

/// Fraction of replicates with `max_k |sum_{i<=k} (X_i/a_n 1{|X_i|/a_n <= u} - c_u)| > delta`,
/// and the same for squares. With `centered`, `c_u` is the pooled mean of
/// the truncated terms; otherwise 0.
pub fn small_jump_diagnostic(
    replicates: &[Vec<f64>],
    a_n: f64,
    u_grid: &[f64],
    delta: f64,
    centered: bool,
) -> Result<Vec<SmallJumpPoint>> {
    if !(delta > 0.0) {
        return Err(Error::Domain("delta must be positive".into()));
    }
    if replicates.is_empty() {
        return Err(Error::InsufficientData("no replicates".into()));
    }
    let mut out = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let trunc = |x: f64| if (x / a_n).abs() <= u { x / a_n } else { 0.0 };
        let (c1, c2) = if centered {
            let total: usize = replicates.iter().map(Vec::len).sum();
            let s1: f64 = replicates.iter().flatten().map(|&x| trunc(x)).sum();
            let s2: f64 = replicates.iter().flatten().map(|&x| trunc(x).powi(2)).sum();
            (s1 / total as f64, s2 / total as f64)
        } else {
            (0.0, 0.0)
        };
        let mut hit1 = 0usize;
        let mut hit2 = 0usize;
        for rep in replicates {
            let (mut s1, mut s2, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for &x in rep {
                let y = trunc(x);
                s1 += y - c1;
                s2 += y * y - c2;
                m1 = m1.max(s1.abs());
                m2 = m2.max(s2.abs());
            }
            hit1 += usize::from(m1 > delta);
            hit2 += usize::from(m2 > delta);
        }
        let k = replicates.len() as f64;
        out.push(SmallJumpPoint {
            u,
            prob_first: hit1 as f64 / k,
            prob_second: hit2 as f64 / k,
        });
    }
    Ok(out)
}

/// Quantile summary of `X_{t+i} / |X_t|` over anchors `|X_t| > thr`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSummary {
    pub lag: isize,
    pub count: usize,
    /// Quantiles at 5%, 25%, 50%, 75% and 95%.
    pub quantiles: [f64; 5],
    /// Fraction with `|ratio| < 0.05`.
    pub near_zero: f64,
}

pub fn empirical_tail_process(data: &[f64], thr: f64, h: usize) -> Result<Vec<LagSummary>> {
    let anchors: Vec<usize> = (0..data.len()).filter(|&t| data[t].abs() > thr).collect();
    if anchors.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "{} anchors above {thr}, need at least 100",
            anchors.len()
        )));
    }
    let h = h as isize;
    let mut out = Vec::new();
    for lag in -h..=h {
        let mut v: Vec<f64> = anchors
            .iter()
            .filter_map(|&t| {
                let j = t as isize + lag;
                (j >= 0 && (j as usize) < data.len())
                    .then(|| data[j as usize] / data[t].abs())
            })
            .collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        let near_zero = v.iter().filter(|x| x.abs() < 0.05).count() as f64 / v.len() as f64;
        out.push(LagSummary {
            lag,
            count: v.len(),
            quantiles: [q(0.05), q(0.25), q(0.5), q(0.75), q(0.95)],
            near_zero,
        });
    }
    Ok(out)
}

/// Clusters of exceedances of `thr` per block, normalized by the block's
/// largest absolute value.
pub fn extract_clusters(data: &[f64], scheme: &BlockingScheme, thr: f64) -> Vec<Vec<f64>> {
    scheme
        .blocks(data)
        .filter_map(|b| {
            let marks: Vec<f64> = b.iter().copied().filter(|x| x.abs() > thr).collect();
            let top = marks.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            (top > 0.0).then(|| marks.iter().map(|x| x / top).collect())
        })
        .collect()
}

/// A diagnostic record; unset fields are written as `null`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticRecord {
    pub replicate: usize,
    pub diagnostic: String,
    pub alpha_hat: Option<f64>,
    pub an_hat: Option<f64>,
    pub theta_hat: Option<f64>,
    pub m: Option<usize>,
    pub prob: Option<f64>,
    pub u: Option<f64>,
    pub delta: Option<f64>,
    pub violations: Option<usize>,
}

impl DiagnosticRecord {
    pub fn new(replicate: usize, diagnostic: &str) -> Self {
        Self {
            replicate,
            diagnostic: diagnostic.to_string(),
            ..Default::default()
        }
    }

    pub fn to_jsonl(&self) -> String {
        let f = |v: Option<f64>| v.map_or("null".to_string(), json_number);
        let i = |v: Option<usize>| v.map_or("null".to_string(), |x| x.to_string());
        format!(
            "{{\"replicate\":{},\"diagnostic\":{},\"alpha_hat\":{},\"an_hat\":{},\"theta_hat\":{},\"m\":{},\"prob\":{},\"u\":{},\"delta\":{},\"violations\":{}}}",
            self.replicate,
            serde_json::Value::from(self.diagnostic.as_str()),
            f(self.alpha_hat),
            f(self.an_hat),
            f(self.theta_hat),
            i(self.m),
            f(self.prob),
            f(self.u),
            f(self.delta),
            i(self.violations)
        )
    }
}

/// JSON number with 17 significant digits; non-finite values become strings.
pub fn json_number(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else {
        format!("\"{x}\"")
    }
}
