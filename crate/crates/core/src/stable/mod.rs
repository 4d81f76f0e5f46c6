//! Characteristic triples of the limiting stable Lévy pair, conversion to
//! stable parameters, characteristic functions and simulation.

mod cluster;
mod cms;
mod exponent;
mod series;

pub use cluster::ClusterDistribution;
pub use cms::{cms_sample, cms_sampler};
pub use exponent::{levy_exponent, sine_constant};
pub use series::{simulate_levy_pair, simulate_levy_values, LevyDraws};

use num_complex::Complex64;
use rand::Rng;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::seeds;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `alpha` in (0, 1): no centering.
    Low,
    /// `alpha` in [1, 2): centered sums.
    High,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        if alpha < 1.0 {
            Regime::Low
        } else {
            Regime::High
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Regime::Low => "(0,1)",
            Regime::High => "[1,2)",
        }
    }
}

/// Moments of the cluster-mark law entering the triples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClusterMoments {
    pub c_plus: f64,
    pub c_minus: f64,
    pub se_c_plus: f64,
    pub se_c_minus: f64,
    /// `E (sum_j eta_j^2)^(alpha/2)`
    pub r2: f64,
    /// `E (sum_j |eta_j|)^alpha`
    pub abs_sum_alpha: f64,
    /// `E sum_j (eta_j^+)^alpha` and `E sum_j (eta_j^-)^alpha`
    pub mark_plus: f64,
    pub mark_minus: f64,
    pub mean_sum: f64,
    pub mean_sum_sq: f64,
    /// `E (sum_j eta_j)^2`
    pub mean_square_sum: f64,
    /// `E[sum_j eta_j log|eta_j| - S log|S|]` with `S = sum_j eta_j`
    pub log_term: f64,
}

fn xlogabs(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln()
    }
}

impl ClusterMoments {
    /// Weighted moments; weights need not be normalized.
    pub fn from_weighted<'a>(
        alpha: f64,
        items: impl IntoIterator<Item = (f64, &'a [f64])>,
    ) -> Self {
        let mut acc = [0.0f64; 10];
        let mut sq = [0.0f64; 2];
        let mut wsum = 0.0;
        let mut count = 0usize;
        for (w, marks) in items {
            let s: f64 = marks.iter().sum();
            let plus = if s > 0.0 { s.powf(alpha) } else { 0.0 };
            let minus = if s < 0.0 { (-s).powf(alpha) } else { 0.0 };
            let sum_sq: f64 = marks.iter().map(|v| v * v).sum();
            let abs_sum: f64 = marks.iter().map(|v| v.abs()).sum();
            let vals = [
                plus,
                minus,
                sum_sq.powf(alpha / 2.0),
                abs_sum.powf(alpha),
                marks.iter().filter(|v| **v > 0.0).map(|v| v.powf(alpha)).sum(),
                marks.iter().filter(|v| **v < 0.0).map(|v| (-v).powf(alpha)).sum(),
                s,
                sum_sq,
                marks.iter().map(|v| xlogabs(*v)).sum::<f64>() - xlogabs(s),
                s * s,
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += w * v;
            }
            sq[0] += w * plus * plus;
            sq[1] += w * minus * minus;
            wsum += w;
            count += 1;
        }
        let m: Vec<f64> = acc.iter().map(|a| a / wsum).collect();
        let se = |second: f64, mean: f64| {
            if count > 1 {
                ((second / wsum - mean * mean).max(0.0) / count as f64).sqrt()
            } else {
                0.0
            }
        };
        ClusterMoments {
            c_plus: m[0],
            c_minus: m[1],
            se_c_plus: se(sq[0], m[0]),
            se_c_minus: se(sq[1], m[1]),
            r2: m[2],
            abs_sum_alpha: m[3],
            mark_plus: m[4],
            mark_minus: m[5],
            mean_sum: m[6],
            mean_sum_sq: m[7],
            log_term: m[8],
            mean_square_sum: m[9],
        }
    }

    /// Exact moments over the enumerated law (no standard errors).
    pub fn exact(alpha: f64, cluster: &ClusterDistribution) -> Self {
        let items = cluster.enumerate();
        let mut m = Self::from_weighted(alpha, items.iter().map(|(w, c)| (*w, c.as_slice())));
        m.se_c_plus = 0.0;
        m.se_c_minus = 0.0;
        m
    }

    pub fn monte_carlo(
        alpha: f64,
        cluster: &ClusterDistribution,
        mc_size: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let draws: Vec<Vec<f64>> = (0..mc_size).map(|_| cluster.sample(rng)).collect();
        Self::from_weighted(alpha, draws.iter().map(|c| (1.0, c.as_slice())))
    }
}

/// Characteristic triples `(0, nu_1, gamma1)` and `(0, nu_2, gamma2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharTriple {
    pub alpha: f64,
    pub theta: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub gamma1: f64,
    pub r2: f64,
    /// Drift of the uncentered second coordinate.
    pub gamma2: f64,
    pub regime: Regime,
    pub p: f64,
    pub q: f64,
    pub moments: ClusterMoments,
    /// Set at `alpha = 1`, where `gamma1` comes from the log-moment integral.
    pub gamma1_flagged: bool,
}

impl CharTriple {
    pub fn from_moments(alpha: f64, theta: f64, p: f64, q: f64, m: ClusterMoments) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("alpha = {alpha} outside (0, 2)")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Domain(format!("theta = {theta} outside (0, 1]")));
        }
        let diff = m.c_plus - m.c_minus;
        let (gamma1, flagged) = if alpha < 1.0 {
            (theta * alpha * diff / (1.0 - alpha), false)
        } else if alpha > 1.0 {
            (alpha / (alpha - 1.0) * (p - q - theta * diff), false)
        } else {
            (theta * m.log_term, true)
        };
        Ok(CharTriple {
            alpha,
            theta,
            c_plus: m.c_plus,
            c_minus: m.c_minus,
            gamma1,
            r2: m.r2,
            gamma2: theta * alpha * m.r2 / (2.0 - alpha),
            regime: Regime::of(alpha),
            p,
            q,
            moments: m,
            gamma1_flagged: flagged,
        })
    }

    /// Single positive/negative marks with probabilities `(p, 1-p)`.
    pub fn singleton(alpha: f64, p: f64) -> Result<Self> {
        let cl = ClusterDistribution::Singleton { p };
        Self::from_moments(alpha, 1.0, p, 1.0 - p, ClusterMoments::exact(alpha, &cl))
    }

    /// Triple with exactly evaluated cluster moments.
    pub fn exact(alpha: f64, theta: f64, cluster: &ClusterDistribution) -> Result<Self> {
        let m = ClusterMoments::exact(alpha, cluster);
        let (p, q) = (theta * m.mark_plus, theta * m.mark_minus);
        Self::from_moments(alpha, theta, p, q, m)
    }

    /// Mean measure of individual marks on `(0, inf)` and `(-inf, 0)`.
    pub fn mark_balance(&self) -> (f64, f64) {
        (
            self.theta * self.moments.mark_plus,
            self.theta * self.moments.mark_minus,
        )
    }

    pub fn to_record(&self) -> String {
        use crate::cadlag::fmt_f64;
        format!(
            "alpha={} theta={} c_plus={} c_minus={} gamma1={} r2={} gamma2={} regime={} flagged={}",
            fmt_f64(self.alpha),
            fmt_f64(self.theta),
            fmt_f64(self.c_plus),
            fmt_f64(self.c_minus),
            fmt_f64(self.gamma1),
            fmt_f64(self.r2),
            fmt_f64(self.gamma2),
            self.regime.tag(),
            self.gamma1_flagged
        )
    }
}

/// Monte Carlo triple with standard errors for `c_plus` and `c_minus`.
pub fn triple_from_cluster(
    alpha: f64,
    theta: f64,
    cluster: &ClusterDistribution,
    p: f64,
    q: f64,
    mc_size: usize,
    seed: u64,
) -> Result<CharTriple> {
    if mc_size < 10_000 {
        return Err(Error::Precondition(format!(
            "mc_size = {mc_size} below 10^4"
        )));
    }
    let mut rng = seeds::rng(seed, "cluster-moments");
    let m = ClusterMoments::monte_carlo(alpha, cluster, mc_size, &mut rng);
    CharTriple::from_moments(alpha, theta, p, q, m)
}

/// Stable parameters for `exp{i tau z - c|z|^alpha (1 - i beta sgn(z) tan(pi alpha/2))}`
/// and the matching `alpha = 1` form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub c: f64,
    pub beta: f64,
    pub tau: f64,
}

impl StableParams {
    pub fn new(alpha: f64, c: f64, beta: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) || !(c > 0.0) || !(beta.abs() <= 1.0) || !tau.is_finite()
        {
            return Err(Error::Domain(format!(
                "invalid stable parameters alpha={alpha} c={c} beta={beta} tau={tau}"
            )));
        }
        Ok(Self { alpha, c, beta, tau })
    }

    pub fn to_record(&self) -> String {
        use crate::cadlag::fmt_f64;
        format!(
            "alpha={} c={} beta={} tau={}",
            fmt_f64(self.alpha),
            fmt_f64(self.c),
            fmt_f64(self.beta),
            fmt_f64(self.tau)
        )
    }
}

/// `int_0^inf (1 - cos y) y^(-alpha-1) dy`.
fn cosine_integral(alpha: f64) -> f64 {
    if alpha == 1.0 {
        PI / 2.0
    } else {
        gamma(2.0 - alpha) / (1.0 - alpha) * (PI * alpha / 2.0).cos() / alpha
    }
}

/// Converts the first triple to `(c, beta, tau)`.
pub fn stable_params(triple: &CharTriple) -> Result<StableParams> {
    let total = triple.c_plus + triple.c_minus;
    if !(total > 0.0) {
        return Err(Error::Domain("c_plus + c_minus = 0: degenerate law".into()));
    }
    let a = triple.alpha;
    let th = triple.theta;
    let diff = triple.c_plus - triple.c_minus;
    let c = th * a * total * cosine_integral(a);
    let beta = (diff / total).clamp(-1.0, 1.0);
    let tau = if a == 1.0 {
        triple.gamma1 + th * diff * sine_constant()
    } else {
        triple.gamma1 + th * a * diff / (a - 1.0)
    };
    StableParams::new(a, c, beta, tau)
}

/// Parameters of the totally skewed `alpha/2`-stable law of `L_2(1)`.
pub fn l2_stable_params(triple: &CharTriple) -> Result<StableParams> {
    if !(triple.r2 > 0.0) {
        return Err(Error::Domain("r2 = 0: degenerate law".into()));
    }
    let h = triple.alpha / 2.0;
    let c = triple.theta * h * triple.r2 * cosine_integral(h);
    let tau = triple.gamma2 + triple.theta * h * triple.r2 / (h - 1.0);
    StableParams::new(h, c, 1.0, tau)
}

pub fn charfn_stable(z: f64, params: &StableParams) -> Complex64 {
    let StableParams { alpha, c, beta, tau } = *params;
    if z == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let az = z.abs();
    let sg = z.signum();
    let expo = if alpha == 1.0 {
        Complex64::new(-c * az, tau * z - c * az * beta * (2.0 / PI) * sg * az.ln())
    } else {
        let pow = c * az.powf(alpha);
        Complex64::new(-pow, tau * z + pow * beta * sg * (PI * alpha / 2.0).tan())
    };
    expo.exp()
}
