//! Poisson series representation of the limit pair `(L_1, L_2)`.
//!
//! Cluster sizes `P_i` of the limiting point process have mean measure
//! `theta alpha y^(-alpha-1) dy` on `(0, inf)`, i.e. `theta y^(-alpha)` on
//! `(y, inf)`. With unit-rate arrivals `Gamma_i`, the points
//! `P_i = (Gamma_i / theta)^(-1/alpha)` have exactly this mean measure, in
//! decreasing order. Points with `Gamma_i <= N` are those with
//! `P_i >= u = (N / theta)^(-1/alpha)`; their count is Poisson(N).
//!
//! The remainder below `u` is replaced by its mean and a Gaussian with the
//! matching variance. For `alpha >= 1` the first coordinate keeps the marks
//! with `|P eta| > u` and subtracts `t int_{u<|x|<=1} x mu(dx)`, where
//! `mu` is the mean measure of individual marks.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{CharTriple, ClusterDistribution};
use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::partial_sums::JointPathPair;
use crate::seeds;

/// Deterministic and Gaussian parts shared by every draw.
#[derive(Debug, Clone, Copy)]
struct SeriesPlan {
    alpha: f64,
    theta: f64,
    u: f64,
    n_pts: f64,
    drift1: f64,
    sd1: f64,
    drift2: f64,
}

impl SeriesPlan {
    fn new(triple: &CharTriple, n_pts: usize) -> Result<Self> {
        if n_pts < 1000 {
            return Err(Error::Precondition(format!(
                "N_pts = {n_pts} below 10^3: remainder compensation unstable"
            )));
        }
        let a = triple.alpha;
        let th = triple.theta;
        let m = &triple.moments;
        let n = n_pts as f64;
        let u = (n / th).powf(-1.0 / a);
        let small2 = th * a * u.powf(2.0 - a) / (2.0 - a);
        let (drift1, var1) = if a < 1.0 {
            (
                th * a * u.powf(1.0 - a) / (1.0 - a) * m.mean_sum,
                small2 * m.mean_square_sum,
            )
        } else {
            let (pe, qe) = triple.mark_balance();
            let comp = if a == 1.0 {
                (pe - qe) * (1.0 / u).ln()
            } else {
                (pe - qe) * a * (u.powf(1.0 - a) - 1.0) / (a - 1.0)
            };
            (-comp, (pe + qe) * a * u.powf(2.0 - a) / (2.0 - a))
        };
        Ok(Self {
            alpha: a,
            theta: th,
            u,
            n_pts: n,
            drift1,
            sd1: var1.sqrt(),
            drift2: small2 * m.mean_sum_sq,
        })
    }

    /// Jumps `(T_i, dL_1, dL_2)` of one draw, unsorted.
    fn jumps(
        &self,
        cluster: &ClusterDistribution,
        rng: &mut impl Rng,
        out: &mut Vec<(f64, f64, f64)>,
    ) {
        out.clear();
        let mut marks = Vec::new();
        let mut gamma = 0.0f64;
        loop {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            if gamma > self.n_pts {
                break;
            }
            let p = (gamma / self.theta).powf(-1.0 / self.alpha);
            let t: f64 = rng.random();
            cluster.sample_into(rng, &mut marks);
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for &eta in &marks {
                let x = p * eta;
                if self.alpha < 1.0 || x.abs() > self.u {
                    d1 += x;
                }
                d2 += x * x;
            }
            out.push((t, d1, d2));
        }
    }
}

/// Values of `L_1` and `L_2` on a time grid for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyDraws {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub l2_at_one: f64,
}

/// One draw of `(L_1(t), L_2(t))` on an increasing grid in `[0, 1]`.
pub fn simulate_levy_values(
    triple: &CharTriple,
    cluster: &ClusterDistribution,
    n_pts: usize,
    t_grid: &[f64],
    rng: &mut impl Rng,
) -> Result<LevyDraws> {
    if t_grid.windows(2).any(|w| w[1] < w[0])
        || t_grid.iter().any(|t| !(0.0..=1.0).contains(t))
    {
        return Err(Error::Domain("t_grid must be increasing within [0, 1]".into()));
    }
    let plan = SeriesPlan::new(triple, n_pts)?;
    let mut jumps = Vec::new();
    plan.jumps(cluster, rng, &mut jumps);
    let g = t_grid.len();
    // bucket g holds jumps after the last grid point (only feeds L_2(1))
    let mut inc1 = vec![0.0f64; g + 1];
    let mut inc2 = vec![0.0f64; g + 1];
    let mut total2 = 0.0;
    for &(t, d1, d2) in &jumps {
        let k = t_grid.partition_point(|&s| s < t);
        inc1[k] += d1;
        inc2[k] += d2;
        total2 += d2;
    }
    let mut l1 = Vec::with_capacity(g);
    let mut l2 = Vec::with_capacity(g);
    let (mut s1, mut s2, mut w, mut prev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..g {
        s1 += inc1[k];
        s2 += inc2[k];
        let t = t_grid[k];
        let z: f64 = rng.sample(StandardNormal);
        w += plan.sd1 * (t - prev).sqrt() * z;
        prev = t;
        l1.push(s1 + plan.drift1 * t + w);
        l2.push(s2 + plan.drift2 * t);
    }
    Ok(LevyDraws {
        l1,
        l2,
        l2_at_one: total2 + plan.drift2,
    })
}

/// One draw of the limit pair as step paths with breakpoints at the jump
/// times; values at breakpoints include the drift and Gaussian parts.
pub fn simulate_levy_pair(
    triple: &CharTriple,
    cluster: &ClusterDistribution,
    n_pts: usize,
    seed: u64,
) -> Result<JointPathPair> {
    let plan = SeriesPlan::new(triple, n_pts)?;
    let mut rng = seeds::rng(seed, "levy-pair");
    let mut jumps = Vec::new();
    plan.jumps(cluster, &mut rng, &mut jumps);
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = vec![0.0];
    let mut l1 = vec![0.0];
    let mut l2 = vec![0.0];
    let (mut s1, mut s2, mut w, mut prev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut push = |t: f64, d1: f64, d2: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let z: f64 = rng.sample(StandardNormal);
        w += plan.sd1 * (t - prev).sqrt() * z;
        prev = t;
        s1 += d1;
        s2 += d2;
        let v1 = s1 + plan.drift1 * t + w;
        let v2 = s2 + plan.drift2 * t;
        if t > *times.last().unwrap() {
            times.push(t);
            l1.push(v1);
            l2.push(v2);
        } else {
            *l1.last_mut().unwrap() = v1;
            *l2.last_mut().unwrap() = v2;
        }
    };
    for &(t, d1, d2) in &jumps {
        push(t, d1, d2, &mut rng);
    }
    push(1.0, 0.0, 0.0, &mut rng);
    Ok(JointPathPair {
        l1n: CadlagPath::step(times.clone(), l1)?,
        l2n: CadlagPath::step(times, l2)?,
        n: jumps.len(),
        a_n: 1.0,
        centered: plan.alpha >= 1.0,
        u: Some(plan.u),
        b1n: 0.0,
        b2n: 0.0,
    })
}
