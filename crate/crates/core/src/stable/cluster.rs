use rand::Rng;

use crate::error::{Error, Result};

/// Law of the normalized cluster marks `(eta_j)`, with `max_j |eta_j| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterDistribution {
    /// A single mark, `+1` with probability `p` and `-1` otherwise.
    Singleton { p: f64 },
    /// Finite-order linear process: marks `phi_j / max_k |phi_k|` times a
    /// sign drawn with probabilities `(p, 1 - p)`.
    Linear { coeffs: Vec<f64>, alpha: f64, p: f64 },
    /// Resampled clusters extracted from data, each already normalized.
    Empirical { clusters: Vec<Vec<f64>> },
}

impl ClusterDistribution {
    pub fn empirical(clusters: Vec<Vec<f64>>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InsufficientData("no clusters to resample".into()));
        }
        let mut out = Vec::with_capacity(clusters.len());
        for c in clusters {
            let top = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(top > 0.0) {
                return Err(Error::InvalidModel("cluster with no nonzero mark".into()));
            }
            out.push(c.iter().map(|v| v / top).filter(|v| *v != 0.0).collect());
        }
        Ok(ClusterDistribution::Empirical { clusters: out })
    }

    /// Exhaustive list of `(probability, marks)` when the law is finite.
    pub fn enumerate(&self) -> Vec<(f64, Vec<f64>)> {
        match self {
            ClusterDistribution::Singleton { p } => vec![(*p, vec![1.0]), (1.0 - p, vec![-1.0])],
            ClusterDistribution::Linear { coeffs, p, .. } => {
                let top = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let plus: Vec<f64> = coeffs.iter().map(|c| c / top).collect();
                let minus = plus.iter().map(|v| -v).collect();
                vec![(*p, plus), (1.0 - p, minus)]
            }
            ClusterDistribution::Empirical { clusters } => {
                let w = 1.0 / clusters.len() as f64;
                clusters.iter().map(|c| (w, c.clone())).collect()
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::new();
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut Vec<f64>) {
        out.clear();
        match self {
            ClusterDistribution::Singleton { p } => {
                out.push(if rng.random::<f64>() < *p { 1.0 } else { -1.0 });
            }
            ClusterDistribution::Linear { coeffs, p, .. } => {
                let top = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let s = if rng.random::<f64>() < *p { 1.0 } else { -1.0 };
                out.extend(coeffs.iter().map(|c| s * c / top));
            }
            ClusterDistribution::Empirical { clusters } => {
                let k = rng.random_range(0..clusters.len());
                out.extend_from_slice(&clusters[k]);
            }
        }
    }

    /// Anchor law `P(M = m)` of the linear model.
    pub fn anchor_law(&self) -> Option<Vec<f64>> {
        match self {
            ClusterDistribution::Linear { coeffs, alpha, .. } => {
                Some(crate::models::linear_anchor_law(coeffs, *alpha))
            }
            _ => None,
        }
    }

    /// Whether no cluster can contain marks of both signs.
    pub fn same_signed(&self) -> bool {
        self.enumerate().iter().all(|(_, m)| {
            m.iter().all(|v| *v >= 0.0) || m.iter().all(|v| *v <= 0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    #[test]
    fn marks_are_normalized() {
        let mut rng = seeds::rng(1, "t");
        let laws = [
            ClusterDistribution::Singleton { p: 0.3 },
            ClusterDistribution::Linear { coeffs: vec![0.5, -2.0, 1.0], alpha: 1.0, p: 0.5 },
            ClusterDistribution::empirical(vec![vec![3.0, -1.0], vec![0.2]]).unwrap(),
        ];
        for law in &laws {
            for _ in 0..50 {
                let m = law.sample(&mut rng);
                let top = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert_eq!(top, 1.0);
            }
        }
    }

    #[test]
    fn one_sign_when_p_is_one() {
        let law = ClusterDistribution::Linear { coeffs: vec![1.0, 0.5], alpha: 1.0, p: 1.0 };
        let mut rng = seeds::rng(2, "t");
        for _ in 0..100 {
            assert!(law.sample(&mut rng).iter().all(|v| *v > 0.0));
        }
        assert!(law.same_signed());
        let anchors = law.anchor_law().unwrap();
        assert!((anchors[0] - 2.0 / 3.0).abs() < 1e-15);
    }
}
