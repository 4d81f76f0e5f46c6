use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::f64::consts::{FRAC_PI_2, PI};

use super::StableParams;
use crate::seeds;

/// One stable draw by the Chambers–Mallows–Stuck method in the
/// parameterization of [`super::charfn_stable`], with `sigma = c^(1/alpha)`.
pub fn cms_sample(params: &StableParams, rng: &mut impl Rng) -> f64 {
    let StableParams { alpha, c, beta, tau } = *params;
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        let sigma = c;
        let a = FRAC_PI_2 + beta * v;
        let x = (a * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / a).ln()) * 2.0 / PI;
        sigma * x + 2.0 / PI * beta * sigma * sigma.ln() + tau
    } else {
        let sigma = c.powf(1.0 / alpha);
        let t = beta * (PI * alpha / 2.0).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
        let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
            * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        sigma * x + tau
    }
}

pub fn cms_sampler(params: &StableParams, m: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeds::rng(seed, "cms");
    (0..m).map(|_| cms_sample(params, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::charfn_stable;

    #[test]
    fn empirical_charfn_matches() {
        let m = 200_000;
        for params in [
            StableParams::new(0.7, 1.3, 0.5, 0.2).unwrap(),
            StableParams::new(1.0, 0.8, -0.6, 0.1).unwrap(),
            StableParams::new(1.5, 0.6, 1.0, -0.3).unwrap(),
        ] {
            let xs = cms_sampler(&params, m, 17);
            for z in [0.5, 1.0, 2.0] {
                let (mut re, mut im) = (0.0, 0.0);
                for x in &xs {
                    re += (z * x).cos();
                    im += (z * x).sin();
                }
                let (re, im) = (re / m as f64, im / m as f64);
                let want = charfn_stable(z, &params);
                // each component has variance at most 1/m
                let se = (1.0 / m as f64).sqrt();
                assert!((re - want.re).abs() < 4.0 * se, "{params:?} z={z}");
                assert!((im - want.im).abs() < 4.0 * se, "{params:?} z={z}");
            }
        }
    }

    #[test]
    fn symmetric_sign_balance() {
        let p = StableParams::new(1.2, 1.0, 0.0, 0.0).unwrap();
        let xs = cms_sampler(&p, 40_000, 3);
        let frac = xs.iter().filter(|x| **x > 0.0).count() as f64 / 40_000.0;
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 40_000.0).sqrt());
    }
}
