//! Skorokhod J1 distance between step paths.
//!
//! `d_J1(x, y) <= eps` iff the jumps of `x` can be moved, in order and by at
//! most `eps` each, so that the resulting step path stays within `eps` of `y`
//! in sup norm. The decision is a left-to-right dynamic program over the
//! levels of `x`: the set of admissible start times of each level is a union
//! of intervals, propagated through the runs of `y`-pieces that stay close to
//! that level. The distance is found by bisection on `eps`.

use super::{uniform_distance, CadlagPath, PathKind};
use crate::error::{Error, Result};

const TOL: f64 = 1e-13;

pub fn j1_distance(x: &CadlagPath, y: &CadlagPath) -> Result<f64> {
    for p in [x, y] {
        if p.kind() != PathKind::Step {
            return Err(Error::Unsupported(
                "j1_distance needs step paths; refine piecewise-linear input with to_step".into(),
            ));
        }
        if p.dim() != 1 {
            return Err(Error::Unsupported(
                "j1_distance is defined for one-dimensional paths".into(),
            ));
        }
    }
    let (xn, yn) = (x.normalized(), y.normalized());
    // fewer levels on the moving side keeps the program small
    let (mv, fixed) = if xn.len() <= yn.len() {
        (&xn, &yn)
    } else {
        (&yn, &xn)
    };
    let upper = uniform_distance(&xn, &yn)?;
    if j1_le(mv, fixed, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, upper);
    while !j1_le(mv, fixed, hi) {
        hi = hi * (1.0 + 1e-9) + 1e-12;
    }
    let tol = 1e-12 * upper.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if j1_le(mv, fixed, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn push_merged(set: &mut Vec<(f64, f64)>, iv: (f64, f64)) {
    if let Some(last) = set.last_mut() {
        if iv.0 <= last.1 + TOL {
            last.1 = last.1.max(iv.1);
            last.0 = last.0.min(iv.0);
            return;
        }
    }
    set.push(iv);
}

fn j1_le(x: &CadlagPath, y: &CadlagPath, eps: f64) -> bool {
    let lv = x.values.as_slice();
    let jt = &x.times;
    let yt = &y.times;
    let yv = y.values.as_slice();
    let nb = yt.len();
    // end of y-piece k (the last piece is closed at 1)
    let piece_end = |k: usize| if k + 1 < nb { yt[k + 1] } else { 1.0 };
    let piece_of = |t: f64| yt.partition_point(|&s| s <= t).saturating_sub(1);
    let close = |level: f64, k: usize| (level - yv[k]).abs() <= eps;

    // admissible start times of level 0
    let mut reach: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for i in 0..lv.len() {
        let last_level = i + 1 == lv.len();
        let window = if last_level || jt[i + 1] >= 1.0 {
            (1.0, 1.0)
        } else {
            ((jt[i + 1] - eps).max(0.0), (jt[i + 1] + eps).min(1.0))
        };
        let mut next: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in &reach {
            // walk the y-pieces overlapping [a, b] and the runs that follow
            let mut k = piece_of(a);
            while k < nb && yt[k] <= b + TOL {
                if !close(lv[i], k) {
                    k += 1;
                    continue;
                }
                // earliest admissible start inside this run
                let start = a.max(yt[k]);
                let mut end_k = k;
                while end_k + 1 < nb && close(lv[i], end_k + 1) {
                    end_k += 1;
                }
                let run_end = piece_end(end_k);
                if start <= run_end.min(b) + TOL {
                    if last_level {
                        if run_end >= 1.0 {
                            return true;
                        }
                    } else {
                        let lo = start.max(window.0);
                        let hi = run_end.min(window.1);
                        if lo <= hi + TOL {
                            push_merged(&mut next, (lo, hi.max(lo)));
                        }
                    }
                }
                k = end_k + 1;
            }
        }
        if last_level {
            return false;
        }
        if next.is_empty() {
            return false;
        }
        next.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged = Vec::with_capacity(next.len());
        for iv in next {
            push_merged(&mut merged, iv);
        }
        reach = merged;
    }
    false
}
