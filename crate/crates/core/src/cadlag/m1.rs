//! Skorokhod M1 distances.
//!
//! For `d = 1` the strong M1 distance is the Fréchet distance, under the
//! max norm on `(t, x)`, between the two completed graphs traversed in
//! graph order. It is computed by bisection over a free-space reachability
//! decision (Alt–Godau) restricted to the band of cells whose time ranges
//! are within `eps` of each other.

use super::{uniform_distance, CadlagPath, CompletedGraph, PathKind};
use crate::error::{Error, Result};

type Pt = [f64; 2];
type Interval = Option<(f64, f64)>;

const EDGE_EPS: f64 = 1e-12;

/// Outcome of the discretized infimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M1Estimate {
    /// Smallest `eps` certified feasible by the decision procedure.
    pub value: f64,
    /// Largest `eps` certified infeasible (0 when the endpoints coincide).
    pub lower: f64,
    /// Uniform distance, always an upper bound.
    pub upper_bound: f64,
}

impl M1Estimate {
    pub fn gap(&self) -> f64 {
        self.value - self.lower
    }

    /// True when the resolution-dependent gap is wider than `tol`.
    pub fn exceeds(&self, tol: f64) -> bool {
        self.gap() > tol
    }
}

/// Bisection tolerance implied by a resolution.
pub fn m1_tolerance(resolution: usize) -> f64 {
    (1.0 / (resolution as f64).powi(2)).max(1e-12)
}

pub fn m1_distance(x: &CadlagPath, y: &CadlagPath, resolution: usize) -> Result<f64> {
    Ok(m1_estimate(x, y, resolution)?.value)
}

pub fn m1_estimate(x: &CadlagPath, y: &CadlagPath, resolution: usize) -> Result<M1Estimate> {
    if x.dim() != 1 || y.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "strong M1 is computed per coordinate; got dimensions {} and {}, use weak_m1_distance",
            x.dim(),
            y.dim()
        )));
    }
    let (xn, yn) = (x.normalized(), y.normalized());
    let needed = [&xn, &yn]
        .iter()
        .map(|p| 2 * (p.jump_count() + p.len()))
        .max()
        .unwrap();
    if resolution < needed {
        return Err(Error::Precondition(format!(
            "resolution {resolution} below 2 x (jumps + breakpoints) = {needed}"
        )));
    }
    let upper = uniform_distance(&xn, &yn)?;
    let p = polyline(&xn);
    let q = polyline(&yn);
    let tol = m1_tolerance(resolution);

    let mut lo = dist(p[0], q[0]).max(dist(*p.last().unwrap(), *q.last().unwrap()));
    if frechet_le(&p, &q, lo) {
        return Ok(M1Estimate {
            value: lo,
            lower: lo,
            upper_bound: upper,
        });
    }
    let mut hi = upper.max(lo);
    while !frechet_le(&p, &q, hi) {
        // only reachable through rounding in the free-interval arithmetic
        hi = hi * (1.0 + 1e-9) + 1e-12;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if frechet_le(&p, &q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(M1Estimate {
        value: hi,
        lower: lo,
        upper_bound: upper,
    })
}

/// Product (weak M1) metric: the largest per-coordinate M1 distance.
pub fn weak_m1_distance(x: &CadlagPath, y: &CadlagPath, resolution: usize) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let mut worst = 0.0f64;
    for c in 0..x.dim() {
        worst = worst.max(m1_distance(&x.coordinate(c)?, &y.coordinate(c)?, resolution)?);
    }
    Ok(worst)
}

pub fn is_monotone_nondecreasing(path: &CadlagPath) -> bool {
    path.dim() == 1 && path.values.windows(2).all(|w| w[1] >= w[0])
}

/// M1 distance between nondecreasing paths.
///
/// Completed graphs of nondecreasing paths are chains in the coordinatewise
/// order, so the distance reduces to a two-sided condition on time-shifted
/// values: `d <= eps` iff for all `t`
/// `x(t) <= y(t + eps) + eps` and `x(t-) >= y((t - eps)-) - eps`, and the
/// same with `x`, `y` swapped (shifted times clamped to `[0, 1]`). Both
/// sides are affine between the candidate times collected below, so the
/// check is exact; the infimum is then located by bisection.
pub fn monotone_m1_distance(x: &CadlagPath, y: &CadlagPath) -> Result<f64> {
    for p in [x, y] {
        if !is_monotone_nondecreasing(p) {
            return Err(Error::Precondition(
                "monotone_m1_distance needs one-dimensional nondecreasing paths".into(),
            ));
        }
    }
    let upper = uniform_distance(x, y)?;
    if monotone_le(x, y, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, upper);
    while !monotone_le(x, y, hi) {
        hi = hi * (1.0 + 1e-9) + 1e-12;
    }
    let tol = 1e-13 * upper.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if monotone_le(x, y, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn monotone_le(x: &CadlagPath, y: &CadlagPath, eps: f64) -> bool {
    let mut cand: Vec<f64> = vec![0.0, 1.0, eps.min(1.0), (1.0 - eps).max(0.0)];
    for p in [x, y] {
        for &t in p.times() {
            cand.extend([t, t - eps, t + eps]);
        }
    }
    let mut cand: Vec<f64> = cand
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .collect();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    one_sided_ok(x, y, eps, &cand) && one_sided_ok(y, x, eps, &cand)
}

fn one_sided_ok(x: &CadlagPath, y: &CadlagPath, eps: f64, cand: &[f64]) -> bool {
    let xr = |t: f64| x.value_at(0, t);
    let xl = |t: f64| x.left_value_at(0, t);
    let yr = |t: f64| y.value_at(0, t.clamp(0.0, 1.0));
    let yl = |t: f64| y.left_value_at(0, t.clamp(0.0, 1.0));
    for &c in cand {
        // x(t) <= y(min(t + eps, 1)) + eps, right values and left limits
        if xr(c) - yr(c + eps) > eps {
            return false;
        }
        if c > 0.0 {
            let g_left = if c + eps <= 1.0 { yl(c + eps) } else { yr(1.0) };
            if xl(c) - g_left > eps {
                return false;
            }
        }
        // x(t-) >= y((max(t - eps, 0))-) - eps, values and right limits
        if yl(c - eps) - xl(c) > eps {
            return false;
        }
        let h_right = if c - eps >= 0.0 { yr(c - eps) } else { yr(0.0) };
        if h_right - xr(c) > eps {
            return false;
        }
    }
    true
}

pub(crate) fn polyline(path: &CadlagPath) -> Vec<Pt> {
    debug_assert_eq!(path.dim(), 1);
    if path.kind() == PathKind::Step && path.len() > 1 {
        // fast path for long step paths
        let mut out = Vec::with_capacity(2 * path.len() + 1);
        out.push([0.0, path.values[0]]);
        for i in 1..path.len() {
            let t = path.times[i];
            out.push([t, path.values[i - 1]]);
            out.push([t, path.values[i]]);
        }
        if path.times[path.len() - 1] < 1.0 {
            out.push([1.0, path.values[path.len() - 1]]);
        }
        out.dedup();
        return out;
    }
    CompletedGraph::new(path)
        .vertices()
        .into_iter()
        .map(|(t, v)| [t, v[0]])
        .collect()
}

fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Parameters `s in [0,1]` with `|p - (a + s (b - a))|_inf <= eps`.
fn free_interval(p: Pt, a: Pt, b: Pt, eps: f64) -> Interval {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = b[k] - a[k];
        let off = p[k] - a[k];
        if d == 0.0 {
            if off.abs() > eps {
                return None;
            }
        } else {
            let (s1, s2) = ((off - eps) / d, (off + eps) / d);
            lo = lo.max(s1.min(s2));
            hi = hi.min(s1.max(s2));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn starts_at_zero(iv: Interval) -> bool {
    iv.is_some_and(|(lo, _)| lo <= EDGE_EPS)
}

fn reaches_one(iv: Interval) -> bool {
    iv.is_some_and(|(_, hi)| hi >= 1.0 - EDGE_EPS)
}

/// Reachable part of a cell's exit edge, given its free interval and the
/// reachable parts of the cell's two entry edges. `along` is the entry edge
/// parallel to the exit edge; `across` the other one.
fn propagate(free: Interval, along: Interval, across: Interval) -> Interval {
    let (a, b) = free?;
    if across.is_some() {
        return Some((a, b));
    }
    let (l, _) = along?;
    let lo = a.max(l);
    (lo <= b).then_some((lo, b))
}

/// Alt–Godau decision `Fréchet(p, q) <= eps`, visiting only cells whose
/// time ranges overlap within `eps`.
pub(crate) fn frechet_le(p: &[Pt], q: &[Pt], eps: f64) -> bool {
    let (np, nq) = (p.len() - 1, q.len() - 1);
    if dist(p[0], q[0]) > eps || dist(p[np], q[nq]) > eps {
        return false;
    }
    if np == 0 || nq == 0 {
        // a degenerate curve is a single point
        let (pt, other) = if np == 0 { (p[0], q) } else { (q[0], p) };
        return other.iter().all(|&v| dist(pt, v) <= eps);
    }
    let q_times: Vec<f64> = q.iter().map(|v| v[0]).collect();
    let band = |i: usize| -> (usize, usize) {
        let t0 = p[i][0] - eps;
        let t1 = p[i + 1][0] + eps;
        // first j with q[j+1].t >= t0, last j with q[j].t <= t1
        let jlo = q_times[1..].partition_point(|&t| t < t0);
        let jhi = q_times.partition_point(|&t| t <= t1).saturating_sub(1).min(nq - 1);
        (jlo.min(nq - 1), jhi)
    };

    // reachable right edges of the previous row: (first j, intervals)
    let mut prev: (usize, Vec<Interval>) = (0, Vec::new());
    // reachability along the left boundary (i = 0)
    let mut left_boundary: Vec<Interval> = Vec::new();
    {
        let mut ok = true;
        for j in 0..nq {
            let iv = if ok { free_interval(p[0], q[j], q[j + 1], eps) } else { None };
            let iv = if starts_at_zero(iv) { iv } else { None };
            ok = reaches_one(iv);
            left_boundary.push(iv);
            if !ok {
                break;
            }
        }
    }
    let mut bottom_ok = true;
    for i in 0..np {
        let (jlo, jhi) = band(i);
        if jlo > jhi {
            return false;
        }
        if jlo > 0 {
            bottom_ok = false;
        }
        let mut row: Vec<Interval> = Vec::with_capacity(jhi - jlo + 1);
        let mut top_in: Interval = None;
        for j in jlo..=jhi {
            let left_in = if i == 0 {
                left_boundary.get(j).copied().flatten()
            } else if j >= prev.0 && j - prev.0 < prev.1.len() {
                prev.1[j - prev.0]
            } else {
                None
            };
            let bottom_in = if j == 0 {
                if bottom_ok {
                    let iv = free_interval(q[0], p[i], p[i + 1], eps);
                    let iv = if starts_at_zero(iv) { iv } else { None };
                    bottom_ok = reaches_one(iv);
                    iv
                } else {
                    None
                }
            } else if j == jlo {
                None
            } else {
                top_in
            };
            let right_free = free_interval(p[i + 1], q[j], q[j + 1], eps);
            let top_free = free_interval(q[j + 1], p[i], p[i + 1], eps);
            let right_out = propagate(right_free, left_in, bottom_in);
            let top_out = propagate(top_free, bottom_in, left_in);
            if i == np - 1 && j == nq - 1 {
                return reaches_one(right_out) || reaches_one(top_out);
            }
            row.push(right_out);
            top_in = top_out;
        }
        if jhi < nq - 1 && i == np - 1 {
            return false;
        }
        if row.iter().all(Option::is_none) && !bottom_ok {
            return false;
        }
        prev = (jlo, row);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_step(at: f64) -> CadlagPath {
        CadlagPath::step(vec![0.0, at], vec![0.0, 1.0]).unwrap()
    }

    fn ramp(w: f64) -> CadlagPath {
        CadlagPath::piecewise_linear(vec![0.0, 0.5 - w, 0.5], vec![0.0, 0.0, 1.0]).unwrap()
    }

    /// Discrete Fréchet distance (max norm) between dense samples of both
    /// graphs; overestimates the continuous distance by at most the sample
    /// spacing.
    fn discrete_frechet(x: &CadlagPath, y: &CadlagPath, res: usize) -> f64 {
        let a = CompletedGraph::new(x).representation(res);
        let b = CompletedGraph::new(y).representation(res);
        let d = |i: usize, j: usize| (a.r[i] - b.r[j]).abs().max((a.u[i] - b.u[j]).abs());
        let m = b.len();
        let mut prev = vec![f64::INFINITY; m];
        for i in 0..a.len() {
            let mut cur = vec![f64::INFINITY; m];
            for j in 0..m {
                let reach = if i == 0 && j == 0 {
                    0.0
                } else {
                    let mut r = f64::INFINITY;
                    if i > 0 {
                        r = r.min(prev[j]);
                    }
                    if j > 0 {
                        r = r.min(cur[j - 1]);
                    }
                    if i > 0 && j > 0 {
                        r = r.min(prev[j - 1]);
                    }
                    r
                };
                cur[j] = reach.max(d(i, j));
            }
            prev = cur;
        }
        prev[m - 1]
    }

    #[test]
    fn identity_is_zero() {
        let p = CadlagPath::step(vec![0.0, 0.2, 0.7], vec![1.0, -1.0, 3.0]).unwrap();
        assert_eq!(m1_distance(&p, &p, 1000).unwrap(), 0.0);
    }

    #[test]
    fn time_shifted_steps() {
        let d = m1_distance(&unit_step(0.5), &unit_step(0.55), 1000).unwrap();
        assert!((d - 0.05).abs() <= 1e-6, "{d}");
        let brute = discrete_frechet(&unit_step(0.5), &unit_step(0.55), 4000);
        assert!((brute - 0.05).abs() < 2e-3, "{brute}");
    }

    #[test]
    fn ramp_is_close_to_step() {
        for w in [0.1, 0.01] {
            let d = m1_distance(&unit_step(0.5), &ramp(w), 1000).unwrap();
            // explicit representation: slide the ramp onto the vertical segment
            assert!(d <= w + 1e-6, "w={w}: {d}");
            assert!((d - w / (1.0 + w)).abs() < 1e-5, "w={w}: {d}");
        }
    }

    #[test]
    fn agrees_with_discrete_frechet_oracle() {
        let x = CadlagPath::step(vec![0.0, 0.3, 0.35, 0.8], vec![0.0, 1.0, 0.4, 0.9]).unwrap();
        let y = CadlagPath::step(vec![0.0, 0.32, 0.7], vec![0.1, 0.8, 1.0]).unwrap();
        let d = m1_distance(&x, &y, 1000).unwrap();
        let brute = discrete_frechet(&x, &y, 3000);
        assert!(d <= brute + 1e-9, "{d} vs {brute}");
        assert!(brute - d < 5e-3, "{d} vs {brute}");
    }

    #[test]
    fn rejects_multi_coordinate_and_low_resolution() {
        let two = CadlagPath::step2(vec![0.0], &[0.0], &[0.0]).unwrap();
        assert!(matches!(
            m1_distance(&two, &two, 100),
            Err(Error::Unsupported(_))
        ));
        let p = CadlagPath::step(vec![0.0, 0.1, 0.2, 0.3], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            m1_distance(&p, &p, 5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn weak_m1_takes_coordinatewise_max() {
        let x = CadlagPath::step2(vec![0.0, 0.5], &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(weak_m1_distance(&x, &x, 100).unwrap(), 0.0);
        // second coordinate shifted by a constant gap, no jumps
        let a = CadlagPath::step2(vec![0.0], &[1.0], &[2.0]).unwrap();
        let b = CadlagPath::step2(vec![0.0], &[1.0], &[2.25]).unwrap();
        assert!((weak_m1_distance(&a, &b, 100).unwrap() - 0.25).abs() < 1e-9);
        // coordinates (shifted steps, step vs step) -> {0.05, 0}
        let c = CadlagPath::step2(vec![0.0, 0.5, 0.55], &[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0])
            .unwrap();
        let e = CadlagPath::step2(vec![0.0, 0.5, 0.55], &[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0])
            .unwrap();
        assert!((weak_m1_distance(&c, &e, 100).unwrap() - 0.05).abs() < 1e-4);
    }

    #[test]
    fn monotone_route_examples() {
        let x = unit_step(0.5);
        assert_eq!(monotone_m1_distance(&x, &x).unwrap(), 0.0);
        let d = monotone_m1_distance(&x, &unit_step(0.55)).unwrap();
        assert!((d - 0.05).abs() < 1e-12, "{d}");
        let lin = CadlagPath::piecewise_linear(
            (0..=100).map(|k| k as f64 / 100.0).collect(),
            (0..=100).map(|k| k as f64 / 100.0).collect(),
        )
        .unwrap();
        let sq = CadlagPath::piecewise_linear(
            (0..=100).map(|k| k as f64 / 100.0).collect(),
            (0..=100).map(|k| (k as f64 / 100.0).powi(2)).collect(),
        )
        .unwrap();
        let dm = monotone_m1_distance(&lin, &sq).unwrap();
        let df = m1_distance(&lin, &sq, 1000).unwrap();
        assert!(dm <= uniform_distance(&lin, &sq).unwrap() + 1e-12);
        assert!((dm - df).abs() < 1e-5, "{dm} vs {df}");
        let down = CadlagPath::step(vec![0.0, 0.5], vec![1.0, 0.0]).unwrap();
        assert!(monotone_m1_distance(&down, &x).is_err());
    }

    #[test]
    fn estimate_reports_bounds() {
        let est = m1_estimate(&unit_step(0.5), &unit_step(0.6), 100).unwrap();
        assert!(est.lower <= est.value && est.value <= est.upper_bound);
        assert!(!est.exceeds(1e-3));
        assert!(est.exceeds(0.0) || est.gap() == 0.0);
    }
}
