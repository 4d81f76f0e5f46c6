//! Càdlàg paths on `[0, 1]` with finitely many breakpoints.
//!
//! A path is either a right-continuous step function or a continuous
//! piecewise-linear function. Both hold `d` coordinates per breakpoint
//! (flat, row-major) and are immutable once built.

mod graph;
mod j1;
mod m1;
mod ops;

pub use graph::{CompletedGraph, JumpSegment, ParametricRep};
pub use j1::j1_distance;
pub use m1::{
    is_monotone_nondecreasing, m1_distance, m1_estimate, m1_tolerance, monotone_m1_distance,
    weak_m1_distance, M1Estimate,
};
pub use ops::{product_path, ratio_path, ProductPath};

use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Step,
    PiecewiseLinear,
}

impl PathKind {
    pub fn tag(self) -> &'static str {
        match self {
            PathKind::Step => "step",
            PathKind::PiecewiseLinear => "pl",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
    kind: PathKind,
}

impl CadlagPath {
    /// Builds a path from breakpoint times and row-major values
    /// (`values.len() == times.len() * dim`).
    pub fn new(kind: PathKind, dim: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if times.is_empty() {
            return Err(Error::InvalidPath("a path needs a value at t=0".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values for {} breakpoints of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!(
                "first breakpoint must be 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidPath(format!(
                    "breakpoints not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let last = *times.last().unwrap();
        if !(last <= 1.0) {
            return Err(Error::InvalidPath(format!("breakpoint {last} beyond 1")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPath(format!("non-finite value {v}")));
        }
        Ok(Self {
            times,
            values,
            dim,
            kind,
        })
    }

    pub fn step(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(PathKind::Step, 1, times, values)
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(PathKind::PiecewiseLinear, 1, times, values)
    }

    pub fn constant(value: f64) -> Self {
        Self::step(vec![0.0], vec![value]).expect("finite constant")
    }

    /// Two-coordinate step path.
    pub fn step2(times: Vec<f64>, first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::DimensionMismatch {
                left: first.len(),
                right: second.len(),
            });
        }
        let values = first
            .iter()
            .zip(second)
            .flat_map(|(&a, &b)| [a, b])
            .collect();
        Self::new(PathKind::Step, 2, times, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Row `i` of the stored values.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Values of one coordinate, in breakpoint order.
    pub fn coordinate_values(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.dim + c]).collect()
    }

    pub fn coordinate(&self, c: usize) -> Result<CadlagPath> {
        if c >= self.dim {
            return Err(Error::Domain(format!(
                "coordinate {c} out of range for dimension {}",
                self.dim
            )));
        }
        Self::new(self.kind, 1, self.times.clone(), self.coordinate_values(c))
    }

    /// Right-continuous value at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t={t} outside [0,1]")));
        }
        Ok((0..self.dim).map(|c| self.value_at(c, t)).collect())
    }

    /// Left limit at `t` in `(0, 1]`.
    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!(
                "left limit needs t in (0,1], got {t}"
            )));
        }
        Ok((0..self.dim).map(|c| self.left_value_at(c, t)).collect())
    }

    pub(crate) fn value_at(&self, c: usize, t: f64) -> f64 {
        // index of the last breakpoint <= t
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        match self.kind {
            PathKind::Step => self.values[i * self.dim + c],
            PathKind::PiecewiseLinear => self.interpolate(c, i, t),
        }
    }

    /// Left limit with the convention `x(0-) = x(0)`.
    pub(crate) fn left_value_at(&self, c: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[c];
        }
        match self.kind {
            PathKind::Step => {
                let i = self.times.partition_point(|&s| s < t).saturating_sub(1);
                self.values[i * self.dim + c]
            }
            PathKind::PiecewiseLinear => self.value_at(c, t),
        }
    }

    fn interpolate(&self, c: usize, i: usize, t: f64) -> f64 {
        let d = self.dim;
        if i + 1 >= self.times.len() {
            return self.values[i * d + c];
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i * d + c], self.values[(i + 1) * d + c]);
        if t <= t0 {
            return v0;
        }
        let w = (t - t0) / (t1 - t0);
        v0 + w * (v1 - v0)
    }

    /// Breakpoint indices where the step path jumps (some coordinate changes).
    pub fn jump_indices(&self) -> Vec<usize> {
        if self.kind == PathKind::PiecewiseLinear {
            return Vec::new();
        }
        (1..self.len())
            .filter(|&i| self.row(i) != self.row(i - 1))
            .collect()
    }

    pub fn jump_count(&self) -> usize {
        self.jump_indices().len()
    }

    /// Drops breakpoints that carry no jump (step) or no slope change (pl).
    pub fn normalized(&self) -> CadlagPath {
        let mut keep = vec![0usize];
        match self.kind {
            PathKind::Step => keep.extend(self.jump_indices()),
            PathKind::PiecewiseLinear => {
                for i in 1..self.len() {
                    let last = i + 1 == self.len();
                    if last || !self.collinear(*keep.last().unwrap(), i, i + 1) {
                        keep.push(i);
                    }
                }
            }
        }
        let times = keep.iter().map(|&i| self.times[i]).collect();
        let values = keep.iter().flat_map(|&i| self.row(i).to_vec()).collect();
        CadlagPath {
            times,
            values,
            dim: self.dim,
            kind: self.kind,
        }
    }

    fn collinear(&self, a: usize, b: usize, c: usize) -> bool {
        let (ta, tb, tc) = (self.times[a], self.times[b], self.times[c]);
        (0..self.dim).all(|k| {
            let (va, vb, vc) = (self.row(a)[k], self.row(b)[k], self.row(c)[k]);
            (vb - va) * (tc - ta) == (vc - va) * (tb - ta)
        })
    }

    /// Step approximation of a piecewise-linear path: each linear piece
    /// becomes `refine` constant pieces taking the value at their left end.
    pub fn to_step(&self, refine: usize) -> CadlagPath {
        if self.kind == PathKind::Step {
            return self.clone();
        }
        let refine = refine.max(1);
        let mut times = Vec::with_capacity(self.len() * refine);
        let mut values = Vec::with_capacity(self.len() * refine * self.dim);
        for i in 0..self.len() {
            let t0 = self.times[i];
            if i + 1 == self.len() {
                times.push(t0);
                values.extend_from_slice(self.row(i));
                break;
            }
            let t1 = self.times[i + 1];
            let h = (t1 - t0) / refine as f64;
            for k in 0..refine {
                let t = t0 + k as f64 * h;
                if times.last().is_some_and(|&p| t <= p) {
                    continue;
                }
                times.push(t);
                values.extend((0..self.dim).map(|c| self.interpolate(c, i, t)));
            }
        }
        CadlagPath {
            times,
            values,
            dim: self.dim,
            kind: PathKind::Step,
        }
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> CadlagPath {
        CadlagPath {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV text: `# kind=<step|pl> d=<dim>`, a column header, then rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# kind={} d={}\n", self.kind.tag(), self.dim);
        out.push('t');
        for c in 1..=self.dim {
            let _ = write!(out, ",v{c}");
        }
        out.push('\n');
        self.write_rows(&mut out);
        out
    }

    pub(crate) fn write_rows(&self, out: &mut String) {
        for i in 0..self.len() {
            out.push_str(&fmt_f64(self.times[i]));
            for v in self.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
    }

    /// Parses the format written by [`CadlagPath::to_csv`]. Comment lines
    /// other than the leading `# kind=... d=...` are ignored, as is a
    /// non-numeric column header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = PathKind::Step;
        let mut dim: Option<usize> = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let row = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(k) = tok.strip_prefix("kind=") {
                        kind = match k {
                            "step" => PathKind::Step,
                            "pl" => PathKind::PiecewiseLinear,
                            other => {
                                return Err(Error::Parse {
                                    row,
                                    msg: format!("unknown kind `{other}`"),
                                })
                            }
                        };
                    } else if let Some(d) = tok.strip_prefix("d=") {
                        dim = Some(d.parse().map_err(|_| Error::Parse {
                            row,
                            msg: format!("bad dimension `{d}`"),
                        })?);
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0] == "t" {
                continue;
            }
            let nums = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    row,
                    msg: format!("malformed number in `{line}`: {e}"),
                })?;
            let d = *dim.get_or_insert(nums.len() - 1);
            if nums.len() != d + 1 || d == 0 {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected {} columns, found {}", d + 1, nums.len()),
                });
            }
            times.push(nums[0]);
            values.extend_from_slice(&nums[1..]);
        }
        let dim = dim.ok_or(Error::Parse {
            row: 0,
            msg: "no data rows".into(),
        })?;
        Self::new(kind, dim, times, values)
    }
}

/// 17 significant digits, as used in every emitted artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_same_dim(x: &CadlagPath, y: &CadlagPath) -> Result<()> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch {
            left: x.dim,
            right: y.dim,
        });
    }
    Ok(())
}

/// Sorted union of breakpoints of both paths, always including 1.
pub(crate) fn merged_times(x: &CadlagPath, y: &CadlagPath) -> Vec<f64> {
    let mut ts: Vec<f64> = x.times.iter().chain(&y.times).copied().collect();
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Sup-norm distance (max over coordinates). Between consecutive merged
/// breakpoints both paths are affine, so the supremum is attained at a
/// breakpoint value or a left limit.
pub fn uniform_distance(x: &CadlagPath, y: &CadlagPath) -> Result<f64> {
    check_same_dim(x, y)?;
    let mut sup = 0.0f64;
    for &t in &merged_times(x, y) {
        for c in 0..x.dim {
            sup = sup.max((x.value_at(c, t) - y.value_at(c, t)).abs());
            if t > 0.0 {
                sup = sup.max((x.left_value_at(c, t) - y.left_value_at(c, t)).abs());
            }
        }
    }
    Ok(sup)
}
