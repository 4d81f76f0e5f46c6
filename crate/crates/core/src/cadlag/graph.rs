use super::{CadlagPath, PathKind};
use crate::error::{Error, Result};

/// The segment `[x(t-), x(t)]` filled in at a jump time.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSegment {
    pub time: f64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

/// Graph of a path with line segments filled in at every jump (thin graph).
#[derive(Debug, Clone)]
pub struct CompletedGraph {
    path: CadlagPath,
    segments: Vec<JumpSegment>,
}

/// A sampled parametric representation `s -> (r(s), u(s))` of a completed
/// graph; `u` is row-major with `dim` coordinates per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricRep {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub dim: usize,
}

impl ParametricRep {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn point(&self, i: usize) -> (f64, &[f64]) {
        (self.r[i], &self.u[i * self.dim..(i + 1) * self.dim])
    }
}

impl CompletedGraph {
    pub fn new(path: &CadlagPath) -> Self {
        let path = path.normalized();
        let segments = path
            .jump_indices()
            .into_iter()
            .map(|i| JumpSegment {
                time: path.times[i],
                from: path.row(i - 1).to_vec(),
                to: path.row(i).to_vec(),
            })
            .collect();
        Self { path, segments }
    }

    pub fn segments(&self) -> &[JumpSegment] {
        &self.segments
    }

    /// Vertices of the graph as a polyline in `(t, x)` space, in graph order.
    pub fn vertices(&self) -> Vec<(f64, Vec<f64>)> {
        let p = &self.path;
        let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(2 * p.len() + 1);
        out.push((0.0, p.row(0).to_vec()));
        for i in 1..p.len() {
            let t = p.times[i];
            if p.kind == PathKind::Step {
                out.push((t, p.row(i - 1).to_vec()));
            }
            out.push((t, p.row(i).to_vec()));
        }
        let last = out.last().unwrap().clone();
        if last.0 < 1.0 {
            out.push((1.0, last.1));
        }
        out.dedup();
        out
    }

    /// Samples roughly `resolution` points along the graph, keeping every
    /// vertex, with spacing proportional to the L1 length of each edge.
    pub fn representation(&self, resolution: usize) -> ParametricRep {
        let verts = self.vertices();
        let dim = self.path.dim;
        let edge_len = |a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)| {
            (b.0 - a.0).abs() + a.1.iter().zip(&b.1).map(|(x, y)| (y - x).abs()).sum::<f64>()
        };
        let total: f64 = verts.windows(2).map(|w| edge_len(&w[0], &w[1])).sum();
        let mut r = vec![verts[0].0];
        let mut u = verts[0].1.clone();
        for w in verts.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let share = if total > 0.0 {
                edge_len(a, b) / total
            } else {
                0.0
            };
            let pieces = ((resolution as f64 * share).round() as usize).max(1);
            for k in 1..=pieces {
                let s = k as f64 / pieces as f64;
                r.push(a.0 + s * (b.0 - a.0));
                u.extend(a.1.iter().zip(&b.1).map(|(x, y)| x + s * (y - x)));
            }
        }
        ParametricRep { r, u, dim }
    }

    /// Whether `(t, value)` lies on the graph within `tol` (max norm).
    pub fn contains(&self, t: f64, value: &[f64], tol: f64) -> bool {
        if !(-tol..=1.0 + tol).contains(&t) || value.len() != self.path.dim {
            return false;
        }
        for seg in &self.segments {
            if (seg.time - t).abs() <= tol && on_segment(&seg.from, &seg.to, value, tol) {
                return true;
            }
        }
        let tc = t.clamp(0.0, 1.0);
        (0..self.path.dim).all(|c| (self.path.value_at(c, tc) - value[c]).abs() <= tol)
    }

    /// Checks the representation invariants: `r` nondecreasing from 0 to 1,
    /// every sample on the graph.
    pub fn validate(&self, rep: &ParametricRep, tol: f64) -> Result<()> {
        if rep.is_empty() || rep.r[0] != 0.0 || *rep.r.last().unwrap() != 1.0 {
            return Err(Error::Precondition(
                "representation must run from r=0 to r=1".into(),
            ));
        }
        if rep.r.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition("r is not nondecreasing".into()));
        }
        for i in 0..rep.len() {
            let (t, v) = rep.point(i);
            if !self.contains(t, v, tol) {
                return Err(Error::Precondition(format!(
                    "sample {i} at t={t} is off the completed graph"
                )));
            }
        }
        Ok(())
    }
}

fn on_segment(a: &[f64], b: &[f64], p: &[f64], tol: f64) -> bool {
    // project onto the segment direction, then check the residual
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
    let lambda = if d2 > 0.0 {
        let dot: f64 = a
            .iter()
            .zip(b)
            .zip(p)
            .map(|((x, y), z)| (y - x) * (z - x))
            .sum();
        (dot / d2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a.iter()
        .zip(b)
        .zip(p)
        .all(|((x, y), z)| (x + lambda * (y - x) - z).abs() <= tol)
}
