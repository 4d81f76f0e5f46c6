use super::{merged_times, CadlagPath, PathKind};
use crate::error::{Error, Result};

/// Result of [`product_path`].
#[derive(Debug, Clone)]
pub struct ProductPath {
    pub path: CadlagPath,
    /// Set when some common jump has `[x(t)-x(t-)][y(t)-y(t-)] < 0`;
    /// multiplication is not guaranteed continuous at such inputs.
    pub opposite_jump_warning: bool,
    pub opposite_jump_times: Vec<f64>,
}

fn check_divisor(y: &CadlagPath) -> Result<()> {
    if y.dim() != 1 {
        return Err(Error::Precondition(format!(
            "divisor must be one-dimensional, got dimension {}",
            y.dim()
        )));
    }
    if y.kind() == PathKind::Step && y.jump_count() > 0 {
        return Err(Error::Precondition(
            "divisor not in C0-up: continuity violated (it jumps)".into(),
        ));
    }
    if !(y.values[0] > 0.0) {
        return Err(Error::Precondition(format!(
            "divisor not in C0-up: positivity violated, y(0) = {}",
            y.values[0]
        )));
    }
    if y.values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition(
            "divisor not in C0-up: monotonicity violated (y decreases)".into(),
        ));
    }
    Ok(())
}

/// Combines `x` (any dimension) with the scalar path `y` on the merged
/// breakpoint grid. With a constant `y` the grid and kind of `x` are kept.
fn combine(x: &CadlagPath, y: &CadlagPath, f: impl Fn(f64, f64) -> f64) -> Result<CadlagPath> {
    let d = x.dim();
    if y.len() == 1 || (y.kind() == PathKind::Step && y.jump_count() == 0 && y.dim() == 1) {
        let c = y.values[0];
        let values = x.values.iter().map(|&v| f(v, c)).collect();
        return CadlagPath::new(x.kind(), d, x.times.clone(), values);
    }
    let mut times = merged_times(x, y);
    if x.times.last() != Some(&1.0) && y.times.last() != Some(&1.0) {
        times.pop();
    }
    let kind = if x.kind() == PathKind::Step && y.kind() == PathKind::Step {
        PathKind::Step
    } else if x.kind() == PathKind::PiecewiseLinear || x.jump_count() == 0 {
        PathKind::PiecewiseLinear
    } else {
        // step numerator over a continuous divisor: sampled on the grid
        PathKind::Step
    };
    let mut values = Vec::with_capacity(times.len() * d);
    for &t in &times {
        let yv = y.value_at(0, t);
        values.extend((0..d).map(|c| f(x.value_at(c, t), yv)));
    }
    CadlagPath::new(kind, d, times, values)
}

/// Pointwise `x / y` for a divisor in C0-up (continuous, nondecreasing,
/// `y(0) > 0`). Exact at every merged breakpoint.
pub fn ratio_path(x: &CadlagPath, y: &CadlagPath) -> Result<CadlagPath> {
    check_divisor(y)?;
    combine(x, y, |a, b| a / b)
}

/// Pointwise product with a scalar path `y`, flagging common jumps of
/// opposite sign.
pub fn product_path(x: &CadlagPath, y: &CadlagPath) -> Result<ProductPath> {
    if y.dim() != 1 && y.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let path = if y.dim() == 1 {
        combine(x, y, |a, b| a * b)?
    } else {
        let times = merged_times(x, y);
        let kind = if x.kind() == PathKind::Step && y.kind() == PathKind::Step {
            PathKind::Step
        } else {
            PathKind::PiecewiseLinear
        };
        let mut values = Vec::with_capacity(times.len() * x.dim());
        for &t in &times {
            values.extend((0..x.dim()).map(|c| x.value_at(c, t) * y.value_at(c, t)));
        }
        CadlagPath::new(kind, x.dim(), times, values)?
    };
    let mut opposite = Vec::new();
    for &t in x.times().iter().skip(1) {
        if !y.times().contains(&t) {
            continue;
        }
        let bad = (0..x.dim()).any(|c| {
            let yc = if y.dim() == 1 { 0 } else { c };
            let dx = x.value_at(c, t) - x.left_value_at(c, t);
            let dy = y.value_at(yc, t) - y.left_value_at(yc, t);
            dx * dy < 0.0
        });
        if bad {
            opposite.push(t);
        }
    }
    Ok(ProductPath {
        path,
        opposite_jump_warning: !opposite.is_empty(),
        opposite_jump_times: opposite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_divisor_reproduces_numerator_bitwise() {
        let x = CadlagPath::step(vec![0.0, 0.1, 0.7], vec![0.3, -1.7, 1e-300]).unwrap();
        let r = ratio_path(&x, &CadlagPath::constant(1.0)).unwrap();
        assert_eq!(r, x);
        let pl = CadlagPath::piecewise_linear(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let r = ratio_path(&x, &pl).unwrap();
        for (a, b) in r.values.iter().zip(&x.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn constant_over_increasing_divisor() {
        let c = 2.5;
        let ts: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let y = CadlagPath::piecewise_linear(ts.clone(), ts.iter().map(|t| c * (1.0 + t)).collect())
            .unwrap();
        let r = ratio_path(&CadlagPath::constant(c), &y).unwrap();
        // pointwise grid oracle
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let want = 1.0 / (1.0 + t);
            assert!((r.value_at(0, t) - want).abs() < 2e-3, "t={t}");
        }
        for &t in &ts {
            assert!((r.value_at(0, t) - 1.0 / (1.0 + t)).abs() < 1e-15);
        }
    }

    #[test]
    fn divisor_preconditions_are_named() {
        let x = CadlagPath::constant(1.0);
        let zero_start =
            CadlagPath::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let err = ratio_path(&x, &zero_start).unwrap_err().to_string();
        assert!(err.contains("positivity"), "{err}");
        let jumpy = CadlagPath::step(vec![0.0, 0.5], vec![1.0, 2.0]).unwrap();
        assert!(ratio_path(&x, &jumpy).unwrap_err().to_string().contains("continuity"));
        let down = CadlagPath::piecewise_linear(vec![0.0, 1.0], vec![2.0, 1.0]).unwrap();
        assert!(ratio_path(&x, &down).unwrap_err().to_string().contains("monotonicity"));
    }

    #[test]
    fn products() {
        let step = CadlagPath::step(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        let p = product_path(&step, &CadlagPath::constant(1.0)).unwrap();
        assert_eq!(p.path, step);
        assert!(!p.opposite_jump_warning);
        let sq = product_path(&step, &step).unwrap();
        assert_eq!(sq.path.value_at(0, 0.4), 0.0);
        assert_eq!(sq.path.value_at(0, 0.5), 1.0);
        assert!(!sq.opposite_jump_warning);
        let down = CadlagPath::step(vec![0.0, 0.5], vec![2.0, 1.0]).unwrap();
        let w = product_path(&step, &down).unwrap();
        assert!(w.opposite_jump_warning);
        assert_eq!(w.opposite_jump_times, vec![0.5]);
        assert_eq!(w.path.value_at(0, 0.7), 1.0);
    }
}
