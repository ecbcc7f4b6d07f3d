//! Non-increasing, left-continuous step functions on `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One constant piece as written in network files: the value holds on
/// `(s_from, next s_from]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPiece {
    pub s_from: f64,
    pub value: f64,
}

/// `m(t) = values[k]` for `knots[k] < t <= knots[k + 1]`, and `m(0) = values[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || knots.len() != values.len() + 1 {
            return Err(Error::InvalidStepFunction(
                "need one more knot than values".into(),
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidStepFunction("first knot must be 0".into()));
        }
        let degenerate = values.len() == 1 && knots[1] == 0.0;
        if !degenerate && knots.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidStepFunction(
                "knots must be strictly increasing and finite".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidStepFunction(
                "values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidStepFunction("values must be non-increasing".into()));
        }
        Ok(StepFunction { knots, values })
    }

    pub fn constant(value: f64, end: f64) -> Result<Self> {
        StepFunction::new(vec![0.0, end], vec![value])
    }

    /// Builds from `(s_from, value)` pieces covering `[0, end]`.
    pub fn from_pieces(pieces: &[StepPiece], end: f64) -> Result<Self> {
        let mut knots: Vec<f64> = pieces.iter().map(|p| p.s_from).collect();
        knots.push(end);
        StepFunction::new(knots, pieces.iter().map(|p| p.value).collect())
    }

    pub fn to_pieces(&self) -> Vec<StepPiece> {
        self.knots
            .iter()
            .zip(&self.values)
            .map(|(&s_from, &value)| StepPiece { s_from, value })
            .collect()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Value on the first piece, `m(0) = m(0+)`.
    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    /// Value at the right end, `m(T)`.
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn min_value(&self) -> f64 {
        self.terminal()
    }

    /// `(start, end, value)` for every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    fn piece_index(&self, t: f64) -> usize {
        let n = self.values.len();
        self.knots[1..].partition_point(|&k| k < t).min(n - 1)
    }

    /// Left-continuous evaluation; `t` outside `[0, T]` is clamped.
    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.piece_index(t)]
    }

    /// Right limit `m(t+)`; equals `m(T)` at the right end.
    pub fn right_limit(&self, t: f64) -> f64 {
        let n = self.values.len();
        let idx = self.knots[1..].partition_point(|&k| k <= t).min(n - 1);
        self.values[idx]
    }

    pub fn check_floor(&self, floor: f64) -> Result<()> {
        let v = self.terminal();
        if v <= floor {
            Err(Error::NonPositiveMultiplicity { value: v, floor })
        } else {
            Ok(())
        }
    }

    /// Restriction to `[a, b]`, re-based so the result lives on `[0, b - a]`.
    pub fn restrict(&self, a: f64, b: f64) -> StepFunction {
        let snap = 1e-12 * self.end().max(1.0);
        let mut knots = vec![0.0];
        let mut values = vec![self.right_limit(a)];
        if b - a <= 0.0 {
            knots.push(0.0);
            return StepFunction { knots, values };
        }
        for (k, &kn) in self.knots.iter().enumerate().skip(1) {
            if kn > a + snap && kn < b - snap {
                knots.push(kn - a);
                values.push(self.values[k]);
            }
        }
        knots.push(b - a);
        StepFunction { knots, values }
    }

    /// Inserts additional knots without changing the function.
    pub fn refined(&self, extra: &[f64]) -> StepFunction {
        let end = self.end();
        let snap = 1e-12 * end.max(1.0);
        let mut knots = self.knots.clone();
        for &e in extra {
            if e > snap && e < end - snap && knots.iter().all(|k| (k - e).abs() > snap) {
                knots.push(e);
            }
        }
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let values = knots.windows(2).map(|w| self.eval(0.5 * (w[0] + w[1]))).collect();
        StepFunction { knots, values }
    }

    /// Same values with the right end moved to `end`.
    pub fn with_end(&self, end: f64) -> Result<StepFunction> {
        let mut knots = self.knots.clone();
        *knots.last_mut().unwrap() = end;
        StepFunction::new(knots, self.values.clone())
    }

    /// Stretches the domain by `factor`.
    pub fn scaled_domain(&self, factor: f64) -> StepFunction {
        StepFunction {
            knots: self.knots.iter().map(|k| k * factor).collect(),
            values: self.values.clone(),
        }
    }

    pub fn shifted(&self, delta: f64) -> Result<StepFunction> {
        StepFunction::new(
            self.knots.clone(),
            self.values.iter().map(|v| v + delta).collect(),
        )
    }

    /// `L^1([0, T])` distance to another step function on the same domain.
    pub fn l1_distance(&self, other: &StepFunction) -> f64 {
        let r = self.refined(other.knots());
        r.pieces()
            .map(|(a, b, v)| (b - a) * (v - other.eval(0.5 * (a + b))).abs())
            .sum()
    }
}

/// `true` if `lo(t) <= hi(t) + tol` everywhere (both are piecewise constant).
pub fn dominated(lo: &StepFunction, hi: &StepFunction, tol: f64) -> bool {
    let r = lo.refined(hi.knots());
    r.pieces()
        .all(|(a, b, v)| v <= hi.eval(0.5 * (a + b)) + tol)
        && lo.initial() <= hi.initial() + tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_continuous_eval() {
        let m = StepFunction::new(vec![0.0, 0.5, 1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(m.eval(0.0), 2.0);
        assert_eq!(m.eval(0.5), 2.0);
        assert_eq!(m.eval(0.5 + 1e-12), 1.0);
        assert_eq!(m.right_limit(0.5), 1.0);
        assert_eq!(m.eval(1.0), 1.0);
        assert_eq!(m.right_limit(1.0), 1.0);
    }

    #[test]
    fn invariants_enforced() {
        assert!(StepFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 0.5, 0.5], vec![2.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![0.1, 1.0], vec![1.0]).is_err());
        assert!(StepFunction::constant(1.0, 0.0).is_ok());
    }

    #[test]
    fn restrict_and_refine() {
        let m = StepFunction::new(vec![0.0, 0.5, 1.0, 2.0], vec![3.0, 2.0, 1.0]).unwrap();
        let r = m.restrict(0.5, 1.5);
        assert_eq!(r.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(r.values(), &[2.0, 1.0]);
        let f = m.refined(&[0.25, 0.5, 1.75]);
        assert_eq!(f.knots().len(), 6);
        for t in [0.0, 0.3, 0.5, 0.9, 1.2, 1.9, 2.0] {
            assert_eq!(f.eval(t), m.eval(t));
        }
    }

    #[test]
    fn l1_and_domination() {
        let a = StepFunction::constant(1.0, 2.0).unwrap();
        let b = StepFunction::new(vec![0.0, 1.0, 2.0], vec![2.0, 1.0]).unwrap();
        assert!((a.l1_distance(&b) - 1.0).abs() < 1e-15);
        assert!(dominated(&a, &b, 0.0));
        assert!(!dominated(&b, &a, 0.0));
    }
}
