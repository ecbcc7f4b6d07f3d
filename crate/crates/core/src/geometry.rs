//! Points and arc-length parameterized polylines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance used when comparing path geometry read from files.
pub const DEFAULT_PATH_TOL: f64 = 1e-9;

/// A point in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    /// `self + t * (other - self)`
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const D: usize> From<[f64; D]> for Point {
    fn from(v: [f64; D]) -> Self {
        Point(v.to_vec())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A polyline in R^d together with its cumulative arc lengths.
///
/// Consecutive duplicate vertices are collapsed on construction, so every
/// stored segment has positive length and `cumulative_lengths()[k]` is the
/// distance travelled from the first vertex to vertex `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct PolylinePath {
    vertices: Vec<Point>,
    cumulative: Vec<f64>,
}

impl TryFrom<Vec<Point>> for PolylinePath {
    type Error = Error;

    fn try_from(vertices: Vec<Point>) -> Result<Self> {
        PolylinePath::new(vertices)
    }
}

impl From<PolylinePath> for Vec<Point> {
    fn from(p: PolylinePath) -> Self {
        p.vertices
    }
}

impl PolylinePath {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidGeometry("path has no vertices".into()))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::InvalidGeometry("points must have dimension >= 1".into()));
        }
        let mut kept: Vec<Point> = Vec::with_capacity(vertices.len());
        let mut cumulative = Vec::with_capacity(vertices.len());
        for v in vertices {
            if v.dim() != dim {
                return Err(Error::InvalidGeometry(format!(
                    "mixed dimensions {} and {}",
                    dim,
                    v.dim()
                )));
            }
            if v.0.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGeometry("non-finite coordinate".into()));
            }
            match kept.last() {
                None => {
                    cumulative.push(0.0);
                    kept.push(v);
                }
                Some(prev) => {
                    let d = prev.distance(&v);
                    if d > 0.0 {
                        cumulative.push(cumulative.last().unwrap() + d);
                        kept.push(v);
                    }
                }
            }
        }
        Ok(PolylinePath {
            vertices: kept,
            cumulative,
        })
    }

    /// Builds a path from raw coordinate rows, mainly for tests and examples.
    pub fn from_coords<I, P>(coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: Into<Point>,
    {
        PolylinePath::new(coords.into_iter().map(Into::into).collect())
    }

    pub fn single(point: Point) -> Self {
        PolylinePath {
            vertices: vec![point],
            cumulative: vec![0.0],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cumulative_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn start(&self) -> &Point {
        &self.vertices[0]
    }

    pub fn end(&self) -> &Point {
        self.vertices.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Index `k` of the segment with `cum[k] < s <= cum[k+1]`; `s <= 0` maps to 0.
    pub fn segment_index(&self, s: f64) -> usize {
        let n = self.segment_count();
        if n == 0 {
            return 0;
        }
        // first k with cum[k+1] >= s
        let idx = self.cumulative[1..].partition_point(|&c| c < s);
        idx.min(n - 1)
    }

    /// The point at arc length `s`, clamped to `[0, length]`.
    pub fn point_at(&self, s: f64) -> Point {
        if self.segment_count() == 0 || s <= 0.0 {
            return self.vertices[0].clone();
        }
        if s >= self.length() {
            return self.end().clone();
        }
        let k = self.segment_index(s);
        let (a, b) = (self.cumulative[k], self.cumulative[k + 1]);
        self.vertices[k].lerp(&self.vertices[k + 1], (s - a) / (b - a))
    }

    /// Unit tangent of segment `k`.
    pub fn direction(&self, k: usize) -> Vec<f64> {
        let a = &self.vertices[k].0;
        let b = &self.vertices[k + 1].0;
        let len = self.cumulative[k + 1] - self.cumulative[k];
        a.iter().zip(b).map(|(x, y)| (y - x) / len).collect()
    }

    /// Restriction to the arc-length window `[a, b]`, re-based to start at 0.
    pub fn sub_path(&self, a: f64, b: f64) -> PolylinePath {
        let len = self.length();
        let a = a.clamp(0.0, len);
        let b = b.clamp(a, len);
        let snap = 1e-12 * len.max(1.0);
        let mut pts = vec![self.point_at(a)];
        for (k, &c) in self.cumulative.iter().enumerate() {
            if c > a + snap && c < b - snap {
                pts.push(self.vertices[k].clone());
            }
        }
        if b > a {
            pts.push(self.point_at(b));
        }
        PolylinePath::new(pts).expect("sub-path of a valid path")
    }

    pub fn prefix(&self, t: f64) -> PolylinePath {
        self.sub_path(0.0, t)
    }

    /// Appends `other`, whose first vertex must coincide with this path's end.
    pub fn concat(&self, other: &PolylinePath, tol: f64) -> Result<PolylinePath> {
        if self.end().distance(other.start()) > tol {
            return Err(Error::InvalidGeometry(
                "concatenated path does not start at the previous end".into(),
            ));
        }
        let mut pts = self.vertices.clone();
        pts.extend(other.vertices.iter().skip(1).cloned());
        PolylinePath::new(pts)
    }

    pub fn scaled(&self, factor: f64) -> PolylinePath {
        PolylinePath::new(self.vertices.iter().map(|v| v.scaled(factor)).collect())
            .expect("scaling keeps the path valid")
    }

    /// Sorted, de-duplicated union of both paths' breakpoints, capped at `limit`.
    pub(crate) fn merged_breakpoints(&self, other: &PolylinePath, limit: f64) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .cumulative
            .iter()
            .chain(other.cumulative.iter())
            .copied()
            .filter(|&s| s <= limit)
            .collect();
        all.push(limit);
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup();
        all
    }
}

/// Re-parameterizes a path by arc length, collapsing zero-length segments.
///
/// Paths built through [`PolylinePath::new`] already satisfy this, so the
/// operation is idempotent.
pub fn arc_length_reparam(path: &PolylinePath) -> PolylinePath {
    PolylinePath::new(path.vertices.clone()).expect("vertices of a valid path")
}

/// Whether two paths trace the same curve with the same arc-length map, up to `tol`.
pub fn paths_equivalent(p: &PolylinePath, q: &PolylinePath, tol: f64) -> bool {
    if (p.length() - q.length()).abs() > tol {
        return false;
    }
    let limit = p.length().max(q.length());
    p.merged_breakpoints(q, limit)
        .into_iter()
        .all(|s| p.point_at(s).distance(&q.point_at(s)) <= tol)
}

/// Length of the longest common arc-length prefix of two paths.
///
/// Both paths are affine between consecutive merged breakpoints, so they
/// either agree on a whole interval or separate at its left end; the result is
/// therefore always one of the merged breakpoints.
pub fn common_prefix_length(p: &PolylinePath, q: &PolylinePath, tol: f64) -> f64 {
    if p.start().distance(q.start()) > tol {
        return 0.0;
    }
    let limit = p.length().min(q.length());
    let mut last = 0.0;
    for s in p.merged_breakpoints(q, limit) {
        if p.point_at(s).distance(&q.point_at(s)) <= tol {
            last = s;
        } else {
            break;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(c: &[[f64; 2]]) -> PolylinePath {
        PolylinePath::from_coords(c.iter().copied()).unwrap()
    }

    #[test]
    fn pythagorean_lengths() {
        let p = arc_length_reparam(&path(&[[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]));
        assert_eq!(p.cumulative_lengths(), &[0.0, 3.0, 7.0]);
        assert_eq!(p.vertices().len(), 3);
    }

    #[test]
    fn single_point_path() {
        let p = arc_length_reparam(&path(&[[0.0, 0.0]]));
        assert_eq!(p.cumulative_lengths(), &[0.0]);
        assert_eq!(p.length(), 0.0);
        assert_eq!(p.point_at(3.0), Point::from([0.0, 0.0]));
    }

    #[test]
    fn repeated_vertex_collapsed() {
        let p = arc_length_reparam(&path(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]));
        assert_eq!(p.vertices().len(), 3);
        assert_eq!(p.cumulative_lengths(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PolylinePath::new(vec![]).is_err());
        assert!(PolylinePath::new(vec![Point(vec![0.0]), Point(vec![0.0, 1.0])]).is_err());
        assert!(PolylinePath::new(vec![Point(vec![f64::NAN])]).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let p = path(&[[0.0, 0.0], [2.0, 0.0]]);
        let q = path(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(paths_equivalent(&p, &p, 0.0));
        assert!(paths_equivalent(&p, &q, 0.0));
        let a = path(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = path(&[[0.0, 0.0], [0.0, 1.0]]);
        assert!(!paths_equivalent(&a, &b, 1e-9));
    }

    #[test]
    fn common_prefix_at_vertex() {
        let p = path(&[[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]]);
        let q = path(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 3.0]]);
        assert_eq!(common_prefix_length(&p, &q, 1e-9), 1.0);
        let r = path(&[[0.0, 0.0], [0.0, 1.0]]);
        assert_eq!(common_prefix_length(&p, &r, 1e-9), 0.0);
        // one path is a prefix of the other
        let s = path(&[[0.0, 0.0], [0.7, 0.0]]);
        assert!((common_prefix_length(&p, &s, 1e-9) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn sub_path_and_concat() {
        let p = path(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        let a = p.sub_path(0.0, 0.5);
        let b = p.sub_path(0.5, 2.0);
        assert!((a.length() - 0.5).abs() < 1e-15);
        assert!((b.length() - 1.5).abs() < 1e-15);
        let joined = a.concat(&b, 1e-12).unwrap();
        assert!(paths_equivalent(&joined, &p, 1e-12));
        assert_eq!(p.segment_index(1.0), 0);
        assert_eq!(p.segment_index(1.0 + 1e-9), 1);
    }
}
