//! Parameterization-free (Fréchet) distance between polylines.
//!
//! [`param_free_distance`] computes the continuous Fréchet distance exactly:
//! the answer is always one of finitely many critical values (endpoint
//! distances, vertex-to-segment distances, and equidistance points of two
//! vertices on a segment), so we sort those candidates and binary search them
//! with the free-space reachability decision procedure of Alt and Godau.
//!
//! [`discrete_bounds`] is the cheaper discrete dynamic program over refined
//! vertex sequences; it brackets the continuous value.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, dot, PolylinePath};

/// Segments longer than `total_length / DEFAULT_REFINEMENT` are subdivided
/// before running the discrete program.
pub const DEFAULT_REFINEMENT: usize = 64;

/// Bracket `[lower, upper]` on the continuous distance from the discrete program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBounds {
    pub lower: f64,
    pub upper: f64,
}

impl DistanceBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lower - tol && x <= self.upper + tol
    }
}

/// Exact continuous Fréchet distance between two polylines.
pub fn param_free_distance(p: &PolylinePath, q: &PolylinePath) -> f64 {
    let a: Vec<&[f64]> = p.vertices().iter().map(|v| v.coords()).collect();
    let b: Vec<&[f64]> = q.vertices().iter().map(|v| v.coords()).collect();
    frechet_exact(&a, &b)
}

fn frechet_exact(p: &[&[f64]], q: &[&[f64]]) -> f64 {
    if p.len() == 1 {
        return q.iter().map(|v| distance(p[0], v)).fold(0.0, f64::max);
    }
    if q.len() == 1 {
        return p.iter().map(|v| distance(q[0], v)).fold(0.0, f64::max);
    }
    let mut candidates = critical_values(p, q);
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup();
    // Every candidate below the endpoint distances fails trivially.
    let floor = distance(p[0], q[0]).max(distance(p[p.len() - 1], q[q.len() - 1]));
    let start = candidates.partition_point(|&c| c < floor);
    let candidates = &candidates[start..];
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    if !decide(p, q, candidates[hi]) {
        // Rounding in the critical-value formulas; fall back to the largest.
        return candidates[hi];
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if decide(p, q, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

fn critical_values(p: &[&[f64]], q: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![
        distance(p[0], q[0]),
        distance(p[p.len() - 1], q[q.len() - 1]),
    ];
    for (x, y) in [(p, q), (q, p)] {
        for v in x {
            for seg in y.windows(2) {
                out.push(point_segment_distance(v, seg[0], seg[1]));
            }
        }
        for i in 0..x.len() {
            for k in (i + 1)..x.len() {
                for seg in y.windows(2) {
                    if let Some(d) = equidistant_on_segment(x[i], x[k], seg[0], seg[1]) {
                        out.push(d);
                    }
                }
            }
        }
    }
    out
}

fn point_segment_distance(v: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let w: Vec<f64> = v.iter().zip(a).map(|(x, y)| x - y).collect();
    let dd = dot(&d, &d);
    let t = if dd > 0.0 { (dot(&w, &d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    let proj: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + t * y).collect();
    distance(v, &proj)
}

/// Distance from `u` (and `v`) to the point of segment `[a, b]` equidistant to both.
fn equidistant_on_segment(u: &[f64], v: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let diff: Vec<f64> = v.iter().zip(u).map(|(x, y)| x - y).collect();
    let denom = 2.0 * dot(&d, &diff);
    if denom == 0.0 {
        return None;
    }
    let rhs = dot(v, v) - dot(u, u) - 2.0 * dot(a, &diff);
    let t = rhs / denom;
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    let x: Vec<f64> = a.iter().zip(&d).map(|(p, q)| p + t * q).collect();
    Some(distance(&x, u))
}

/// Sub-interval of `[0, 1]` where `|a + t (b - a) - v| <= eps`.
fn free_interval(v: &[f64], a: &[f64], b: &[f64], eps: f64) -> Option<(f64, f64)> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let w: Vec<f64> = a.iter().zip(v).map(|(x, y)| x - y).collect();
    let dd = dot(&d, &d);
    let wd = dot(&w, &d);
    let ww = dot(&w, &w);
    let disc = wd * wd - dd * (ww - eps * eps);
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let lo = ((-wd - r) / dd).max(0.0);
    let hi = ((-wd + r) / dd).min(1.0);
    (lo <= hi).then_some((lo, hi))
}

type Interval = Option<(f64, f64)>;

fn decide(p: &[&[f64]], q: &[&[f64]], eps: f64) -> bool {
    let eps = eps * (1.0 + 1e-10) + 1e-13;
    let n = p.len();
    let m = q.len();
    if distance(p[0], q[0]) > eps || distance(p[n - 1], q[m - 1]) > eps {
        return false;
    }
    // left[i][j]: reachable part of the edge {p_i} x segment q_j (param along q)
    // bottom[i][j]: reachable part of segment p_i x {q_j} (param along p)
    let mut left: Vec<Vec<Interval>> = vec![vec![None; m - 1]; n];
    let mut bottom: Vec<Vec<Interval>> = vec![vec![None; m]; n - 1];

    let mut open = true;
    for j in 0..m - 1 {
        let f = free_interval(p[0], q[j], q[j + 1], eps);
        left[0][j] = match f {
            Some((lo, hi)) if open && lo == 0.0 => Some((0.0, hi)),
            _ => None,
        };
        open = matches!(left[0][j], Some((_, hi)) if hi >= 1.0);
    }
    open = true;
    for i in 0..n - 1 {
        let f = free_interval(q[0], p[i], p[i + 1], eps);
        bottom[i][0] = match f {
            Some((lo, hi)) if open && lo == 0.0 => Some((0.0, hi)),
            _ => None,
        };
        open = matches!(bottom[i][0], Some((_, hi)) if hi >= 1.0);
    }

    for i in 0..n - 1 {
        for j in 0..m - 1 {
            let l = left[i][j];
            let b = bottom[i][j];
            let right_free = free_interval(p[i + 1], q[j], q[j + 1], eps);
            left[i + 1][j] = match (b, l, right_free) {
                (_, _, None) => None,
                (Some(_), _, f) => f,
                (None, Some((la, _)), Some((lo, hi))) => {
                    let lo = lo.max(la);
                    (lo <= hi).then_some((lo, hi))
                }
                _ => None,
            };
            let top_free = free_interval(q[j + 1], p[i], p[i + 1], eps);
            bottom[i][j + 1] = match (l, b, top_free) {
                (_, _, None) => None,
                (Some(_), _, f) => f,
                (None, Some((ba, _)), Some((lo, hi))) => {
                    let lo = lo.max(ba);
                    (lo <= hi).then_some((lo, hi))
                }
                _ => None,
            };
        }
    }
    let via_left = matches!(left[n - 1][m - 2], Some((_, hi)) if hi >= 1.0);
    let via_bottom = matches!(bottom[n - 2][m - 1], Some((_, hi)) if hi >= 1.0);
    via_left || via_bottom
}

/// Discrete Fréchet distance over vertex sequences refined so that no
/// segment exceeds `1/refinement` of its path's length, reported as a bracket
/// on the continuous distance.
pub fn discrete_bounds(p: &PolylinePath, q: &PolylinePath, refinement: usize) -> DistanceBounds {
    let (a, da) = refine(p, refinement);
    let (b, db) = refine(q, refinement);
    let upper = discrete_frechet(&a, &b);
    DistanceBounds {
        lower: (upper - da.max(db)).max(0.0),
        upper,
    }
}

fn refine(p: &PolylinePath, refinement: usize) -> (Vec<Vec<f64>>, f64) {
    let max_len = p.length() / refinement.max(1) as f64;
    let mut out = vec![p.start().0.clone()];
    let mut longest: f64 = 0.0;
    let cum = p.cumulative_lengths();
    for k in 0..p.segment_count() {
        let len = cum[k + 1] - cum[k];
        let pieces = if max_len > 0.0 {
            (len / max_len).ceil().max(1.0) as usize
        } else {
            1
        };
        longest = longest.max(len / pieces as f64);
        let (v0, v1) = (&p.vertices()[k], &p.vertices()[k + 1]);
        for r in 1..=pieces {
            out.push(v0.lerp(v1, r as f64 / pieces as f64).0);
        }
    }
    (out, longest)
}

pub(crate) fn discrete_frechet(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, pa) in a.iter().enumerate() {
        for j in 0..m {
            let d = distance(pa, &b[j]);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}
