//! Backward solvers for the weight equation along a single branch.
//!
//! Along a branch parameterized on `[0, T]` the weight satisfies
//!
//! ```text
//! w(t) = ∫_t^T f(w(s)) ds + m(t) + extra
//! ```
//!
//! where `m` is a non-increasing step function. Between knots of `m` the
//! equation is the ODE `w' = -f(w)`, and at each knot `w` jumps by exactly the
//! jump of `m`. All laws here have the form `f(w) = rate * w^beta` with a
//! rate that is constant on each piece, so every piece has a closed form:
//!
//! ```text
//! w(s) = ( w_end^(1-beta) + rate (1-beta) (end - s) )^(1/(1-beta))
//! ```
//!
//! with the exponential limit at `beta = 1`. A classical RK4 integrator is
//! kept alongside as an independent route.

use crate::error::{Error, Result};
use crate::geometry::PolylinePath;
use crate::law::WeightLaw;
use crate::quadrature::adaptive_simpson;
use crate::step::{dominated, StepFunction};

/// Multiplicities at or below this value are rejected.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Below this `1 - beta` the exponential limit of the closed form is used.
const LINEAR_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    ClosedForm,
    /// Fixed-step RK4; `None` uses `1e-3 * min(piece length, 1)` per piece.
    Rk4 { step: Option<f64> },
}

impl Default for SolveMethod {
    fn default() -> Self {
        SolveMethod::ClosedForm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    ClosedForm,
    Simpson { tol: f64 },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::ClosedForm
    }
}

/// An interval `(start, end]` with constant multiplicity and constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolvePiece {
    pub start: f64,
    pub end: f64,
    pub multiplicity: f64,
    pub rate: f64,
}

/// `ln(w(end - dist) / w(end))` for `w' = -rate w^beta`.
fn log_growth(w_end: f64, rate: f64, beta: f64, dist: f64) -> f64 {
    let u = 1.0 - beta;
    if u < LINEAR_LIMIT {
        rate * dist
    } else {
        (rate * u * dist / w_end.powf(u)).ln_1p() / u
    }
}

/// Closed-form weight at distance `dist` before a point where it equals `w_end`.
pub fn closed_form_weight(w_end: f64, rate: f64, beta: f64, dist: f64) -> f64 {
    if rate == 0.0 || dist <= 0.0 {
        return w_end;
    }
    w_end * log_growth(w_end, rate, beta, dist).exp()
}

/// `∫ w(s)^alpha ds` over a piece of length `len` whose right-end weight is `w_end`.
pub fn closed_form_power_integral(w_end: f64, rate: f64, beta: f64, alpha: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if rate == 0.0 {
        return w_end.powf(alpha) * len;
    }
    let e = alpha + 1.0 - beta;
    let g = log_growth(w_end, rate, beta, len);
    w_end.powf(e) * (e * g).exp_m1() / (rate * e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSegment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
    /// Weight at `end`, approached from inside the segment.
    pub terminal: f64,
    /// RK4 samples at `start + k (end - start) / (len - 1)`, when sampled.
    pub samples: Option<Vec<f64>>,
}

impl ProfileSegment {
    fn eval(&self, beta: f64, s: f64) -> f64 {
        match &self.samples {
            None => closed_form_weight(self.terminal, self.rate, beta, self.end - s),
            Some(v) => {
                let n = v.len() - 1;
                if n == 0 {
                    return v[0];
                }
                let h = (self.end - self.start) / n as f64;
                let x = ((s - self.start) / h).clamp(0.0, n as f64);
                let k = (x.floor() as usize).min(n - 1);
                let t = x - k as f64;
                let (y0, y1) = (v[k], v[k + 1]);
                let d0 = -self.rate * y0.powf(beta) * h;
                let d1 = -self.rate * y1.powf(beta) * h;
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * d1
            }
        }
    }

    /// Weight at `start+`.
    pub fn initial(&self, beta: f64) -> f64 {
        match &self.samples {
            None => closed_form_weight(self.terminal, self.rate, beta, self.end - self.start),
            Some(v) => v[0],
        }
    }
}

/// Representation tag of a [`WeightProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    ClosedFormPower,
    Sampled,
}

/// A solved weight function on `[0, T]`, left-continuous at every knot.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    beta: f64,
    segments: Vec<ProfileSegment>,
}

impl WeightProfile {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn segments(&self) -> &[ProfileSegment] {
        &self.segments
    }

    pub fn representation(&self) -> Representation {
        if self.segments.iter().any(|s| s.samples.is_some()) {
            Representation::Sampled
        } else {
            Representation::ClosedFormPower
        }
    }

    pub fn end(&self) -> f64 {
        self.segments.last().unwrap().end
    }

    fn segment_index(&self, s: f64) -> usize {
        let n = self.segments.len();
        self.segments.partition_point(|seg| seg.end < s).min(n - 1)
    }

    /// `W(s)`, left-continuous; `s` is clamped to `[0, T]`.
    pub fn eval(&self, s: f64) -> f64 {
        let seg = &self.segments[self.segment_index(s)];
        seg.eval(self.beta, s.clamp(seg.start, seg.end))
    }

    /// `W(0+)`.
    pub fn initial(&self) -> f64 {
        self.segments[0].initial(self.beta)
    }

    /// `W(T)`.
    pub fn terminal(&self) -> f64 {
        self.segments.last().unwrap().terminal
    }

    /// Knots of the profile (segment boundaries).
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        k.push(self.end());
        k
    }

    /// `∫_0^T W(s)^alpha ds`.
    pub fn integrate_power(&self, alpha: f64, quad: Quadrature) -> Result<f64> {
        match quad {
            Quadrature::ClosedForm => {
                if self.representation() == Representation::Sampled {
                    return Err(Error::ClosedFormUnavailable(
                        "profile was solved numerically".into(),
                    ));
                }
                Ok(self
                    .segments
                    .iter()
                    .map(|seg| {
                        closed_form_power_integral(
                            seg.terminal,
                            seg.rate,
                            self.beta,
                            alpha,
                            seg.end - seg.start,
                        )
                    })
                    .sum())
            }
            Quadrature::Simpson { tol } => Ok(self.integrate_with(|w| w.powf(alpha), tol)),
        }
    }

    /// `∫_lo^hi W(s)^alpha ds` for `0 <= lo <= hi <= T`.
    pub fn integrate_power_range(&self, alpha: f64, lo: f64, hi: f64, quad: Quadrature) -> Result<f64> {
        if self.representation() == Representation::Sampled && quad == Quadrature::ClosedForm {
            return Err(Error::ClosedFormUnavailable(
                "profile was solved numerically".into(),
            ));
        }
        let mut total = 0.0;
        for seg in &self.segments {
            let (a, b) = (seg.start.max(lo), seg.end.min(hi));
            if b <= a {
                continue;
            }
            total += match quad {
                Quadrature::ClosedForm => {
                    let w_b = seg.eval(self.beta, b);
                    closed_form_power_integral(w_b, seg.rate, self.beta, alpha, b - a)
                }
                Quadrature::Simpson { tol } => adaptive_simpson(
                    |s| seg.eval(self.beta, s).powf(alpha),
                    a,
                    b,
                    tol / self.segments.len() as f64,
                ),
            };
        }
        Ok(total)
    }

    /// `∫_0^T g(W(s)) ds` by adaptive Simpson on each smooth segment.
    pub fn integrate_with<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> f64 {
        let per = tol / self.segments.len() as f64;
        self.segments
            .iter()
            .map(|seg| {
                adaptive_simpson(|s| g(seg.eval(self.beta, s)), seg.start, seg.end, per)
            })
            .sum()
    }

    /// `(s, W(s))` at the knots plus `per_segment` interior points per segment.
    pub fn sample(&self, per_segment: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let n = per_segment + 1;
            for k in 0..=n {
                let s = seg.start + (seg.end - seg.start) * k as f64 / n as f64;
                out.push((s, seg.eval(self.beta, s)));
            }
        }
        out
    }
}

/// Solves the weight equation over consecutive pieces.
pub fn solve_pieces(
    pieces: &[SolvePiece],
    beta: f64,
    extra: f64,
    method: SolveMethod,
    floor: f64,
) -> Result<WeightProfile> {
    if pieces.is_empty() {
        return Err(Error::PreconditionViolated("no pieces to solve".into()));
    }
    if !(extra >= 0.0 && extra.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "terminal load {extra} must be nonnegative"
        )));
    }
    for p in pieces {
        if !(p.multiplicity > floor) {
            return Err(Error::NonPositiveMultiplicity {
                value: p.multiplicity,
                floor,
            });
        }
        if !(p.rate >= 0.0 && p.rate.is_finite()) {
            return Err(Error::InvalidLaw(format!("rate {} must be nonnegative", p.rate)));
        }
    }
    for w in pieces.windows(2) {
        if w[1].multiplicity > w[0].multiplicity {
            return Err(Error::InvalidStepFunction("multiplicity must be non-increasing".into()));
        }
    }
    let mut segments = Vec::with_capacity(pieces.len());
    let mut w_end = pieces.last().unwrap().multiplicity + extra;
    for (k, p) in pieces.iter().enumerate().rev() {
        let len = p.end - p.start;
        let (segment, w_start) = match method {
            SolveMethod::ClosedForm => {
                let seg = ProfileSegment {
                    start: p.start,
                    end: p.end,
                    rate: p.rate,
                    terminal: w_end,
                    samples: None,
                };
                let w0 = seg.initial(beta);
                (seg, w0)
            }
            SolveMethod::Rk4 { step } => {
                let samples = rk4_piece(w_end, p.rate, beta, len, step)?;
                let w0 = samples[0];
                (
                    ProfileSegment {
                        start: p.start,
                        end: p.end,
                        rate: p.rate,
                        terminal: w_end,
                        samples: Some(samples),
                    },
                    w0,
                )
            }
        };
        segments.push(segment);
        if k > 0 {
            w_end = w_start + (pieces[k - 1].multiplicity - p.multiplicity);
        }
    }
    segments.reverse();
    Ok(WeightProfile { beta, segments })
}

fn rk4_piece(w_end: f64, rate: f64, beta: f64, len: f64, step: Option<f64>) -> Result<Vec<f64>> {
    if len <= 0.0 {
        return Ok(vec![w_end]);
    }
    let h = match step {
        Some(h) if h > len => return Err(Error::StepTooLarge { step: h, segment: len }),
        Some(h) if h > 0.0 => h,
        Some(h) => {
            return Err(Error::PreconditionViolated(format!("RK4 step {h} must be positive")))
        }
        None => 1e-3 * len.min(1.0),
    };
    let n = (len / h).ceil().max(1.0) as usize;
    let h = len / n as f64;
    let g = |w: f64| rate * w.powf(beta);
    let mut out = vec![0.0; n + 1];
    let mut w = w_end;
    out[n] = w;
    // integrate in the reversed variable sigma = end - s, where dw/dsigma = g(w)
    for k in (0..n).rev() {
        let k1 = g(w);
        let k2 = g(w + 0.5 * h * k1);
        let k3 = g(w + 0.5 * h * k2);
        let k4 = g(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out[k] = w;
    }
    Ok(out)
}

fn check_domain(m: &StepFunction, t_end: f64) -> Result<()> {
    if (m.end() - t_end).abs() > 1e-12 * t_end.max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "multiplicity is defined on [0, {}] but T = {t_end}",
            m.end()
        )));
    }
    Ok(())
}

/// Solves `w(t) = ∫_t^T f(w) + m(t) + extra` for a direction-free law.
pub fn solve_backward(
    f: &WeightLaw,
    m: &StepFunction,
    t_end: f64,
    extra: f64,
    method: SolveMethod,
) -> Result<WeightProfile> {
    solve_backward_masked(f, m, t_end, extra, method, &[])
}

/// As [`solve_backward`], with `f` switched off on the given intervals.
pub fn solve_backward_masked(
    f: &WeightLaw,
    m: &StepFunction,
    t_end: f64,
    extra: f64,
    method: SolveMethod,
    inactive: &[(f64, f64)],
) -> Result<WeightProfile> {
    check_domain(m, t_end)?;
    m.check_floor(DEFAULT_FLOOR)?;
    let rate = f.scalar_rate()?;
    let cuts: Vec<f64> = inactive.iter().flat_map(|&(a, b)| [a, b]).collect();
    let refined = m.refined(&cuts);
    let pieces: Vec<SolvePiece> = refined
        .pieces()
        .map(|(a, b, v)| {
            let mid = 0.5 * (a + b);
            let off = inactive.iter().any(|&(lo, hi)| mid > lo && mid < hi);
            SolvePiece {
                start: a,
                end: b,
                multiplicity: v,
                rate: if off { 0.0 } else { rate },
            }
        })
        .collect();
    solve_pieces(&pieces, f.beta(), extra, method, DEFAULT_FLOOR)
}

/// Solves the weight equation along `path` with a direction-dependent law.
///
/// On every polyline segment the tangent is constant, so the law reduces to
/// `gauge(v) w^beta` there and the scalar closed form applies piecewise.
pub fn solve_backward_directional(
    f: &WeightLaw,
    path: &PolylinePath,
    m: &StepFunction,
    extra: f64,
    method: SolveMethod,
) -> Result<WeightProfile> {
    check_domain(m, path.length())?;
    m.check_floor(DEFAULT_FLOOR)?;
    let refined = m.refined(path.cumulative_lengths());
    let pieces: Vec<SolvePiece> = refined
        .pieces()
        .map(|(a, b, v)| {
            let rate = if b > a {
                f.rate(&path.direction(path.segment_index(0.5 * (a + b))))
            } else {
                0.0
            };
            SolvePiece {
                start: a,
                end: b,
                multiplicity: v,
                rate,
            }
        })
        .collect();
    solve_pieces(&pieces, f.beta(), extra, method, DEFAULT_FLOOR)
}

/// Solves along a branch, dispatching on whether the law depends on direction.
pub fn solve_branch(
    f: &WeightLaw,
    path: &PolylinePath,
    m: &StepFunction,
    extra: f64,
    method: SolveMethod,
) -> Result<WeightProfile> {
    if f.is_directional() {
        solve_backward_directional(f, path, m, extra, method)
    } else {
        solve_backward(f, m, path.length(), extra, method)
    }
}

/// Knots of all step functions plus `per_piece` interior points per interval.
pub fn evaluation_grid(fns: &[&StepFunction], per_piece: usize) -> Vec<f64> {
    let mut knots: Vec<f64> = fns.iter().flat_map(|m| m.knots().iter().copied()).collect();
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut grid = Vec::new();
    for w in knots.windows(2) {
        for k in 0..=per_piece {
            grid.push(w[0] + (w[1] - w[0]) * k as f64 / (per_piece + 1) as f64);
        }
    }
    grid.push(*knots.last().unwrap());
    grid
}

const GRID_PER_PIECE: usize = 64;

fn le_with_slack(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * b.abs().max(1.0)
}

/// Solves for `m1 <= m2` and reports whether `w1 <= w2` on the evaluation grid.
pub fn compare_solutions(
    m1: &StepFunction,
    m2: &StepFunction,
    f: &WeightLaw,
    t_end: f64,
) -> Result<bool> {
    if !dominated(m1, m2, 0.0) {
        return Err(Error::PreconditionViolated("m1 is not below m2".into()));
    }
    let w1 = solve_backward(f, m1, t_end, 0.0, SolveMethod::ClosedForm)?;
    let w2 = solve_backward(f, m2, t_end, 0.0, SolveMethod::ClosedForm)?;
    Ok(evaluation_grid(&[m1, m2], GRID_PER_PIECE)
        .into_iter()
        .all(|t| le_with_slack(w1.eval(t), w2.eval(t))))
}

/// For `Σ ms[i] >= m`, reports whether `Σ w_i >= w` on the evaluation grid.
pub fn superadditivity_check(
    ms: &[StepFunction],
    m: &StepFunction,
    f: &WeightLaw,
    t_end: f64,
) -> Result<bool> {
    let mut refs: Vec<&StepFunction> = ms.iter().collect();
    refs.push(m);
    let grid = evaluation_grid(&refs, GRID_PER_PIECE);
    let sum_m = |t: f64| ms.iter().map(|mi| mi.eval(t)).sum::<f64>();
    if grid.iter().any(|&t| !le_with_slack(m.eval(t), sum_m(t))) {
        return Err(Error::PreconditionViolated("sum of ms is not above m".into()));
    }
    let ws = ms
        .iter()
        .map(|mi| solve_backward(f, mi, t_end, 0.0, SolveMethod::ClosedForm))
        .collect::<Result<Vec<_>>>()?;
    let w = solve_backward(f, m, t_end, 0.0, SolveMethod::ClosedForm)?;
    Ok(grid
        .into_iter()
        .all(|t| le_with_slack(w.eval(t), ws.iter().map(|wi| wi.eval(t)).sum())))
}

/// `||a - b||_{L^1([0, T])}` for two profiles on the same domain.
pub fn profile_l1_distance(a: &WeightProfile, b: &WeightProfile, tol: f64) -> f64 {
    let mut knots = a.knots();
    knots.extend(b.knots());
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    let per = tol / knots.len().max(1) as f64;
    knots
        .windows(2)
        .map(|w| {
            // both profiles are smooth strictly inside (w0, w1)
            let (lo, hi) = (w[0], w[1]);
            adaptive_simpson(
                |s| {
                    let s = s.clamp(lo + (hi - lo) * 1e-12, hi);
                    (a.eval(s) - b.eval(s)).abs()
                },
                lo,
                hi,
                per,
            )
        })
        .sum()
}
