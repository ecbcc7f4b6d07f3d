//! Weight growth laws `f` and cost integrands `psi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeTerm {
    pub weight: f64,
    pub direction: Vec<f64>,
}

/// `g(v) = norm * |v| + sum_k weight_k * |<v, u_k>|`, with unit vectors `u_k`.
///
/// Nonnegative combinations of norms and absolute linear forms are convex and
/// positively homogeneous of degree one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    #[serde(default)]
    pub norm: f64,
    #[serde(default)]
    pub terms: Vec<GaugeTerm>,
}

impl Gauge {
    pub fn euclidean() -> Self {
        Gauge {
            norm: 1.0,
            terms: Vec::new(),
        }
    }

    /// `|<v, axis>|` for a single coordinate axis.
    pub fn axis(dim: usize, axis: usize) -> Self {
        let mut u = vec![0.0; dim];
        u[axis] = 1.0;
        Gauge {
            norm: 0.0,
            terms: vec![GaugeTerm {
                weight: 1.0,
                direction: u,
            }],
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        let mut g = self.norm * norm(v);
        for t in &self.terms {
            g += t.weight * dot(v, &t.direction).abs();
        }
        g
    }

    fn validated(mut self) -> Result<Self> {
        if !(self.norm >= 0.0 && self.norm.is_finite()) {
            return Err(Error::InvalidLaw(format!(
                "gauge norm coefficient {} must be nonnegative",
                self.norm
            )));
        }
        for t in &mut self.terms {
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::InvalidLaw(format!(
                    "gauge term weight {} must be nonnegative",
                    t.weight
                )));
            }
            let n = norm(&t.direction);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidLaw("gauge direction must be nonzero".into()));
            }
            for x in &mut t.direction {
                *x /= n;
            }
        }
        Ok(self)
    }
}

/// The weight growth law `f`: `W' = -f(W)` or `W' = -f(gamma', W)` along a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightLaw {
    Zero,
    /// `f(W) = c W^beta`.
    Power { c: f64, beta: f64 },
    /// `f(v, W) = gauge(v) W^beta`.
    Directional { gauge: Gauge, beta: f64 },
}

impl WeightLaw {
    pub fn power(c: f64, beta: f64) -> Result<Self> {
        WeightLaw::Power { c, beta }.validated()
    }

    pub fn directional(gauge: Gauge, beta: f64) -> Result<Self> {
        WeightLaw::Directional { gauge, beta }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            WeightLaw::Zero => Ok(WeightLaw::Zero),
            WeightLaw::Power { c, beta } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::InvalidLaw(format!("c = {c} must be nonnegative")));
                }
                check_exponent("beta", beta)?;
                Ok(WeightLaw::Power { c, beta })
            }
            WeightLaw::Directional { gauge, beta } => {
                check_exponent("beta", beta)?;
                Ok(WeightLaw::Directional {
                    gauge: gauge.validated()?,
                    beta,
                })
            }
        }
    }

    /// Exponent of `W` in the law; 1 for the zero law, where it is irrelevant.
    pub fn beta(&self) -> f64 {
        match self {
            WeightLaw::Zero => 1.0,
            WeightLaw::Power { beta, .. } | WeightLaw::Directional { beta, .. } => *beta,
        }
    }

    pub fn is_directional(&self) -> bool {
        matches!(self, WeightLaw::Directional { .. })
    }

    /// Coefficient of `W^beta` for a unit tangent `direction`.
    pub fn rate(&self, direction: &[f64]) -> f64 {
        match self {
            WeightLaw::Zero => 0.0,
            WeightLaw::Power { c, .. } => *c,
            WeightLaw::Directional { gauge, .. } => gauge.eval(direction),
        }
    }

    /// Coefficient for the scalar (direction-free) laws.
    pub fn scalar_rate(&self) -> Result<f64> {
        match self {
            WeightLaw::Zero => Ok(0.0),
            WeightLaw::Power { c, .. } => Ok(*c),
            WeightLaw::Directional { .. } => Err(Error::InvalidLaw(
                "directional law needs branch geometry".into(),
            )),
        }
    }

    pub fn eval(&self, direction: &[f64], w: f64) -> f64 {
        let r = self.rate(direction);
        if r == 0.0 {
            0.0
        } else {
            r * w.powf(self.beta())
        }
    }

    /// The same law with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> WeightLaw {
        match self {
            WeightLaw::Zero => WeightLaw::Zero,
            WeightLaw::Power { c, beta } => WeightLaw::Power {
                c: c * factor,
                beta: *beta,
            },
            WeightLaw::Directional { gauge, beta } => WeightLaw::Directional {
                gauge: Gauge {
                    norm: gauge.norm * factor,
                    terms: gauge
                        .terms
                        .iter()
                        .map(|t| GaugeTerm {
                            weight: t.weight * factor,
                            direction: t.direction.clone(),
                        })
                        .collect(),
                },
                beta: *beta,
            },
        }
    }
}

fn check_exponent(name: &str, e: f64) -> Result<()> {
    if e > 0.0 && e <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLaw(format!("{name} = {e} must lie in (0, 1]")))
    }
}

/// The cost integrand `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PsiLaw {
    /// `psi(W) = W^alpha`.
    Power { alpha: f64 },
    /// `psi(W) = W^beta` with the exponent of the weight law.
    SameAsF,
}

impl PsiLaw {
    pub fn power(alpha: f64) -> Result<Self> {
        check_exponent("alpha", alpha)?;
        Ok(PsiLaw::Power { alpha })
    }

    /// Resolves to a concrete exponent given the weight law.
    pub fn exponent(&self, f: &WeightLaw) -> Result<f64> {
        match self {
            PsiLaw::Power { alpha } => {
                check_exponent("alpha", *alpha)?;
                Ok(*alpha)
            }
            PsiLaw::SameAsF => match f {
                WeightLaw::Zero => Err(Error::InvalidLaw(
                    "psi = same_as_f needs a power or directional weight law".into(),
                )),
                _ => Ok(f.beta()),
            },
        }
    }
}

/// The contents of a law file: `{"f": {...}, "psi": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpecRepr", into = "LawSpecRepr")]
pub struct LawSpec {
    pub f: WeightLaw,
    pub psi: PsiLaw,
}

#[derive(Serialize, Deserialize)]
struct LawSpecRepr {
    f: WeightLaw,
    psi: PsiLaw,
}

impl TryFrom<LawSpecRepr> for LawSpec {
    type Error = Error;
    fn try_from(r: LawSpecRepr) -> Result<Self> {
        LawSpec::new(r.f, r.psi)
    }
}

impl From<LawSpec> for LawSpecRepr {
    fn from(l: LawSpec) -> Self {
        LawSpecRepr { f: l.f, psi: l.psi }
    }
}

impl LawSpec {
    pub fn new(f: WeightLaw, psi: PsiLaw) -> Result<Self> {
        let f = f.validated()?;
        psi.exponent(&f)?;
        Ok(LawSpec { f, psi })
    }

    pub fn alpha(&self) -> f64 {
        self.psi.exponent(&self.f).expect("validated on construction")
    }
}
