//! Short textual specs used on the command line and in the config file.
//!
//! - profile: `round_sphere`, `perturbed_well:0,0,1,0.3`, with an optional
//!   `;mirrored` suffix
//! - ρ: `zero`, `bump:center:width`, `indicator:level:epsilon`,
//!   `exp:lambda:radius`, each with an optional `*amplitude` suffix
//! - λ grid: `default:N` or `linspace:lo:hi:N`
//! - weights: `a..b` (inclusive) or `m1,m2,...`

use eqspec::measure::{Shape, TestFunction};
use eqspec::profiles::{self, MetricProfile};

use crate::config::ProfileFamily;
use crate::CliError;

fn bad(what: &str, s: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid {what} spec {s:?}: {why}"))
}

fn numbers<T: std::str::FromStr>(what: &str, s: &str, parts: &[&str]) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    parts
        .iter()
        .map(|p| p.trim().parse::<T>().map_err(|e| bad(what, s, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub family: ProfileFamily,
    pub coefficients: Vec<f64>,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub mirrored: bool,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<MetricProfile, CliError> {
        let p = match self.family {
            ProfileFamily::RoundSphere => profiles::make_round_sphere(),
            ProfileFamily::PerturbedWell => profiles::make_perturbed_well(&self.coefficients)
                .map_err(|e| CliError::Config(format!("profile: {e}")))?,
            ProfileFamily::Tabulated => {
                if self.knots.len() != self.values.len() {
                    return Err(CliError::Config(format!(
                        "profile: {} knots but {} values",
                        self.knots.len(),
                        self.values.len()
                    )));
                }
                profiles::make_tabulated(&self.knots, &self.values)
                    .map_err(|e| CliError::Config(format!("profile: {e}")))?
            }
        };
        Ok(if self.mirrored { p.mirrored() } else { p })
    }
}

pub fn parse_profile(s: &str) -> Result<ProfileSpec, CliError> {
    let (body, mirrored) = match s.trim().strip_suffix(";mirrored") {
        Some(b) => (b, true),
        None => (s.trim(), false),
    };
    let (name, args) = body.split_once(':').unwrap_or((body, ""));
    let mut spec = ProfileSpec {
        family: ProfileFamily::RoundSphere,
        coefficients: Vec::new(),
        knots: Vec::new(),
        values: Vec::new(),
        mirrored,
    };
    match name {
        "round_sphere" if args.is_empty() => {}
        "perturbed_well" => {
            spec.family = ProfileFamily::PerturbedWell;
            if !args.is_empty() {
                let parts: Vec<&str> = args.split(',').collect();
                spec.coefficients = numbers("profile", s, &parts)?;
            }
        }
        _ => return Err(bad("profile", s, "expected round_sphere or perturbed_well:c0,c1,...")),
    }
    spec.build()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSpec(pub TestFunction);

impl RhoSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (body, amp) = match s.split_once('*') {
            Some((b, a)) => (b, a.trim().parse::<f64>().map_err(|e| bad("rho", s, e))?),
            None => (s, 1.0),
        };
        let parts: Vec<&str> = body.trim().split(':').collect();
        let arity = |n: usize| -> Result<Vec<f64>, CliError> {
            if parts.len() != n + 1 {
                return Err(bad("rho", s, format!("{} takes {n} parameters", parts[0])));
            }
            numbers("rho", s, &parts[1..])
        };
        let shape = match parts[0] {
            "zero" => {
                arity(0)?;
                Shape::Zero
            }
            "bump" => {
                let a = arity(2)?;
                Shape::SmoothBump {
                    center: a[0],
                    width: a[1],
                }
            }
            "indicator" => {
                let a = arity(2)?;
                Shape::MollifiedIndicator {
                    level: a[0],
                    epsilon: a[1],
                }
            }
            "exp" => {
                let a = arity(2)?;
                Shape::Exponential {
                    lambda: a[0],
                    radius: a[1],
                }
            }
            other => return Err(bad("rho", s, format!("unknown family {other:?}"))),
        };
        if !amp.is_finite() {
            return Err(bad("rho", s, "amplitude must be finite"));
        }
        let f = TestFunction::new(shape).map_err(|e| bad("rho", s, e))?;
        Ok(RhoSpec(f.scaled(amp)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Default(usize),
    Linspace { lo: f64, hi: f64, n: usize },
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let g = match parts.as_slice() {
            ["default", n] => GridSpec::Default(n.parse().map_err(|e| bad("lambda grid", s, e))?),
            ["linspace", lo, hi, n] => {
                let v: Vec<f64> = numbers("lambda grid", s, &[lo, hi])?;
                GridSpec::Linspace {
                    lo: v[0],
                    hi: v[1],
                    n: n.parse().map_err(|e| bad("lambda grid", s, e))?,
                }
            }
            _ => return Err(bad("lambda grid", s, "expected default:N or linspace:lo:hi:N")),
        };
        match g {
            GridSpec::Default(n) | GridSpec::Linspace { n, .. } if n < 2 => {
                Err(bad("lambda grid", s, "need at least 2 points"))
            }
            GridSpec::Linspace { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(bad("lambda grid", s, "need finite lo < hi"))
            }
            g => Ok(g),
        }
    }

    pub fn points(&self, p: &MetricProfile, alpha: f64) -> Vec<f64> {
        match *self {
            GridSpec::Default(n) => eqspec::invariants::default_lambda_grid(p, alpha, n),
            GridSpec::Linspace { lo, hi, n } => eqspec::invariants::linspace(lo, hi, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRange(pub Vec<i64>);

impl ModeRange {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let t = s.trim();
        let modes = if let Some((a, b)) = t.split_once("..") {
            let v: Vec<i64> = numbers("mode range", s, &[a, b])?;
            if v[0] > v[1] {
                return Err(bad("mode range", s, "empty range"));
            }
            (v[0]..=v[1]).collect()
        } else {
            let parts: Vec<&str> = t.split(',').collect();
            numbers("mode list", s, &parts)?
        };
        if modes.is_empty() {
            return Err(bad("mode range", s, "no modes"));
        }
        Ok(ModeRange(modes))
    }
}
