//! Command-line and JSON configuration.
//!
//! A JSON config file uses the flag names as keys (`{"t-end": 0.25, "schemes":
//! ["nlgm1", "nlgm2"]}`); values given on the command line take precedence.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::space::ElementKind;
use crate::mms::ProblemKind;
use crate::schemes::{HandoffInit, Scheme, SchemeConfig, TimeRule};

use super::ConvergenceConfig;

/// A list given either as a JSON array or as a comma-separated string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ListValue<T> {
    List(Vec<T>),
    Text(String),
}

impl<T: Clone> ListValue<T> {
    pub fn items(&self, parse: fn(&str) -> Result<Vec<T>>) -> Result<Vec<T>> {
        match self {
            ListValue::List(v) => Ok(v.clone()),
            ListValue::Text(s) => parse(s),
        }
    }
}

pub fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(|p| p.trim()).filter(|p| !p.is_empty()).map(|p| p.parse()).collect()
}

/// Comma-separated level list.
pub fn parse_levels(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::InvalidArgument(format!("bad level '{p}'"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    pub scheme: Option<Scheme>,
    pub schemes: Option<ListValue<Scheme>>,
    pub level: Option<usize>,
    pub coarse_level: Option<usize>,
    pub coarse_levels: Option<ListValue<usize>>,
    pub fine_level: Option<usize>,
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub problem: Option<ProblemKind>,
    pub element: Option<ElementKind>,
    pub time_rule: Option<TimeRule>,
    pub picard_tol: Option<f64>,
    pub picard_max: Option<usize>,
    pub handoff: Option<HandoffInit>,
    pub no_convection: Option<bool>,
    pub no_timing: Option<bool>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Options { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Options {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Values of `self` win over those of `base`.
    pub fn over(self, base: Options) -> Options {
        overlay!(
            self, base, scheme, schemes, level, coarse_level, coarse_levels, fine_level, nu, dt, t0, t_end, problem,
            element, time_rule, picard_tol, picard_max, handoff, no_convection, no_timing, out
        )
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let d = SchemeConfig::default();
        SchemeConfig {
            nu: self.nu.unwrap_or(d.nu),
            dt: self.dt.unwrap_or(d.dt),
            t0: self.t0.unwrap_or(d.t0),
            t_end: self.t_end.unwrap_or(d.t_end),
            scheme: self.scheme.unwrap_or(d.scheme),
            time_rule: self.time_rule.unwrap_or(d.time_rule),
            picard_tol: self.picard_tol.unwrap_or(d.picard_tol),
            picard_max: self.picard_max.unwrap_or(d.picard_max),
            convection: !self.no_convection.unwrap_or(false),
            handoff: self.handoff.unwrap_or(d.handoff),
        }
    }

    pub fn convergence_config(&self) -> Result<ConvergenceConfig> {
        let d = ConvergenceConfig::default();
        let schemes = match (&self.schemes, self.scheme) {
            (Some(l), _) => l.items(parse_list)?,
            (None, Some(s)) => vec![s],
            (None, None) => d.schemes,
        };
        let coarse_levels = match (&self.coarse_levels, self.coarse_level) {
            (Some(l), _) => l.items(parse_levels)?,
            (None, Some(l)) => vec![l],
            (None, None) => d.coarse_levels,
        };
        Ok(ConvergenceConfig {
            schemes,
            coarse_levels,
            fine_level: self.fine_level.unwrap_or(d.fine_level),
            element: self.element.unwrap_or(d.element),
            problem: self.problem.unwrap_or(d.problem),
            base: self.scheme_config(),
            timing: !self.no_timing.unwrap_or(false),
        })
    }
}
