//! Manufactured solutions and error measurement.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::error_norms;
use crate::fem::space::VelocitySpace;
use crate::mesh::Point;

/// A flow problem on the unit square: forcing and initial data, and optionally the
/// exact solution they were manufactured from.
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &str;
    fn nu(&self) -> f64;
    fn velocity(&self, x: Point, t: f64) -> [f64; 2];
    /// `grad[c][d] = ∂_d u_c`.
    fn velocity_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2];
    fn pressure(&self, x: Point, t: f64) -> f64;
    fn forcing(&self, x: Point, t: f64) -> [f64; 2];
    /// True when the forcing does not depend on time.
    fn is_steady(&self) -> bool {
        false
    }
}

/// `u = curl ψ` with `ψ = sin²(πx) sin²(πy) g(t)`, `g = 1 + e^{-t}/2`, and
/// `p = cos(πx) cos(πy) g(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mms1 {
    pub nu: f64,
}

pub fn mms1(nu: f64) -> Result<Mms1> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    Ok(Mms1 { nu })
}

/// `sin²(πs)` and its first three derivatives.
fn sq(s: f64) -> [f64; 4] {
    let a = (PI * s).sin();
    let (a2, b2) = (2.0 * PI * s).sin_cos();
    [a * a, PI * a2, 2.0 * PI * PI * b2, -4.0 * PI.powi(3) * a2]
}

impl Mms1 {
    pub fn g(t: f64) -> f64 {
        1.0 + 0.5 * (-t).exp()
    }

    pub fn g_prime(t: f64) -> f64 {
        -0.5 * (-t).exp()
    }
}

impl ExactSolution for Mms1 {
    fn name(&self) -> &str {
        "mms1"
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
        let (s, r) = (sq(x[0]), sq(x[1]));
        let g = Self::g(t);
        [s[0] * r[1] * g, -s[1] * r[0] * g]
    }

    fn velocity_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        let (s, r) = (sq(x[0]), sq(x[1]));
        let g = Self::g(t);
        [[s[1] * r[1] * g, s[0] * r[2] * g], [-s[2] * r[0] * g, -s[1] * r[1] * g]]
    }

    fn pressure(&self, x: Point, t: f64) -> f64 {
        (PI * x[0]).cos() * (PI * x[1]).cos() * Self::g(t)
    }

    fn forcing(&self, x: Point, t: f64) -> [f64; 2] {
        let (s, r) = (sq(x[0]), sq(x[1]));
        let (g, gp) = (Self::g(t), Self::g_prime(t));
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let ut = [s[0] * r[1] * gp, -s[1] * r[0] * gp];
        let conv = [g * g * s[0] * s[1] * (r[1] * r[1] - r[0] * r[2]), g * g * r[0] * r[1] * (s[1] * s[1] - s[0] * s[2])];
        let lap = [(s[2] * r[1] + s[0] * r[3]) * g, -(s[3] * r[0] + s[1] * r[2]) * g];
        let gradp = [-PI * sx * cy * g, -PI * cx * sy * g];
        [
            ut[0] + conv[0] - self.nu * lap[0] + gradp[0],
            ut[1] + conv[1] - self.nu * lap[1] + gradp[1],
        ]
    }
}

/// The trivial problem `u = 0`, `f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroFlow {
    pub nu: f64,
}

impl ExactSolution for ZeroFlow {
    fn name(&self) -> &str {
        "zero"
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn velocity(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn velocity_gradient(&self, _: Point, _: f64) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }

    fn pressure(&self, _: Point, _: f64) -> f64 {
        0.0
    }

    fn forcing(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn is_steady(&self) -> bool {
        true
    }
}

/// Another problem with its forcing frozen at time `t_frozen`; the velocity and
/// pressure are those of the wrapped problem at `t_frozen` (initial data only, not a
/// solution).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenForcing<P> {
    pub inner: P,
    pub t_frozen: f64,
}

impl<P: ExactSolution> ExactSolution for FrozenForcing<P> {
    fn name(&self) -> &str {
        "frozen"
    }

    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    fn velocity(&self, x: Point, _: f64) -> [f64; 2] {
        self.inner.velocity(x, self.t_frozen)
    }

    fn velocity_gradient(&self, x: Point, _: f64) -> [[f64; 2]; 2] {
        self.inner.velocity_gradient(x, self.t_frozen)
    }

    fn pressure(&self, x: Point, _: f64) -> f64 {
        self.inner.pressure(x, self.t_frozen)
    }

    fn forcing(&self, x: Point, _: f64) -> [f64; 2] {
        self.inner.forcing(x, self.t_frozen)
    }

    fn is_steady(&self) -> bool {
        true
    }
}

/// Another problem's velocity as initial data, with the forcing switched off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unforced<P> {
    pub inner: P,
}

impl<P: ExactSolution> ExactSolution for Unforced<P> {
    fn name(&self) -> &str {
        "unforced"
    }

    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
        self.inner.velocity(x, t)
    }

    fn velocity_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        self.inner.velocity_gradient(x, t)
    }

    fn pressure(&self, x: Point, t: f64) -> f64 {
        self.inner.pressure(x, t)
    }

    fn forcing(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn is_steady(&self) -> bool {
        true
    }
}

/// Problems selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    #[default]
    Mms1,
    Zero,
}

impl ProblemKind {
    pub fn build(self, nu: f64) -> Result<Box<dyn ExactSolution>> {
        Ok(match self {
            ProblemKind::Mms1 => Box::new(mms1(nu)?),
            ProblemKind::Zero => {
                mms1(nu)?;
                Box::new(ZeroFlow { nu })
            }
        })
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Mms1 => "mms1",
            ProblemKind::Zero => "zero",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mms1" => Ok(ProblemKind::Mms1),
            "zero" => Ok(ProblemKind::Zero),
            _ => Err(Error::InvalidArgument(format!("unknown problem '{s}' (expected mms1 or zero)"))),
        }
    }
}

/// `(‖u_h − u(t)‖, ‖∇(u_h − u(t))‖)` for full fine coefficients `u_h`.
pub fn evaluate_errors(space: &VelocitySpace, u_h: &[f64], exact: &dyn ExactSolution, t: f64) -> Result<(f64, f64)> {
    error_norms(space, u_h, |x| exact.velocity(x, t), |x| exact.velocity_gradient(x, t))
}

/// Velocity field at the sample time, for interpolation and projection.
pub fn velocity_at(exact: &dyn ExactSolution, t: f64) -> impl Fn(Point) -> [f64; 2] + '_ {
    move |x| exact.velocity(x, t)
}

/// Mass- and stiffness-norms of `a − b` (full coefficients on one space).
pub fn scheme_gap(ops: &crate::fem::operators::DiscreteOperators, a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    ops.space.check_len(a)?;
    ops.space.check_len(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok((ops.l2(&d), ops.h1(&d)))
}
