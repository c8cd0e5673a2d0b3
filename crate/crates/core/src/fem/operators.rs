use std::sync::Arc;

use crate::error::Result;
use crate::fem::assembly::{
    assemble_convection_scalar, assemble_divergence, assemble_mass_scalar, assemble_stiffness_scalar, block_diag,
    pressure_mean_weights, ScalarPattern,
};
use crate::fem::dirichlet::DirichletMap;
use crate::fem::space::{PressureSpace, VelocitySpace};
use crate::fem::sparse::CsrMatrix;

/// Everything assembled once per discretization level.
///
/// Vector matrices come in two flavors: full (all dofs, used for norms) and reduced
/// to the free (non-Dirichlet) velocity dofs, used by the solvers.
#[derive(Debug)]
pub struct DiscreteOperators {
    pub space: Arc<VelocitySpace>,
    pub pressure: PressureSpace,
    pub pattern: ScalarPattern,
    pub bc: DirichletMap,
    pub mass_scalar: CsrMatrix,
    pub stiffness_scalar: CsrMatrix,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub mass_free: CsrMatrix,
    pub stiffness_free: CsrMatrix,
    /// Divergence with Dirichlet columns dropped (`n_p × n_free`).
    pub divergence_free: CsrMatrix,
    pub pressure_weights: Vec<f64>,
}

impl DiscreteOperators {
    pub fn new(space: Arc<VelocitySpace>) -> Result<Self> {
        let pressure = PressureSpace::new(&space);
        let pattern = ScalarPattern::new(&space);
        let mass_scalar = assemble_mass_scalar(&space, &pattern);
        let stiffness_scalar = assemble_stiffness_scalar(&space, &pattern);
        let mass = block_diag(&mass_scalar);
        let stiffness = block_diag(&stiffness_scalar);
        let bc = DirichletMap::new(space.n_dofs(), &space.dirichlet_dofs());
        let mass_free = bc.reduce_square(&mass);
        let stiffness_free = bc.reduce_square(&stiffness);
        let divergence_free = bc.reduce_cols(&assemble_divergence(&space, &pressure)?);
        let pressure_weights = pressure_mean_weights(&pressure);
        Ok(DiscreteOperators {
            space,
            pressure,
            pattern,
            bc,
            mass_scalar,
            stiffness_scalar,
            mass,
            stiffness,
            mass_free,
            stiffness_free,
            divergence_free,
            pressure_weights,
        })
    }

    pub fn n_free(&self) -> usize {
        self.bc.n_free()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    /// Scalar skew convection matrix for transport field `w` (full coefficients).
    pub fn convection_scalar(&self, w: &[f64]) -> Result<CsrMatrix> {
        assemble_convection_scalar(&self.space, &self.pattern, w)
    }

    /// `‖v‖` through the mass matrix (full coefficients).
    pub fn l2(&self, v: &[f64]) -> f64 {
        self.mass.bilinear(v, v).max(0.0).sqrt()
    }

    /// `‖∇v‖` through the stiffness matrix (full coefficients).
    pub fn h1(&self, v: &[f64]) -> f64 {
        self.stiffness.bilinear(v, v).max(0.0).sqrt()
    }

    /// `‖B v‖∞` for full velocity coefficients.
    pub fn divergence_residual(&self, v: &[f64]) -> f64 {
        let r = self.divergence_free.mul_vec(&self.bc.reduce_vec(v));
        crate::fem::sparse::norm_inf(&r)
    }
}
