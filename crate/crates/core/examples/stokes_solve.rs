//! Assembles the mixed operators for both element pairs and solves the steady
//! Stokes problem with the sparse LU, measuring the error against the
//! manufactured velocity at t = 0.

use nlgalerkin::fem::{assemble_load, CsrMatrix, ElementKind};
use nlgalerkin::harness::LevelCache;
use nlgalerkin::linsolve;
use nlgalerkin::mesh::Point;
use nlgalerkin::mms::{evaluate_errors, mms1, ExactSolution, Mms1};

/// `-νΔu + ∇p` of the manufactured flow: its forcing minus `u_t` and `(u·∇)u`.
struct Stokes(Mms1);

impl ExactSolution for Stokes {
    fn name(&self) -> &str {
        "stokes"
    }

    fn nu(&self) -> f64 {
        self.0.nu
    }

    fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
        self.0.velocity(x, t)
    }

    fn velocity_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        self.0.velocity_gradient(x, t)
    }

    fn pressure(&self, x: Point, t: f64) -> f64 {
        self.0.pressure(x, t)
    }

    fn forcing(&self, x: Point, t: f64) -> [f64; 2] {
        let (f, u, g) = (self.0.forcing(x, t), self.0.velocity(x, t), self.0.velocity_gradient(x, t));
        let rate = Mms1::g_prime(t) / Mms1::g(t);
        [0, 1].map(|c| f[c] - rate * u[c] - (u[0] * g[c][0] + u[1] * g[c][1]))
    }
}

fn push(trip: &mut Vec<(usize, usize, f64)>, m: &CsrMatrix, r0: usize, c0: usize, transpose: bool) {
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trip.push(if transpose { (c0 + j, r0 + i, v) } else { (r0 + i, c0 + j, v) });
        }
    }
}

fn main() -> nlgalerkin::Result<()> {
    let problem = Stokes(mms1(1.0)?);
    for kind in [ElementKind::P1isoP2, ElementKind::TaylorHoodP2] {
        println!("{kind}");
        let mut levels = LevelCache::new(5, kind);
        for level in 1..=4 {
            let ops = levels.operators(level)?;
            let (n, np) = (ops.n_free(), ops.n_pressure());
            // [νA Bᵀ 0; B 0 w; 0 wᵀ 0]
            let mut trip = Vec::new();
            push(&mut trip, &ops.stiffness_free.scaled(problem.nu()), 0, 0, false);
            push(&mut trip, &ops.divergence_free, n, 0, false);
            push(&mut trip, &ops.divergence_free, n, 0, true);
            for (q, &w) in ops.pressure_weights.iter().enumerate() {
                trip.push((n + q, n + np, w));
                trip.push((n + np, n + q, w));
            }
            trip.push((n + np, n + np, 0.0));
            let k = CsrMatrix::from_triplets(n + np + 1, n + np + 1, trip);
            let mut rhs = ops.bc.reduce_vec(&assemble_load(&ops.space, |x| problem.forcing(x, 0.0)));
            rhs.resize(n + np + 1, 0.0);
            let x = linsolve::factor(&k)?.solve(&rhs)?;
            let u = ops.bc.expand_vec(&x[..n]);
            let (l2, h1) = evaluate_errors(&ops.space, &u, &problem, 0.0)?;
            println!(
                "  h = 1/{:<3} dofs {:>6}  |u - u_h| = {l2:.3e}  |grad(u - u_h)| = {h1:.3e}  |B u_h| = {:.1e}",
                (1.0 / ops.space.mesh_size()).round(),
                n + np,
                ops.divergence_residual(&u)
            );
        }
    }
    Ok(())
}
