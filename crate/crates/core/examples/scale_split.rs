//! Splits a fine velocity field into large scales on a coarse grid and small
//! scales L²-orthogonal to them.

use std::f64::consts::PI;

use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::LevelCache;

fn main() -> nlgalerkin::Result<()> {
    let fine = 5;
    let mut levels = LevelCache::new(fine, ElementKind::P1isoP2);
    let ops = levels.operators(fine)?;
    let u = ops.space.interpolate(|x| {
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let wiggle = (8.0 * PI * x[0]).sin() * (8.0 * PI * x[1]).sin();
        [sx * sy + 0.1 * wiggle, -0.5 * sx * sy * wiggle]
    });
    println!("|u| = {:.6}", ops.l2(&u));
    println!("  H      |Py|       |z|        |y|²+|z|²-|u|²  |PᵀMz|∞");
    for coarse in 1..fine {
        let h = levels.hierarchy(coarse, fine)?;
        let s = h.split(&u)?;
        let (y, z) = (h.coarse_l2(&s.y), ops.l2(&s.z));
        println!(
            "  1/{:<4} {y:.6}  {z:.3e}  {:+.1e}        {:.1e}",
            (1.0 / h.coarse_size()).round(),
            y * y + z * z - ops.l2(&u).powi(2),
            h.complement_residual(&s.z)
        );
    }
    Ok(())
}
