//! Measures the complement Poincaré constant c (|z| ≤ c|∇z| for z orthogonal to
//! the coarse space) and the strengthened Cauchy–Schwarz constant ρ.

use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::LevelCache;

fn main() -> nlgalerkin::Result<()> {
    for kind in [ElementKind::P1isoP2, ElementKind::TaylorHoodP2] {
        println!("{kind}");
        println!("  H      h      c          c/H      rho");
        let mut levels = LevelCache::new(5, kind);
        for (coarse, fine) in [(1, 2), (1, 3), (2, 4), (3, 5), (1, 5)] {
            let r = levels.hierarchy(coarse, fine)?.probe_report()?;
            println!(
                "  1/{:<4} 1/{:<4} {:.4e} {:.4}   {:.4}",
                (1.0 / r.coarse_h).round(),
                (1.0 / r.h).round(),
                r.c_poincare,
                r.c_over_h,
                r.rho
            );
        }
    }
    Ok(())
}
