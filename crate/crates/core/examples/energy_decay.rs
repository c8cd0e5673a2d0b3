//! Unforced decay of the manufactured velocity under each scheme: kinetic energy
//! and the size of the small scales every few steps.

use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::LevelCache;
use nlgalerkin::mms::{mms1, Unforced};
use nlgalerkin::schemes::{self, Scheme, SchemeConfig, Setup};

fn main() -> nlgalerkin::Result<()> {
    let problem = Unforced { inner: mms1(0.05)? };
    let setup = Setup::two_grid(LevelCache::new(4, ElementKind::P1isoP2).hierarchy(2, 4)?);
    let dt = 1.0 / 128.0;
    for scheme in [Scheme::GalerkinFine, Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin] {
        let cfg = SchemeConfig { scheme, nu: 0.05, dt, t0: 16.0 * dt, t_end: 128.0 * dt, ..Default::default() };
        let tr = schemes::run(&cfg, &problem, &setup)?;
        println!("{scheme}");
        for r in tr.records.iter().filter(|r| r.step % 32 == 0) {
            let z = r.diagnostics.z_norm.map(|z| format!("{z:.3e}")).unwrap_or_else(|| "-".into());
            println!("  t = {:<9} |u| = {:.6}  |z| = {z}", r.t, r.diagnostics.energy);
        }
    }
    Ok(())
}
