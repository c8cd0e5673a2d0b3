//! Galerkin errors against the manufactured solution at t = 1/4 on a sequence of
//! grids, with the fitted rates.

use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::{estimate_rate, LevelCache};
use nlgalerkin::mms::{evaluate_errors, mms1};
use nlgalerkin::schemes::{self, Scheme, SchemeConfig, Setup, TimeRule};

fn main() -> nlgalerkin::Result<()> {
    let problem = mms1(1.0)?;
    let cfg = SchemeConfig {
        scheme: Scheme::GalerkinFine,
        time_rule: TimeRule::CrankNicolson,
        dt: 1.0 / 256.0,
        ..Default::default()
    };
    let mut levels = LevelCache::new(4, ElementKind::P1isoP2);
    let (mut l2, mut h1) = (Vec::new(), Vec::new());
    for level in 1..=4 {
        let ops = levels.operators(level)?;
        let h = ops.space.mesh_size();
        let tr = schemes::run(&cfg, &problem, &Setup::fine_only(ops.clone()))?;
        let (e0, e1) = evaluate_errors(&ops.space, &tr.final_state.u, &problem, tr.final_state.t)?;
        let iters = tr.records.iter().map(|r| r.diagnostics.picard_iters).max().unwrap_or(0);
        println!("h = 1/{:<3} L2 {e0:.4e}  H1 {e1:.4e}  max Picard iterations {iters}", (1.0 / h).round());
        l2.push((h, e0));
        h1.push((h, e1));
    }
    println!("rates: L2 {:.2}, H1 {:.2}", estimate_rate(&l2)?, estimate_rate(&h1)?);
    Ok(())
}
