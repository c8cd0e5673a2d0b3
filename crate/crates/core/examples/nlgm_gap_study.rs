//! The three nonlinear Galerkin variants against the fine Galerkin solution on
//! one fine grid: gap per coarse grid and fitted gap rates.
//!
//! `cargo run --release --example nlgm_gap_study -- full` runs the h = 1/64 grid
//! (a few minutes); the default is h = 1/32.

use nlgalerkin::harness::{run_convergence, ConvergenceConfig};

fn main() -> nlgalerkin::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let cfg = ConvergenceConfig { fine_level: if full { 5 } else { 4 }, timing: true, ..Default::default() };
    cfg.validate()?;
    let report = run_convergence(&cfg)?;
    println!("scheme     H      gap L2      gap H1      wall s");
    for r in &report.rows {
        match (&r.error, r.gap_l2, r.gap_h1) {
            (None, Some(l2), Some(h1)) => println!(
                "{:<10} 1/{:<4} {l2:.4e}  {h1:.4e}  {:.1}",
                r.scheme.as_str(),
                (1.0 / r.coarse_h).round(),
                r.wall_s.unwrap_or(f64::NAN)
            ),
            (err, ..) => println!("{:<10} 1/{:<4} failed: {}", r.scheme.as_str(), (1.0 / r.coarse_h).round(), err.as_deref().unwrap_or("?")),
        }
    }
    for (scheme, rates) in &report.rates {
        println!("{scheme}: L2 rate {:.2}, H1 rate {:.2}", rates.rate_l2, rates.rate_h1);
    }
    Ok(())
}
