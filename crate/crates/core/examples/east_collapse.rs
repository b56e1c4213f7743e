//! East-model absorbing-state transition at modest sizes: fixed-ratio data
//! collapse, gamma_c estimate, and the critical decay fit.

use hycirc::cli::experiments::collapse_experiment;
use hycirc::cli::CollapseConfig;

fn main() -> hycirc::Result<()> {
    let cfg = CollapseConfig {
        sizes: vec![64, 128, 256],
        samples: 2000,
        decay_fit: Some((0.038, 256, 8, 128)),
        ..Default::default()
    };
    let run = collapse_experiment(&cfg, 3, hycirc::parallel::resolve_workers(None))?;
    let r = &run.report;
    println!("gamma_c = {:.4} (collapse quality {:.2e})", r.estimate.gamma_c, r.estimate.quality);
    for p in &r.perturbed {
        println!(
            "delta {:.3} nu {:.3}: gamma_c {:.4} quality {:.2e} ({:.2}x worse)",
            p.delta, p.nu_par, p.gamma_c, p.quality, p.ratio
        );
    }
    if let Some(f) = &r.decay_fit {
        println!("log-log slope {:.3} ± {:.3}, drift {:.3}, power law: {}", f.fit.slope, f.fit.slope_se(), f.slope_drift, f.accepted());
    }
    Ok(())
}
