//! One finite-rate path under each scheme, and the mass each scheme keeps
//! on average at large branching rate.
//!
//! ```text
//! cargo run --release --example finite_rate_path -- [gamma]
//! ```

use mutcat::finite_rate::{simulate_finite_rate, FiniteRateParams, Scheme};
use mutcat::migration::MigrationMatrix;
use mutcat::rng::{replicate, stream, StreamTag};
use mutcat::state::Config;
use mutcat::stats::mean_and_se;

fn main() -> mutcat::Result<()> {
    let gamma: f64 = std::env::args().nth(1).map_or(100.0, |s| s.parse().expect("gamma"));
    let a = MigrationMatrix::cycle(2);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)])?;
    let dt = 1e-3 * (1.0f64).min(1.0 / gamma);
    let grid = [0.25, 0.5, 0.75];

    for scheme in [Scheme::Absorbed, Scheme::Clamped] {
        let params = FiniteRateParams::new(gamma, 1.0)?.with_dt(dt)?.with_scheme(scheme);
        let path = simulate_finite_rate(&x0, &a, &params, &grid, &mut stream(3, StreamTag::FiniteRate, 0))?;
        println!("{} (gamma {gamma}, dt {dt:e})", scheme.as_str());
        for (t, s) in path.times.iter().zip(&path.states) {
            println!("  t={t:<5} {:?}", s.sites().iter().map(|p| (p.x1, p.x2)).collect::<Vec<_>>());
        }
        // Total type-1 mass is a martingale of the exact system.
        let mass = replicate(500, |r| {
            let p = simulate_finite_rate(&x0, &a, &params, &[], &mut stream(4, StreamTag::FiniteRate, r))?;
            Ok(p.states.last().unwrap().component(1).iter().sum::<f64>())
        })?;
        let (m, se) = mean_and_se(&mass);
        println!("  mean type-1 mass at T=1: {m:.4} +- {se:.4} (exact 1)");
    }
    Ok(())
}
