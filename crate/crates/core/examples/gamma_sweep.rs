//! Finite-rate systems at growing branching rate against the infinite-rate
//! system.
//!
//! ```text
//! cargo run --release --example gamma_sweep -- [n_reps]
//! ```

use mutcat::duality::{gamma_sweep, SweepParams};
use mutcat::finite_rate::Scheme;
use mutcat::infinite_rate::InfRateParams;
use mutcat::migration::MigrationMatrix;
use mutcat::state::{Config, DualConfig, TypePair};

fn main() -> mutcat::Result<()> {
    let n_reps: usize = std::env::args().nth(1).map_or(300, |s| s.parse().expect("n_reps"));
    let a = MigrationMatrix::cycle(2);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)])?;
    let y = DualConfig::new([(0, TypePair::new(0.5, 0.0)), (1, TypePair::new(0.0, 0.5))])?;
    let sweep = SweepParams {
        gammas: vec![1.0, 10.0, 100.0],
        t_end: 1.0,
        grid_step: 0.05,
        dt_rule: |g| 1e-3 * (1.0f64).min(1.0 / g),
        scheme: Scheme::Absorbed,
        infinite: InfRateParams::new(0.05, 1.0)?,
        n_reps,
        seed: 5,
    };
    let table = gamma_sweep(&x0, &y, &a, &sweep)?;
    println!("infinite rate: {:.5}", table.infinite.mean);
    for row in &table.rows {
        println!(
            "gamma {:<6} functional {:.5} gap {:.5} (se {:.5}) degeneracy {:.5}",
            row.gamma, row.functional.mean, row.gap, row.gap_se, row.degeneracy
        );
    }
    Ok(())
}
