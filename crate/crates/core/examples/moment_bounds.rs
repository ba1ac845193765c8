//! First and cross moments of the infinite-rate system against their
//! semigroup bounds.
//!
//! ```text
//! cargo run --release --example moment_bounds -- [n_reps]
//! ```

use mutcat::duality::moment_check;
use mutcat::infinite_rate::InfRateParams;
use mutcat::migration::MigrationMatrix;
use mutcat::state::Config;

fn main() -> mutcat::Result<()> {
    let n_reps: usize = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("n_reps"));
    let a = MigrationMatrix::cycle(2);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)])?;
    let params = InfRateParams::new(0.1, 1.0)?;
    for row in moment_check(&x0, &a, &params, &[0.5, 1.0], n_reps, 14)? {
        println!(
            "{:<14} {:<20} mean {:.4} (se {:.4}) bound {:.4} {}",
            row.experiment,
            row.parameter,
            row.value,
            row.se,
            row.bound,
            if row.pass { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
