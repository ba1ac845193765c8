//! An infinite-rate path with its event log.
//!
//! ```text
//! cargo run --release --example infinite_rate_path -- [epsilon] [seed]
//! ```

use mutcat::infinite_rate::{simulate_infinite_rate, Branch, InfRateParams};
use mutcat::migration::MigrationMatrix;
use mutcat::rng::{stream, StreamTag};
use mutcat::state::Config;

fn main() -> mutcat::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(0.1, |s| s.parse().expect("epsilon"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let a = MigrationMatrix::biased_cycle(3, 0.7);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)])?;
    let params = InfRateParams::new(epsilon, 1.0)?;
    let mut rng = stream(seed, StreamTag::InfiniteRate, 0);
    let log = simulate_infinite_rate(&x0, &a, &params, &[0.25, 0.5, 0.75], &mut rng)?;

    for (t, s) in log.snapshot_times.iter().zip(&log.snapshots) {
        println!("t={t:<5} {:?}", s.sites().iter().map(|p| (p.x1, p.x2)).collect::<Vec<_>>());
    }
    let count = |b: Branch| log.events.iter().filter(|e| e.branch == b).count();
    println!(
        "{} events: {} multiply, {} flip, {} seed",
        log.events.len(),
        count(Branch::Multiply),
        count(Branch::Flip),
        count(Branch::Seed)
    );
    for e in log.events.iter().filter(|e| e.branch != Branch::Multiply).take(10) {
        println!(
            "  t={:.4} site {} {} value {:.4} (mass before {:.4})",
            e.time,
            e.site,
            e.branch.as_str(),
            e.value,
            e.mass_before
        );
    }
    Ok(())
}
