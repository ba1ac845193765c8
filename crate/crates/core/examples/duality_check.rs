//! Both sides of the duality identity on the two-site cycle.
//!
//! ```text
//! cargo run --release --example duality_check -- [n_reps] [epsilon] [ode_dt]
//! ```

use mutcat::duality::{dual_h_table, forward_h_table, DualityGap};
use mutcat::infinite_rate::InfRateParams;
use mutcat::migration::MigrationMatrix;
use mutcat::state::{Config, DualConfig, TypePair};

fn main() -> mutcat::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_reps: usize = args.next().map_or(10_000, |s| s.parse().expect("n_reps"));
    let epsilon: f64 = args.next().map_or(0.1, |s| s.parse().expect("epsilon"));

    let a = MigrationMatrix::cycle(2);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)])?;
    let ys = vec![
        DualConfig::new([(0, TypePair::new(0.0, 1.0))])?,
        DualConfig::new([(0, TypePair::new(0.5, 0.0)), (1, TypePair::new(0.0, 0.5))])?,
        DualConfig::new([(1, TypePair::new(2.0, 0.0))])?,
    ];
    let times = [0.25, 0.5, 1.0];
    let ode_dt: f64 = args.next().map_or(1e-3, |s| s.parse().expect("ode_dt"));
    let params = InfRateParams::new(epsilon, 1.0)?.with_ode_dt(ode_dt)?;

    let start = std::time::Instant::now();
    let forward = forward_h_table(&x0, &ys, &a, &params, &times, n_reps, 1)?;
    println!("forward paths: {:.1?}", start.elapsed());
    for (yi, y) in ys.iter().enumerate() {
        let dual = dual_h_table(&x0, y, &a, &params, &times, n_reps, 2 + yi as u64)?;
        for (ti, &t) in times.iter().enumerate() {
            let g = DualityGap::new(forward[ti][yi], dual[ti]);
            println!(
                "y{yi} t={t:<4} forward={:.5} dual={:.5} gap={:.5} threshold={:.5} {}",
                g.forward.mean,
                g.dual.mean,
                g.gap,
                g.threshold,
                if g.pass() { "ok" } else { "FAIL" }
            );
        }
    }
    println!("total: {:.1?}", start.elapsed());
    Ok(())
}
