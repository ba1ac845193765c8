//! Exit law of planar Brownian motion from the open quadrant: the conformal
//! sampler, a Brownian oracle, and the exact distribution function.
//!
//! ```text
//! cargo run --release --example harmonic_exit -- [u] [v] [n]
//! ```

use mutcat::jump_measure::{bm_exit_oracle, harmonic_signed_cdf, sample_harmonic_exit, Axis};
use mutcat::rng::{replicate, stream, StreamTag};
use mutcat::stats::{ks_one_sample, ks_one_sample_critical};

fn main() -> mutcat::Result<()> {
    let mut args = std::env::args().skip(1);
    let u: f64 = args.next().map_or(1.0, |s| s.parse().expect("u"));
    let v: f64 = args.next().map_or(2.0, |s| s.parse().expect("v"));
    let n: usize = args.next().map_or(20_000, |s| s.parse().expect("n"));

    let conformal = replicate(n, |i| sample_harmonic_exit(u, v, &mut stream(1, StreamTag::Sampler, i)))?;
    let brownian = replicate(n / 10, |i| bm_exit_oracle(u, v, 1e-4, &mut stream(1, StreamTag::Oracle, i)))?;

    let cdf = |s: f64| harmonic_signed_cdf(u, v, s);
    for (name, pts) in [("conformal", &conformal), ("brownian", &brownian)] {
        let on_u = pts.iter().filter(|p| p.axis() == Axis::U).count() as f64 / pts.len() as f64;
        let signed: Vec<f64> = pts.iter().map(|p| p.signed_coord()).collect();
        println!(
            "{name:<10} n={:<7} P(u-axis)={on_u:.4} KS D={:.5} (1% critical {:.5})",
            pts.len(),
            ks_one_sample(&signed, cdf),
            ks_one_sample_critical(pts.len(), 0.01)
        );
    }
    // The exit point has signed coordinate `coord` on U and `-coord` on V.
    println!("exact P(u-axis) = {:.4}", 1.0 - cdf(0.0));
    Ok(())
}
