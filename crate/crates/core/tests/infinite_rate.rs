use mutcat::infinite_rate::{simulate_infinite_rate, Branch, InfRateParams, Presence, SiteState};
use mutcat::migration::{bold_apply, MigrationMatrix};
use mutcat::rng::{replicate, stream, StreamTag};
use mutcat::state::{validate_e, Config};
use mutcat::stats::mean_and_se;

#[test]
fn large_jump_count_is_bounded() {
    let a = MigrationMatrix::cycle(2);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)]).unwrap();
    let (t, delta, n) = (1.0, 0.5, 2000);
    let params = InfRateParams::new(0.05, t).unwrap();
    let counts = replicate(n, |r| {
        let mut rng = stream(31, StreamTag::InfiniteRate, r);
        let log = simulate_infinite_rate(&x0, &a, &params, &[], &mut rng)?;
        let mut per_site = [0.0f64; 2];
        for e in &log.events {
            let big = match e.branch {
                Branch::Multiply => (e.value - 1.0).abs() >= delta,
                Branch::Flip => e.value >= delta * e.mass_before,
                Branch::Seed => false,
            };
            per_site[e.site] += big as u8 as f64;
        }
        Ok(per_site)
    })
    .unwrap();

    // ∫₀ᵗ Σᵢ S̄ₛxᵢ(k) (|A| S̄ₛx₃₋ᵢ)(k) ds by the trapezoid rule.
    let abs_a = a.abs();
    let steps = 200;
    let integrand = |s: f64| -> [f64; 2] {
        let s1 = bold_apply(&a, s, &x0.component(1));
        let s2 = bold_apply(&a, s, &x0.component(2));
        let (a1, a2) = (abs_a.apply(&s1), abs_a.apply(&s2));
        [s1[0] * a2[0] + s2[0] * a1[0], s1[1] * a2[1] + s2[1] * a1[1]]
    };
    let mut integral = [0.0; 2];
    for j in 0..steps {
        let (s0, s1) = (t * j as f64 / steps as f64, t * (j + 1) as f64 / steps as f64);
        let (f0, f1) = (integrand(s0), integrand(s1));
        for k in 0..2 {
            integral[k] += 0.5 * (f0[k] + f1[k]) * (s1 - s0);
        }
    }
    for k in 0..2 {
        let xs: Vec<f64> = counts.iter().map(|c| c[k]).collect();
        let (mean, se) = mean_and_se(&xs);
        let bound = 4.0 / std::f64::consts::PI / (delta * delta) * integral[k];
        assert!(mean > 0.0);
        assert!(mean <= bound + 3.0 * se, "site {k}: {mean} > {bound}");
    }
}

/// Type occupying the initially empty middle site after 0.1, tallied as
/// (none, type 1, type 2).
fn occupancy(l: f64, n: usize, seed: u64) -> [f64; 3] {
    let a = MigrationMatrix::cycle(3);
    let x0 = Config::from_pairs(&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]).unwrap();
    let params = InfRateParams::new(0.05, 0.1).unwrap().with_seed_mass_inv(l).unwrap();
    let types = replicate(n, |r| {
        let mut rng = stream(seed, StreamTag::InfiniteRate, r);
        let log = simulate_infinite_rate(&x0, &a, &params, &[], &mut rng)?;
        let end = log.snapshots.last().unwrap().site(1);
        Ok(SiteState::from_pair(end)?.observed())
    })
    .unwrap();
    let mut tally = [0.0; 3];
    for p in types {
        tally[match p {
            Presence::None => 0,
            Presence::Type1 => 1,
            Presence::Type2 => 2,
        }] += 1.0 / n as f64;
    }
    tally
}

#[test]
fn occupying_type_is_insensitive_to_seed_mass() {
    let n = 4000;
    let coarse = occupancy(1e3, n, 32);
    let fine = occupancy(1e4, n, 33);
    for j in 0..3 {
        let pooled = 0.5 * (coarse[j] + fine[j]);
        let se = (2.0 * pooled * (1.0 - pooled) / n as f64).sqrt();
        assert!(
            (coarse[j] - fine[j]).abs() <= 3.0 * se.max(1e-12),
            "{coarse:?} vs {fine:?}"
        );
    }
    // Both inflows are positive from the start, so the site is occupied.
    assert!(coarse[0] < 0.01 && fine[0] < 0.01);
}

#[test]
fn snapshots_are_e_valued_across_kernels() {
    for (i, a) in [MigrationMatrix::cycle(4), MigrationMatrix::biased_cycle(4, 0.9)]
        .iter()
        .enumerate()
    {
        let x0 = Config::from_pairs(&[(2.0, 0.0), (0.0, 0.5), (0.0, 0.0), (1.0, 0.0)]).unwrap();
        let params = InfRateParams::new(0.02, 1.0).unwrap();
        let grid: Vec<f64> = (1..10).map(|j| j as f64 * 0.1).collect();
        for r in 0..50 {
            let mut rng = stream(34 + i as u64, StreamTag::InfiniteRate, r);
            let log = simulate_infinite_rate(&x0, a, &params, &grid, &mut rng).unwrap();
            assert_eq!(log.snapshots.len(), grid.len() + 1);
            assert!(log.snapshots.iter().all(validate_e));
            assert!(log.events.windows(2).all(|w| w[0].time <= w[1].time));
        }
    }
}
