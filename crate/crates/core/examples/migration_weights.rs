//! Kernels, their semigroups and Liggett–Spitzer weights.
//!
//! ```text
//! cargo run --release --example migration_weights
//! ```

use mutcat::migration::{bold_apply, find_beta, semigroup_apply, MigrationMatrix};

fn main() -> mutcat::Result<()> {
    let kernels = [
        ("cycle(4)", MigrationMatrix::cycle(4)),
        ("biased_cycle(4, 0.9)", MigrationMatrix::biased_cycle(4, 0.9)),
        ("custom", MigrationMatrix::from_csv("-1,1,0\n0.5,-2,0.5\n0,3,-1\n")?),
    ];
    let f = [1.0, 0.0, 0.0, 0.0];
    for (name, a) in &kernels {
        let w = find_beta(a);
        w.verify(a)?;
        let f = &f[..a.len()];
        println!("{name}: norm {:.3}, symmetric {}", a.norm(), a.is_symmetric());
        println!("  beta {:.4?}, M {:.4}", w.beta, w.m);
        println!("  e^(A)  f = {:.4?}", semigroup_apply(a, 1.0, f));
        println!("  e^(|A|) f = {:.4?}", bold_apply(a, 1.0, f));
    }
    Ok(())
}
