//! Closed-form jump-measure quantities against quadrature of the density.
//!
//! ```text
//! cargo run --release --example oracle_table
//! ```

use mutcat::jump_measure::{compensator_coefficient, nu_abs_moment, nu_abs_moment_bound};
use mutcat::oracle::{oracle_table, ORACLE_DELTAS};

fn main() -> mutcat::Result<()> {
    println!("{:<24} {:>6} {:>14} {:>14} {:>10}", "quantity", "delta", "closed", "quadrature", "diff");
    for row in oracle_table(&ORACLE_DELTAS)? {
        println!(
            "{:<24} {:>6} {:>14.10} {:>14.10} {:>10.2e}{}",
            row.quantity,
            row.delta,
            row.closed_form,
            row.quadrature,
            row.abs_diff,
            if row.gated { "" } else { "  (not gated)" }
        );
    }
    println!();
    for d in [0.01, 0.1, 1.0] {
        println!("compensator c1({d}) = {:.6}", compensator_coefficient(d)?);
    }
    for p in [1.2, 1.5, 1.8] {
        println!("|u-1|^{p} moment {:.5} <= {:.5}", nu_abs_moment(p)?, nu_abs_moment_bound(p));
    }
    Ok(())
}
