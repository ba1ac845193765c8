//! Closed forms of the jump measure against direct quadrature of its
//! density.

use serde::Serialize;

use crate::error::Result;
use crate::jump_measure::{
    compensator_coefficient, nu_density, nu_mean_y2, nu_region_mass, nu_signed_first_moment, nu_u_tail_mass,
    nu_v_tail_mass, nu_v_tail_mass_printed_variant, BoundaryPoint, MomentRegion, NuRegion,
};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

pub const ORACLE_DELTAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

/// Agreement required of every gated row.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub quantity: &'static str,
    pub delta: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub abs_diff: f64,
    /// Reported for comparison only.
    #[serde(skip)]
    pub gated: bool,
}

impl OracleRow {
    fn new(quantity: &'static str, delta: f64, closed_form: f64, quadrature: f64) -> Self {
        OracleRow {
            quantity,
            delta,
            closed_form,
            quadrature,
            abs_diff: (closed_form - quadrature).abs(),
            gated: true,
        }
    }

    pub fn pass(&self) -> bool {
        !self.gated || self.abs_diff < ORACLE_TOLERANCE
    }
}

fn du(u: f64) -> f64 {
    nu_density(BoundaryPoint::u(u))
}

fn dv(v: f64) -> f64 {
    nu_density(BoundaryPoint::v(v))
}

/// Quadratures of `g(u) ν(du)` over `[0, 1-δ]` and `[1+δ, ∞)`.
fn u_parts(g: impl Fn(f64) -> f64 + Copy, delta: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    let lower = if delta < 1.0 {
        integrate(|u| g(u) * du(u), 0.0, 1.0 - delta, opts)?.value
    } else {
        0.0
    };
    let upper = integrate_to_infinity(|u| g(u) * du(u), 1.0 + delta, opts)?.value;
    Ok((lower, upper))
}

/// Every closed form at every `δ` in `deltas`, plus `∫ y₂ dν`.
pub fn oracle_table(deltas: &[f64]) -> Result<Vec<OracleRow>> {
    let opts = QuadOptions::default();
    let mut rows = Vec::new();
    for &d in deltas {
        let mass = nu_region_mass(NuRegion::new(d)?);
        let (m_lo, m_hi) = u_parts(|_| 1.0, d, opts)?;
        let upper_closed = std::f64::consts::FRAC_2_PI / (d * (2.0 + d));
        rows.push(OracleRow::new("u_tail_upper", d, upper_closed, m_hi));
        if d < 1.0 {
            rows.push(OracleRow::new("u_tail_lower", d, mass.u - upper_closed, m_lo));
        }
        rows.push(OracleRow::new("u_tail", d, nu_u_tail_mass(d)?, m_lo + m_hi));

        let v_tail = integrate_to_infinity(dv, d, opts)?.value;
        rows.push(OracleRow::new("v_tail", d, nu_v_tail_mass(d)?, v_tail));
        rows.push(OracleRow {
            gated: false,
            ..OracleRow::new("v_tail_printed_variant", d, nu_v_tail_mass_printed_variant(d), v_tail)
        });

        let (f_lo, f_hi) = u_parts(|u| u - 1.0, d, opts)?;
        let v_all = integrate_to_infinity(dv, 0.0, opts)?.value;
        let v_in_symmetric = if d <= 1.0 { -v_all } else { 0.0 };
        rows.push(OracleRow::new(
            "first_moment_symmetric",
            d,
            nu_signed_first_moment(MomentRegion::Symmetric, d)?,
            f_lo + f_hi + v_in_symmetric,
        ));
        rows.push(OracleRow::new(
            "first_moment_upper",
            d,
            nu_signed_first_moment(MomentRegion::Upper, d)?,
            f_hi,
        ));
        rows.push(OracleRow::new(
            "compensator",
            d,
            compensator_coefficient(d)?,
            f_lo + f_hi - v_tail,
        ));
    }
    let y2 = integrate_to_infinity(|v| v * dv(v), 0.0, opts)?.value;
    rows.push(OracleRow::new("mean_y2", f64::NAN, nu_mean_y2(), y2));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_passes() {
        let rows = oracle_table(&ORACLE_DELTAS).unwrap();
        for r in &rows {
            assert!(r.pass(), "{r:?}");
        }
        let printed: Vec<_> = rows.iter().filter(|r| !r.gated).collect();
        assert_eq!(printed.len(), ORACLE_DELTAS.len());
        assert!(printed.iter().all(|r| r.abs_diff > 1e-3));
    }
}
