//! Globally adaptive Gauss–Kronrod (7/15) quadrature with bisection, plus
//! the variable changes used for half-infinite ranges and algebraic endpoint
//! singularities.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kron += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).abs();
    // Scaled like QUADPACK so that smooth panels do not report a pessimistic 0-th order error.
    let err = if err > 0.0 {
        let scale = (200.0 * err / value.abs().max(f64::MIN_POSITIVE)).powf(1.5).min(1.0);
        (err * scale).max(50.0 * f64::EPSILON * value.abs())
    } else {
        0.0
    };
    (value, err)
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut count = 1;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if count >= opts.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total,
                error: total_err,
                intervals: count,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating-point resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        count += 1;
        // Re-sum to keep the running totals from drifting.
        if count % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
        }
        total_err = heap.iter().map(|p| p.error).sum();
    }
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        intervals: count,
    })
}

/// Integral over `[a, inf)` via `x = a + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - s;
            f(a + s / w) / (w * w)
        },
        0.0,
        1.0,
        opts,
    )
}

/// Integral of `g(r)` for `r` between `0` and `len` (len may be negative),
/// where `g` behaves like `|r|^(power - 1)` at `r = 0`, `power > 0`. The
/// substitution `r = len * s^(1/power)` makes the transformed integrand
/// bounded. `g` receives the offset `r` itself, so callers can evaluate
/// the singular factor without cancellation.
pub fn integrate_algebraic_endpoint<F: Fn(f64) -> f64>(
    g: F,
    len: f64,
    power: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    assert!(power > 0.0);
    let m = 1.0 / power;
    integrate(
        |s| {
            let r = len * s.powf(m);
            if r == 0.0 {
                return 0.0;
            }
            g(r) * len.abs() * m * s.powf(m - 1.0)
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let r = integrate(|x| (50.0 * x).sin(), 0.0, std::f64::consts::PI, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 * (1.0f64 / 1e-2).atan() / 1e-2, epsilon = 1e-9);
    }

    #[test]
    fn half_line() {
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let r = integrate_to_infinity(|x| (-x).exp(), 2.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, (-2.0f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 x^{-0.8} dx = 5
        let r = integrate_algebraic_endpoint(|r| r.powf(-0.8), 1.0, 0.2, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 5.0, epsilon = 1e-11);
        // mirrored: int_{-1}^0 |x|^{-0.5} dx = 2
        let r = integrate_algebraic_endpoint(|r| r.abs().powf(-0.5), -1.0, 0.5, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions {
            max_intervals: 3,
            ..Default::default()
        };
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
