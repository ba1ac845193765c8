//! Monte Carlo checks built on the simulators: both sides of the duality
//! identity `E[H(X_t, y)] = E[H(x, Y_t)]`, the finite-rate to infinite-rate
//! sweep in `γ`, and first and cross moment bounds.
//!
//! Forward paths use [`StreamTag::Forward`] and dual paths
//! [`StreamTag::Dual`], so the two sides are independent. All means are
//! pairwise sums over replicates in index order.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::finite_rate::{simulate_finite_rate, FiniteRateParams, Scheme};
use crate::infinite_rate::{simulate_infinite_rate, InfRateParams};
use crate::migration::{bold_apply, MigrationMatrix};
use crate::rng::{replicate, stream, StreamTag};
use crate::state::{duality_h, Complex, Config, DualConfig};
use crate::stats::{mean_and_se, pairwise_sum};

/// Monte Carlo mean of a complex observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    #[serde(skip)]
    pub mean: Complex,
    pub se_re: f64,
    pub se_im: f64,
    /// `sqrt(se_re² + se_im²)`.
    pub se: f64,
    pub n_reps: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[Complex]) -> Result<Estimate> {
        if xs.len() < 2 {
            return Err(Error::DegenerateVariance(xs.len()));
        }
        let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
        let (m_re, se_re) = mean_and_se(&re);
        let (m_im, se_im) = mean_and_se(&im);
        Ok(Estimate {
            mean: Complex::new(m_re, m_im),
            se_re,
            se_im,
            se: se_re.hypot(se_im),
            n_reps: xs.len(),
        })
    }

    /// `|a - b|` and `3 sqrt(se_a² + se_b²)`.
    pub fn gap(&self, other: &Estimate) -> (f64, f64) {
        ((self.mean - other.mean).norm(), 3.0 * self.se.hypot(other.se))
    }
}

/// One line of a check table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

fn window_config(y: &DualConfig, n: usize) -> Result<Config> {
    y.to_config(n)
}

fn dual_params(params: &InfRateParams, t: f64) -> Result<InfRateParams> {
    let mut p = params.clone();
    p.t_end = t;
    p.ode_dt = p.ode_dt.min(t);
    p.validate()?;
    Ok(p)
}

/// One dual path on the transposed kernel, evaluated at `t`.
pub fn simulate_dual<R: rand::Rng + ?Sized>(
    y0: &DualConfig,
    a: &MigrationMatrix,
    params: &InfRateParams,
    t: f64,
    rng: &mut R,
) -> Result<Config> {
    let start = window_config(y0, a.len())?;
    if t == 0.0 {
        return Ok(start);
    }
    let p = dual_params(params, t)?;
    let log = simulate_infinite_rate(&start, &a.transpose(), &p, &[], rng)?;
    Ok(log.snapshots.into_iter().last().expect("final snapshot"))
}

/// Sorted, deduplicated positive times.
fn positive_times(times: &[f64]) -> Result<Vec<f64>> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return domain("observation times must be finite and nonnegative");
    }
    let mut ts: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

/// `E[H(X_t, y)]` for every `t` in `times` and every `y` in `ys`, from one set
/// of forward paths. Result is indexed `[time][y]` in the order given.
pub fn forward_h_table(
    x0: &Config,
    ys: &[DualConfig],
    a: &MigrationMatrix,
    params: &InfRateParams,
    times: &[f64],
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Vec<Estimate>>> {
    if n_reps < 2 {
        return Err(Error::DegenerateVariance(n_reps));
    }
    let ts = positive_times(times)?;
    let t_max = ts.last().copied();
    let per_rep = replicate(n_reps, |r| {
        let states: Vec<Config> = match t_max {
            Some(t_end) => {
                let p = dual_params(params, t_end)?;
                let mut rng = stream(seed, StreamTag::Forward, r);
                simulate_infinite_rate(x0, a, &p, &ts, &mut rng)?.snapshots
            }
            None => Vec::new(),
        };
        times
            .iter()
            .map(|&t| {
                let x = if t == 0.0 {
                    x0
                } else {
                    &states[ts.iter().position(|&s| s == t).expect("time on grid")]
                };
                ys.iter().map(|y| duality_h(x, y)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    (0..times.len())
        .map(|ti| {
            (0..ys.len())
                .map(|yi| {
                    let xs: Vec<Complex> = per_rep.iter().map(|r| r[ti][yi]).collect();
                    Estimate::from_samples(&xs)
                })
                .collect()
        })
        .collect()
}

/// `E[H(x, Y_t)]` for every `t` in `times`, with `Y` started from `y0` on the
/// transposed kernel.
pub fn dual_h_table(
    x: &Config,
    y0: &DualConfig,
    a: &MigrationMatrix,
    params: &InfRateParams,
    times: &[f64],
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if n_reps < 2 {
        return Err(Error::DegenerateVariance(n_reps));
    }
    let ts = positive_times(times)?;
    let start = window_config(y0, a.len())?;
    let at = a.transpose();
    let per_rep = replicate(n_reps, |r| {
        let states: Vec<Config> = match ts.last() {
            Some(&t_end) => {
                let p = dual_params(params, t_end)?;
                let mut rng = stream(seed, StreamTag::Dual, r);
                simulate_infinite_rate(&start, &at, &p, &ts, &mut rng)?.snapshots
            }
            None => Vec::new(),
        };
        times
            .iter()
            .map(|&t| {
                let y = if t == 0.0 {
                    &start
                } else {
                    &states[ts.iter().position(|&s| s == t).expect("time on grid")]
                };
                duality_h(x, &DualConfig::from_dense(y.sites())?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    (0..times.len())
        .map(|ti| {
            let xs: Vec<Complex> = per_rep.iter().map(|r| r[ti]).collect();
            Estimate::from_samples(&xs)
        })
        .collect()
}

pub fn estimate_h_forward(
    x0: &Config,
    y: &DualConfig,
    a: &MigrationMatrix,
    params: &InfRateParams,
    t: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(forward_h_table(x0, std::slice::from_ref(y), a, params, &[t], n_reps, seed)?[0][0])
}

pub fn estimate_h_dual(
    x: &Config,
    y0: &DualConfig,
    a: &MigrationMatrix,
    params: &InfRateParams,
    t: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(dual_h_table(x, y0, a, params, &[t], n_reps, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap {
    pub forward: Estimate,
    pub dual: Estimate,
    pub gap: f64,
    /// `3 sqrt(se_f² + se_d²)`.
    pub threshold: f64,
}

impl DualityGap {
    pub fn new(forward: Estimate, dual: Estimate) -> Self {
        let (gap, threshold) = forward.gap(&dual);
        DualityGap {
            forward,
            dual,
            gap,
            threshold,
        }
    }

    pub fn pass(&self) -> bool {
        self.gap <= self.threshold
    }

    /// `sqrt(se_f² + se_d²)`.
    pub fn combined_se(&self) -> f64 {
        self.threshold / 3.0
    }
}

pub fn duality_gap(
    x0: &Config,
    y: &DualConfig,
    a: &MigrationMatrix,
    params: &InfRateParams,
    t: f64,
    n_reps: usize,
    seed: u64,
) -> Result<DualityGap> {
    let f = estimate_h_forward(x0, y, a, params, t, n_reps, seed)?;
    let d = estimate_h_dual(x0, y, a, params, t, n_reps, seed)?;
    Ok(DualityGap::new(f, d))
}

/// `∫₀ᵀ g(t) e^{-t} dt` by the trapezoid rule on `grid` (which starts at 0).
fn weighted_trapezoid(grid: &[f64], values: &[Complex]) -> Complex {
    let mut acc = Complex::new(0.0, 0.0);
    for i in 1..grid.len() {
        let (t0, t1) = (grid[i - 1], grid[i]);
        acc += (values[i - 1] * (-t0).exp() + values[i] * (-t1).exp()) * (0.5 * (t1 - t0));
    }
    acc
}

/// Settings of the `γ` sweep.
#[derive(Debug, Clone)]
pub struct SweepParams {
    pub gammas: Vec<f64>,
    pub t_end: f64,
    /// Spacing of the time grid for the `e^{-t}`-weighted functional.
    pub grid_step: f64,
    /// Euler step as a function of `γ`.
    pub dt_rule: fn(f64) -> f64,
    pub scheme: Scheme,
    pub infinite: InfRateParams,
    pub n_reps: usize,
    pub seed: u64,
}

impl SweepParams {
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.t_end / self.grid_step).round().max(1.0) as usize;
        (0..=n).map(|i| self.t_end * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    #[serde(skip)]
    pub functional: Estimate,
    /// `|F_γ - F_∞|`.
    pub gap: f64,
    /// `sqrt(se_γ² + se_∞²)`.
    pub gap_se: f64,
    /// Mean over replicates of `Σ_k ∫₀ᵀ min(Y₁Y₂, 1) ds`.
    pub degeneracy: f64,
    pub degeneracy_se: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub infinite: Estimate,
    pub rows: Vec<SweepRow>,
}

/// The `e^{-t}`-weighted functional `∫₀ᵀ E[H(·_t, y)] e^{-t} dt` for the
/// finite-rate system at each `γ`, compared with the infinite-rate system.
pub fn gamma_sweep(x0: &Config, y: &DualConfig, a: &MigrationMatrix, sweep: &SweepParams) -> Result<SweepTable> {
    if sweep.n_reps < 2 {
        return Err(Error::DegenerateVariance(sweep.n_reps));
    }
    let grid = sweep.grid();
    let inner = &grid[1..];
    let mut inf_params = sweep.infinite.clone();
    inf_params.t_end = sweep.t_end;
    inf_params.ode_dt = inf_params.ode_dt.min(sweep.t_end);
    inf_params.validate()?;

    let functional_of = |states: &[Config]| -> Result<Complex> {
        let mut hs = vec![duality_h(x0, y)?];
        for s in states {
            hs.push(duality_h(s, y)?);
        }
        Ok(weighted_trapezoid(&grid, &hs))
    };

    let inf_samples = replicate(sweep.n_reps, |r| {
        let mut rng = stream(sweep.seed, StreamTag::InfiniteRate, r);
        let log = simulate_infinite_rate(x0, a, &inf_params, inner, &mut rng)?;
        functional_of(&log.snapshots)
    })?;
    let infinite = Estimate::from_samples(&inf_samples)?;

    let mut rows = Vec::with_capacity(sweep.gammas.len());
    for (gi, &gamma) in sweep.gammas.iter().enumerate() {
        let params = FiniteRateParams::new(gamma, sweep.t_end)?
            .with_dt((sweep.dt_rule)(gamma))?
            .with_scheme(sweep.scheme);
        let samples = replicate(sweep.n_reps, |r| {
            let mut rng = stream(sweep.seed ^ (gi as u64 + 1), StreamTag::FiniteRate, r);
            let path = simulate_finite_rate(x0, a, &params, inner, &mut rng)?;
            Ok((functional_of(&path.states)?, pairwise_sum(path.final_degeneracy())))
        })?;
        let values: Vec<Complex> = samples.iter().map(|s| s.0).collect();
        let degeneracy: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let functional = Estimate::from_samples(&values)?;
        let (deg_mean, deg_se) = mean_and_se(&degeneracy);
        rows.push(SweepRow {
            gamma,
            functional,
            gap: (functional.mean - infinite.mean).norm(),
            gap_se: functional.se.hypot(infinite.se),
            degeneracy: deg_mean,
            degeneracy_se: deg_se,
        });
    }
    Ok(SweepTable { infinite, rows })
}

/// Compares sample means of `X_{t,i}(k)` with `e^{t|A|} x_i (k)` and of
/// `X_{t,1}(k₁) X_{t,2}(k₂)`, `k₁ ≠ k₂`, with the product of those bounds.
/// A row passes when the mean is at most the bound plus 3 SE.
pub fn moment_report(samples: &[Config], x0: &Config, a: &MigrationMatrix, t: f64) -> Result<Vec<CheckRow>> {
    if samples.len() < 2 {
        return Err(Error::DegenerateVariance(samples.len()));
    }
    let n = x0.len();
    let bounds = [bold_apply(a, t, &x0.component(1)), bold_apply(a, t, &x0.component(2))];
    let mut rows = Vec::new();
    for k in 0..n {
        for i in [1u8, 2] {
            let xs: Vec<f64> = samples.iter().map(|s| s.site(k).get(i)).collect();
            let (mean, se) = mean_and_se(&xs);
            let bound = bounds[i as usize - 1][k];
            rows.push(CheckRow {
                experiment: "moment_single".into(),
                parameter: format!("t={t};site={k};type={i}"),
                value: mean,
                se,
                bound,
                pass: mean <= bound + 3.0 * se,
            });
        }
    }
    for k1 in 0..n {
        for k2 in 0..n {
            if k1 == k2 {
                continue;
            }
            let xs: Vec<f64> = samples.iter().map(|s| s.site(k1).x1 * s.site(k2).x2).collect();
            let (mean, se) = mean_and_se(&xs);
            let bound = bounds[0][k1] * bounds[1][k2];
            rows.push(CheckRow {
                experiment: "moment_cross".into(),
                parameter: format!("t={t};k1={k1};k2={k2}"),
                value: mean,
                se,
                bound,
                pass: mean <= bound + 3.0 * se,
            });
        }
    }
    Ok(rows)
}

/// Simulates `n_reps` infinite-rate paths and runs [`moment_report`] at each
/// time.
pub fn moment_check(
    x0: &Config,
    a: &MigrationMatrix,
    params: &InfRateParams,
    times: &[f64],
    n_reps: usize,
    seed: u64,
) -> Result<Vec<CheckRow>> {
    let ts = positive_times(times)?;
    let Some(&t_end) = ts.last() else {
        return domain("moment_check needs a positive time");
    };
    let p = dual_params(params, t_end)?;
    let paths = replicate(n_reps, |r| {
        let mut rng = stream(seed, StreamTag::InfiniteRate, r);
        Ok(simulate_infinite_rate(x0, a, &p, &ts, &mut rng)?.snapshots)
    })?;
    let mut rows = Vec::new();
    for (ti, &t) in ts.iter().enumerate() {
        let at_t: Vec<Config> = paths.iter().map(|p| p[ti].clone()).collect();
        rows.extend(moment_report(&at_t, x0, a, t)?);
    }
    Ok(rows)
}
