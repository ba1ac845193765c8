//! Time stepping for the finite-rate mutually catalytic system
//!
//! ```text
//! dY_i(k) = (A Y_i)(k) dt + sqrt(γ) σ(Y(k)) dW_i(k)
//! ```
//!
//! with the default `σ(x) = sqrt(x₁ x₂)`.
//!
//! Two schemes are available. [`Scheme::Clamped`] is plain Euler–Maruyama
//! with every coordinate clamped at zero. Clamping adds mass each time a
//! path overshoots the axes, and at large `γ` paths sit next to the axes
//! almost all the time, so the bias grows with `γ`. [`Scheme::Absorbed`]
//! (the default) takes the same migration step and then runs the noise as
//! a planar Brownian motion with the coefficient frozen over the step and
//! stopped when it leaves the open quadrant. The stopped motion is sampled
//! exactly, so the noise part is a martingale, stays in the closed quadrant,
//! and is absorbed on `E` where `σ` vanishes.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::migration::MigrationMatrix;
use crate::state::{Config, TypePair};

/// Source of standard normal variates. Any [`Rng`] qualifies; [`ZeroNoise`]
/// switches the noise off.
pub trait GaussianNoise {
    fn standard_normal(&mut self) -> f64;

    /// Uniform on `[0, 1)`, used for rejection steps.
    fn uniform(&mut self) -> f64;
}

impl<R: Rng + ?Sized> GaussianNoise for R {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        self.random()
    }
}

/// Noise stream that always returns zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroNoise;

impl GaussianNoise for ZeroNoise {
    fn standard_normal(&mut self) -> f64 {
        0.0
    }

    fn uniform(&mut self) -> f64 {
        0.0
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Scheme {
    /// Migration step, then Brownian noise stopped on the axes.
    #[default]
    Absorbed,
    /// Euler–Maruyama, clamped at zero.
    Clamped,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Absorbed => "absorbed",
            Scheme::Clamped => "clamped",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "absorbed" => Ok(Scheme::Absorbed),
            "clamped" => Ok(Scheme::Clamped),
            other => domain(format!("unknown scheme `{other}` (expected absorbed or clamped)")),
        }
    }
}

/// Noise coefficient `σ: [0,∞)² → [0,∞)`.
#[derive(Clone, Default)]
pub enum Sigma {
    /// `σ(x) = sqrt(x₁ x₂)`.
    #[default]
    Product,
    Custom(Arc<dyn Fn(TypePair) -> f64 + Send + Sync>),
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Product => f.write_str("Sigma::Product"),
            Sigma::Custom(_) => f.write_str("Sigma::Custom(..)"),
        }
    }
}

impl Sigma {
    #[inline]
    pub fn eval(&self, x: TypePair) -> f64 {
        match self {
            Sigma::Product => (x.x1 * x.x2).sqrt(),
            Sigma::Custom(f) => f(x),
        }
    }

    /// Grid checks that `σ` vanishes on `E` and is positive on the open
    /// quadrant; weak existence of solutions is assumed, not checked.
    pub fn check(&self) -> Result<()> {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        for &a in &grid {
            for p in [TypePair::new(a, 0.0), TypePair::new(0.0, a)] {
                let s = self.eval(p);
                if s != 0.0 {
                    return domain(format!("sigma must vanish on E, but sigma{p:?} = {s}"));
                }
            }
        }
        for &a in &grid[1..] {
            for &b in &grid[1..] {
                let s = self.eval(TypePair::new(a, b));
                if !(s > 0.0 && s.is_finite()) {
                    return domain(format!(
                        "sigma must be positive inside the quadrant, but sigma({a}, {b}) = {s}"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FiniteRateParams {
    pub gamma: f64,
    pub sigma: Sigma,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Any coordinate above this aborts the path.
    pub blowup: f64,
}

impl FiniteRateParams {
    /// Step size `1e-4 · min(1, 1/γ)`.
    pub fn default_dt(gamma: f64) -> f64 {
        1e-4 * (1.0f64).min(1.0 / gamma)
    }

    pub fn new(gamma: f64, t_end: f64) -> Result<Self> {
        let p = FiniteRateParams {
            gamma,
            sigma: Sigma::Product,
            scheme: Scheme::default(),
            dt: Self::default_dt(gamma),
            t_end,
            blowup: 1e8,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return domain(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || self.dt > self.t_end {
            return domain(format!("need 0 < dt <= T, got dt = {}, T = {}", self.dt, self.t_end));
        }
        Ok(())
    }
}

/// Reusable buffers for the in-place steps.
#[derive(Debug, Default)]
pub struct StepScratch {
    old: Vec<TypePair>,
}

/// One clamped Euler–Maruyama step of size `h`, in place.
pub fn euler_step_in_place<N: GaussianNoise + ?Sized>(
    sites: &mut [TypePair],
    a: &MigrationMatrix,
    gamma: f64,
    sigma: &Sigma,
    h: f64,
    noise: &mut N,
    scratch: &mut StepScratch,
) {
    scratch.old.clear();
    scratch.old.extend_from_slice(sites);
    let old = &scratch.old;
    let amp = (gamma * h).sqrt();
    for (k, site) in sites.iter_mut().enumerate() {
        let row = a.row(k);
        let (mut f1, mut f2) = (0.0, 0.0);
        for (w, p) in row.iter().zip(old) {
            f1 += w * p.x1;
            f2 += w * p.x2;
        }
        let s = sigma.eval(old[k]);
        let (z1, z2) = if s > 0.0 {
            (noise.standard_normal(), noise.standard_normal())
        } else {
            (0.0, 0.0)
        };
        site.x1 = (old[k].x1 + f1 * h + amp * s * z1).max(0.0);
        site.x2 = (old[k].x2 + f2 * h + amp * s * z2).max(0.0);
    }
}

/// Position at variance-time `v` of a Brownian motion started at `x > 0`,
/// conditioned not to have hit zero: density proportional to
/// `φ((y-x)/√v) - φ((y+x)/√v)` on `y > 0`. Proposals from `N(x, v)` are
/// accepted with probability `1 - exp(-2xy/v)`.
fn killed_position<N: GaussianNoise + ?Sized>(x: f64, v: f64, noise: &mut N) -> f64 {
    let sd = v.sqrt();
    loop {
        let y = x + sd * noise.standard_normal();
        if y > 0.0 && noise.uniform() < -(-2.0 * x * y / v).exp_m1() {
            return y;
        }
    }
}

/// Planar Brownian motion with per-coordinate variance `v`, started at
/// `(x₁, x₂)` in the open quadrant and stopped on leaving it. Hitting times
/// of the two coordinates are Lévy distributed, `τᵢ = (xᵢ/Zᵢ)²`; the
/// surviving coordinates are then drawn from the killed law at
/// `min(τ₁, τ₂, v)`.
fn stopped_brownian<N: GaussianNoise + ?Sized>(x1: f64, x2: f64, v: f64, noise: &mut N) -> (f64, f64) {
    let levy = |x: f64, z: f64| if z == 0.0 { f64::INFINITY } else { (x / z) * (x / z) };
    let t1 = levy(x1, noise.standard_normal());
    let t2 = levy(x2, noise.standard_normal());
    if t1 >= v && t2 >= v {
        (killed_position(x1, v, noise), killed_position(x2, v, noise))
    } else if t1 < t2 {
        (0.0, killed_position(x2, t1, noise))
    } else {
        (killed_position(x1, t2, noise), 0.0)
    }
}

/// One step of [`Scheme::Absorbed`] of size `h`, in place: the migration
/// Euler step (clamped, which only matters when `h |A_kk| > 1`), then the
/// stopped noise with variance `γ σ² h` evaluated after migration.
pub fn absorbed_step_in_place<N: GaussianNoise + ?Sized>(
    sites: &mut [TypePair],
    a: &MigrationMatrix,
    gamma: f64,
    sigma: &Sigma,
    h: f64,
    noise: &mut N,
    scratch: &mut StepScratch,
) {
    scratch.old.clear();
    scratch.old.extend_from_slice(sites);
    let old = &scratch.old;
    for (k, site) in sites.iter_mut().enumerate() {
        let (mut f1, mut f2) = (0.0, 0.0);
        for (w, p) in a.row(k).iter().zip(old) {
            f1 += w * p.x1;
            f2 += w * p.x2;
        }
        let moved = TypePair::new((old[k].x1 + f1 * h).max(0.0), (old[k].x2 + f2 * h).max(0.0));
        let s = sigma.eval(moved);
        *site = if s > 0.0 && moved.x1 > 0.0 && moved.x2 > 0.0 {
            let (y1, y2) = stopped_brownian(moved.x1, moved.x2, gamma * s * s * h, noise);
            TypePair::new(y1, y2)
        } else {
            moved
        };
    }
}

fn step_in_place<N: GaussianNoise + ?Sized>(
    sites: &mut [TypePair],
    a: &MigrationMatrix,
    params: &FiniteRateParams,
    h: f64,
    noise: &mut N,
    scratch: &mut StepScratch,
) {
    match params.scheme {
        Scheme::Absorbed => absorbed_step_in_place(sites, a, params.gamma, &params.sigma, h, noise, scratch),
        Scheme::Clamped => euler_step_in_place(sites, a, params.gamma, &params.sigma, h, noise, scratch),
    }
}

/// One clamped Euler–Maruyama step of size `params.dt`, whatever
/// `params.scheme` says.
///
/// Normals are drawn only where `σ` is nonzero, so on `E` the noise stream
/// is not consumed.
pub fn euler_step<N: GaussianNoise + ?Sized>(
    state: &Config,
    a: &MigrationMatrix,
    params: &FiniteRateParams,
    noise: &mut N,
) -> Config {
    let mut sites = state.sites().to_vec();
    euler_step_in_place(
        &mut sites,
        a,
        params.gamma,
        &params.sigma,
        params.dt,
        noise,
        &mut StepScratch::default(),
    );
    Config::from_raw(sites, false)
}

/// Observed path of the finite-rate system.
#[derive(Debug, Clone)]
pub struct FiniteRatePath {
    /// Observation times, strictly increasing.
    pub times: Vec<f64>,
    pub states: Vec<Config>,
    /// Per-site `∫₀ᵗ min(Y₁Y₂, 1) ds` at each observation time.
    pub degeneracy: Vec<Vec<f64>>,
}

impl FiniteRatePath {
    pub fn final_degeneracy(&self) -> &[f64] {
        self.degeneracy.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Simulates `[0, T]` with `params.scheme`, recording the state at each requested time in
/// `[0, T]` (steps are shortened to land on them exactly). `T` itself is
/// always recorded.
pub fn simulate_finite_rate<N: GaussianNoise + ?Sized>(
    x0: &Config,
    a: &MigrationMatrix,
    params: &FiniteRateParams,
    observe: &[f64],
    noise: &mut N,
) -> Result<FiniteRatePath> {
    params.validate()?;
    if x0.len() != a.len() {
        return domain("initial state and kernel have different windows");
    }
    let mut targets: Vec<f64> = observe
        .iter()
        .copied()
        .filter(|&t| (0.0..=params.t_end).contains(&t))
        .collect();
    targets.push(params.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let n = x0.len();
    let mut sites = x0.sites().to_vec();
    let mut degeneracy = vec![0.0; n];
    let mut scratch = StepScratch::default();
    let mut path = FiniteRatePath {
        times: Vec::with_capacity(targets.len()),
        states: Vec::with_capacity(targets.len()),
        degeneracy: Vec::with_capacity(targets.len()),
    };
    let mut t = 0.0;
    for &target in &targets {
        while t < target {
            let h = params.dt.min(target - t);
            for (d, p) in degeneracy.iter_mut().zip(&sites) {
                *d += (p.x1 * p.x2).min(1.0) * h;
            }
            step_in_place(&mut sites, a, params, h, noise, &mut scratch);
            t = if target - t <= params.dt { target } else { t + h };
            if let Some(big) = sites.iter().flat_map(|p| [p.x1, p.x2]).find(|v| *v > params.blowup) {
                return Err(Error::BlowUp {
                    time: t,
                    value: big,
                    bound: params.blowup,
                });
            }
        }
        path.times.push(target);
        path.states.push(Config::from_raw(sites.clone(), false));
        path.degeneracy.push(degeneracy.clone());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::migration::semigroup_apply;
    use crate::rng::{stream, StreamTag};
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_product_example() {
        let p = FiniteRateParams::new(4.0, 1.0).unwrap();
        let s = p.sigma.eval(TypePair::new(4.0, 9.0));
        assert_eq!(s, 6.0);
        assert_eq!(p.gamma.sqrt() * s, 12.0);
        Sigma::Product.check().unwrap();
    }

    #[test]
    fn sigma_check_rejects_bad_coefficients() {
        let bad = Sigma::Custom(Arc::new(|x: TypePair| x.x1 + x.x2));
        assert!(bad.check().is_err());
        let degenerate = Sigma::Custom(Arc::new(|x: TypePair| (x.x1 * x.x2 - 1.0).max(0.0)));
        assert!(degenerate.check().is_err());
    }

    #[test]
    fn step_on_e_without_migration_is_identity() {
        let a = MigrationMatrix::zeros(1);
        let x = Config::from_pairs(&[(2.0, 0.0)]).unwrap();
        let p = FiniteRateParams::new(50.0, 1.0).unwrap();
        let mut rng = stream(1, StreamTag::FiniteRate, 0);
        assert_eq!(euler_step(&x, &a, &p, &mut rng), x.clone().relaxed());
    }

    #[test]
    fn constant_path_on_e_with_zero_kernel() {
        let a = MigrationMatrix::zeros(2);
        let x = Config::from_pairs(&[(1.0, 0.0), (0.0, 3.0)]).unwrap();
        let p = FiniteRateParams::new(10.0, 0.5).unwrap().with_dt(1e-3).unwrap();
        let mut rng = stream(2, StreamTag::FiniteRate, 0);
        let path = simulate_finite_rate(&x, &a, &p, &[0.1, 0.2], &mut rng).unwrap();
        assert_eq!(path.times, vec![0.1, 0.2, 0.5]);
        for s in &path.states {
            assert_eq!(s.sites(), x.sites());
        }
        assert_eq!(path.final_degeneracy(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_noise_matches_semigroup() {
        let a = MigrationMatrix::cycle(3);
        let x = Config::from_pairs(&[(1.0, 0.0), (0.0, 2.0), (0.5, 0.0)]).unwrap();
        let dt = 1e-3;
        let p = FiniteRateParams::new(5.0, 1.0).unwrap().with_dt(dt).unwrap();
        let path = simulate_finite_rate(&x, &a, &p, &[], &mut ZeroNoise).unwrap();
        let end = path.states.last().unwrap();
        let w = crate::migration::find_beta(&a);
        let bound = 10.0 * dt * a.norm() * (w.norm(&x.component(1)) + w.norm(&x.component(2)));
        for i in [1u8, 2] {
            let exact = semigroup_apply(&a, 1.0, &x.component(i));
            for (got, want) in end.component(i).iter().zip(&exact) {
                assert!((got - want).abs() < bound, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn clamping_keeps_coordinates_nonnegative() {
        let a = MigrationMatrix::cycle(2);
        let x = Config::from_pairs(&[(0.5, 0.5), (0.01, 1.0)]).unwrap();
        let p = FiniteRateParams::new(100.0, 0.2)
            .unwrap()
            .with_dt(1e-4)
            .unwrap()
            .with_scheme(Scheme::Clamped);
        let mut rng = stream(9, StreamTag::FiniteRate, 0);
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 1e-3).collect();
        let path = simulate_finite_rate(&x, &a, &p, &grid, &mut rng).unwrap();
        for s in &path.states {
            assert!(s.sites().iter().all(|q| q.x1 >= 0.0 && q.x2 >= 0.0));
        }
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let a = MigrationMatrix::new(vec![vec![5.0]]).unwrap();
        let x = Config::from_pairs(&[(1.0, 0.0)]).unwrap();
        let mut p = FiniteRateParams::new(1.0, 10.0).unwrap().with_dt(1e-2).unwrap();
        p.blowup = 100.0;
        match simulate_finite_rate(&x, &a, &p, &[], &mut ZeroNoise) {
            Err(Error::BlowUp { time, .. }) => assert_abs_diff_eq!(time, 100f64.ln() / 5.0, epsilon = 0.05),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    fn normal_cdf(z: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
    }

    #[test]
    fn killed_position_matches_its_law() {
        use crate::stats::{ks_one_sample, ks_one_sample_critical};
        let (x, v) = (0.3, 0.25f64);
        let s = v.sqrt();
        let mut rng = stream(21, StreamTag::FiniteRate, 0);
        let ys: Vec<f64> = (0..20_000).map(|_| killed_position(x, v, &mut rng)).collect();
        let norm = normal_cdf(x / s) - normal_cdf(-x / s);
        let cdf = |y: f64| {
            if y <= 0.0 {
                return 0.0;
            }
            (normal_cdf((y - x) / s) - normal_cdf(-x / s) - normal_cdf((y + x) / s) + normal_cdf(x / s)) / norm
        };
        let d = ks_one_sample(&ys, cdf);
        assert!(d < ks_one_sample_critical(ys.len(), 0.01), "D = {d}");
    }

    #[test]
    fn stopped_brownian_survival_and_mean() {
        let (x1, x2, v) = (0.4, 0.7, 0.3);
        let n = 100_000;
        let mut rng = stream(22, StreamTag::FiniteRate, 0);
        let (mut alive, mut m1, mut m2) = (0usize, 0.0, 0.0);
        for _ in 0..n {
            let (y1, y2) = stopped_brownian(x1, x2, v, &mut rng);
            assert!(y1 >= 0.0 && y2 >= 0.0 && (y1 == 0.0 || y2 == 0.0 || (y1 > 0.0 && y2 > 0.0)));
            alive += (y1 > 0.0 && y2 > 0.0) as usize;
            m1 += y1;
            m2 += y2;
        }
        let erf = statrs::function::erf::erf;
        let p = erf(x1 / (2.0 * v).sqrt()) * erf(x2 / (2.0 * v).sqrt());
        let got = alive as f64 / n as f64;
        assert!(
            (got - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(),
            "{got} vs {p}"
        );
        // Stopped coordinates are bounded-variance martingales.
        let se = (v / n as f64).sqrt();
        assert!((m1 / n as f64 - x1).abs() < 4.0 * se);
        assert!((m2 / n as f64 - x2).abs() < 4.0 * se);
    }

    #[test]
    fn absorbed_step_ends_on_quadrant_and_freezes_on_e() {
        let a = MigrationMatrix::zeros(2);
        let x = Config::from_pairs(&[(0.5, 0.5), (2.0, 0.0)]).unwrap();
        let p = FiniteRateParams::new(1000.0, 1.0).unwrap().with_dt(0.1).unwrap();
        let mut rng = stream(23, StreamTag::FiniteRate, 0);
        let path = simulate_finite_rate(&x, &a, &p, &[], &mut rng).unwrap();
        let end = path.states.last().unwrap().sites();
        // γσ²h = 25 per step: the first site is absorbed on an axis.
        assert!(end[0].x1 == 0.0 || end[0].x2 == 0.0);
        assert_eq!(end[1], x.sites()[1]);
    }

    #[test]
    fn schemes_parse_round_trip() {
        for s in [Scheme::Absorbed, Scheme::Clamped] {
            assert_eq!(Scheme::parse(s.as_str()).unwrap(), s);
        }
        assert!(Scheme::parse("implicit").is_err());
        assert_eq!(Scheme::default(), Scheme::Absorbed);
    }

    #[test]
    fn default_dt_rule() {
        assert_eq!(FiniteRateParams::default_dt(0.5), 1e-4);
        assert_abs_diff_eq!(FiniteRateParams::default_dt(100.0), 1e-6, epsilon = 1e-20);
        assert!(FiniteRateParams::new(1.0, 1.0).unwrap().with_dt(2.0).is_err());
    }
}
