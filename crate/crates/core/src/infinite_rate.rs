//! Event-driven simulation of the infinite-rate system at a fixed small-jump
//! cutoff `ε`.
//!
//! Every occupied site carries a single type `i` with mass `z`. Between jumps
//! the masses follow
//!
//! ```text
//! dz/dt = (A x_i)(k) - c₁(ε/z) (A x_{3-i})(k)
//! ```
//!
//! and a site jumps at rate `(A x_{3-i})(k)/z · ν(region ε/z)`. A jump draws
//! `y` from the truncated `ν`: on the u-axis the mass is multiplied by `u`,
//! on the v-axis the type flips and the new mass is `v z`. Jump times come
//! from an integrated-rate exponential clock along the drift.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::jump_measure::{compensator, sample_nu, scaled_region_mass, Axis, NuRegion};
use crate::migration::MigrationMatrix;
use crate::state::{validate_e, Config, Site, TypePair};

/// Smallest ODE sub-step before giving up.
const MIN_SUBSTEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InfRateParams {
    pub epsilon: f64,
    pub t_end: f64,
    /// Largest sub-step of the between-jump integration.
    pub ode_dt: f64,
    /// Relative tolerance of the Euler/Heun step-doubling check.
    pub ode_rtol: f64,
    /// `l`: sites with positive inflow of both types are seeded with type 2
    /// at mass `1/l`.
    pub seed_mass_inv: f64,
    /// Sites held at their initial value.
    pub frozen: Vec<Site>,
}

impl InfRateParams {
    pub fn new(epsilon: f64, t_end: f64) -> Result<Self> {
        let p = InfRateParams {
            epsilon,
            t_end,
            ode_dt: 1e-3f64.min(t_end),
            ode_rtol: 1e-3,
            seed_mass_inv: 1e3,
            frozen: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_ode_dt(mut self, ode_dt: f64) -> Result<Self> {
        self.ode_dt = ode_dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed_mass_inv(mut self, l: f64) -> Result<Self> {
        self.seed_mass_inv = l;
        self.validate()?;
        Ok(self)
    }

    pub fn with_frozen(mut self, frozen: Vec<Site>) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return domain(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return domain(format!("T must be positive, got {}", self.t_end));
        }
        if !(self.ode_dt > 0.0 && self.ode_dt <= self.t_end) {
            return domain(format!("need 0 < ode_dt <= T, got {}", self.ode_dt));
        }
        if !(self.ode_rtol > 0.0) {
            return domain("ode_rtol must be positive");
        }
        if !(self.seed_mass_inv > 0.0 && self.seed_mass_inv.is_finite()) {
            return domain(format!("seed_mass_inv must be positive, got {}", self.seed_mass_inv));
        }
        Ok(())
    }

    fn frozen_mask(&self, n: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; n];
        for &k in &self.frozen {
            if k >= n {
                return domain(format!("frozen site {k} outside window of {n} sites"));
            }
            mask[k] = true;
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presence {
    None,
    Type1,
    Type2,
}

impl Presence {
    pub fn of(i: u8) -> Presence {
        match i {
            1 => Presence::Type1,
            2 => Presence::Type2,
            _ => panic!("type index must be 1 or 2"),
        }
    }

    pub fn index(self) -> Option<u8> {
        match self {
            Presence::None => None,
            Presence::Type1 => Some(1),
            Presence::Type2 => Some(2),
        }
    }

    /// 0 for empty, else the type index.
    pub fn code(self) -> u8 {
        self.index().unwrap_or(0)
    }
}

/// A site of an `E`-valued configuration. A site may carry a type at mass
/// zero while it is being filled by single-type inflow; it converts to the
/// zero pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteState {
    pub present: Presence,
    pub mass: f64,
}

impl SiteState {
    pub const EMPTY: SiteState = SiteState {
        present: Presence::None,
        mass: 0.0,
    };

    pub fn from_pair(p: TypePair) -> Result<SiteState> {
        if !p.in_e() {
            return domain(format!("pair ({}, {}) is not in E", p.x1, p.x2));
        }
        Ok(if p.x1 > 0.0 {
            SiteState {
                present: Presence::Type1,
                mass: p.x1,
            }
        } else if p.x2 > 0.0 {
            SiteState {
                present: Presence::Type2,
                mass: p.x2,
            }
        } else {
            SiteState::EMPTY
        })
    }

    pub fn to_pair(self) -> TypePair {
        match self.present {
            Presence::None => TypePair::ZERO,
            Presence::Type1 => TypePair::new(self.mass, 0.0),
            Presence::Type2 => TypePair::new(0.0, self.mass),
        }
    }

    /// Presence as seen from the pair: a zero mass reads as empty.
    pub fn observed(self) -> Presence {
        if self.mass > 0.0 {
            self.present
        } else {
            Presence::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Multiply,
    Flip,
    Seed,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Multiply => "MULTIPLY",
            Branch::Flip => "FLIP",
            Branch::Seed => "SEED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: Site,
    pub branch: Branch,
    /// Multiplier for `Multiply`, new mass for `Flip` and `Seed`.
    pub value: f64,
    pub mass_before: f64,
}

impl Event {
    /// Size of the jump in the state: `|u - 1| z` or the new mass.
    pub fn magnitude(&self) -> f64 {
        match self.branch {
            Branch::Multiply => (self.value - 1.0).abs() * self.mass_before,
            Branch::Flip | Branch::Seed => self.value,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Config>,
}

fn to_sites(x: &Config) -> Result<Vec<SiteState>> {
    x.sites().iter().map(|&p| SiteState::from_pair(p)).collect()
}

fn to_config(sites: &[SiteState]) -> Config {
    Config::from_raw(sites.iter().map(|s| s.to_pair()).collect(), true)
}

fn require_e(x: &Config) -> Result<()> {
    if !validate_e(x) {
        return Err(Error::Contract("state is not E-valued".into()));
    }
    Ok(())
}

/// `(A x₁)(k)`, `(A x₂)(k)` for every site.
fn flows(a: &MigrationMatrix, sites: &[SiteState], f1: &mut [f64], f2: &mut [f64]) {
    for k in 0..sites.len() {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (w, s) in a.row(k).iter().zip(sites) {
            match s.present {
                Presence::Type1 => s1 += w * s.mass,
                Presence::Type2 => s2 += w * s.mass,
                Presence::None => {}
            }
        }
        f1[k] = s1;
        f2[k] = s2;
    }
}

#[inline]
fn rate_at(present: Presence, z: f64, f1: f64, f2: f64, eps: f64) -> f64 {
    let opposite = match present {
        Presence::Type1 => f2,
        Presence::Type2 => f1,
        Presence::None => return 0.0,
    };
    if z <= 0.0 || opposite <= 0.0 {
        return 0.0;
    }
    // (F/z) ν(region) = (F/ε) δ ν(region); the second form survives z → 0.
    opposite / eps * scaled_region_mass(eps / z)
}

#[inline]
fn drift_at(present: Presence, z: f64, f1: f64, f2: f64, eps: f64) -> f64 {
    let (own, opposite) = match present {
        Presence::Type1 => (f1, f2),
        Presence::Type2 => (f2, f1),
        Presence::None => return 0.0,
    };
    if z <= 0.0 || opposite == 0.0 {
        return own;
    }
    own - compensator(eps / z) * opposite
}

/// Jump intensity of site `k`.
pub fn jump_rate(state: &Config, a: &MigrationMatrix, params: &InfRateParams, k: Site) -> f64 {
    let s = match state.sites().get(k).map(|&p| SiteState::from_pair(p)) {
        Some(Ok(s)) => s,
        _ => return 0.0,
    };
    let (own_row, x) = (a.row(k), state.sites());
    let f1: f64 = own_row.iter().zip(x).map(|(w, p)| w * p.x1).sum();
    let f2: f64 = own_row.iter().zip(x).map(|(w, p)| w * p.x2).sum();
    rate_at(s.present, s.mass, f1, f2, params.epsilon)
}

/// Continuous part of the dynamics on a window, with frozen sites.
pub(crate) struct Dynamics<'a> {
    a: &'a MigrationMatrix,
    eps: f64,
    rtol: f64,
    frozen: Vec<bool>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

impl<'a> Dynamics<'a> {
    fn new(a: &'a MigrationMatrix, params: &InfRateParams) -> Result<Self> {
        let n = a.len();
        Ok(Dynamics {
            a,
            eps: params.epsilon,
            rtol: params.ode_rtol,
            frozen: params.frozen_mask(n)?,
            f1: vec![0.0; n],
            f2: vec![0.0; n],
        })
    }

    fn derivative(&mut self, sites: &[SiteState], out: &mut [f64]) {
        flows(self.a, sites, &mut self.f1, &mut self.f2);
        for (k, s) in sites.iter().enumerate() {
            out[k] = if self.frozen[k] {
                0.0
            } else {
                drift_at(s.present, s.mass, self.f1[k], self.f2[k], self.eps)
            };
        }
    }

    fn site_rates(&mut self, sites: &[SiteState], out: &mut [f64]) {
        flows(self.a, sites, &mut self.f1, &mut self.f2);
        for (k, s) in sites.iter().enumerate() {
            out[k] = if self.frozen[k] {
                0.0
            } else {
                rate_at(s.present, s.mass, self.f1[k], self.f2[k], self.eps)
            };
        }
    }

    /// Fills empty sites that receive inflow; returns the seed events.
    fn seed(&mut self, sites: &mut [SiteState], l: f64, time: f64, events: &mut Vec<Event>) {
        let needs = sites.iter().enumerate().any(|(k, s)| !self.frozen[k] && s.mass == 0.0);
        if !needs {
            return;
        }
        flows(self.a, sites, &mut self.f1, &mut self.f2);
        for k in 0..sites.len() {
            if self.frozen[k] || sites[k].mass != 0.0 {
                continue;
            }
            let next = seed_rule(self.f1[k], self.f2[k], l);
            if next.present != sites[k].present || next.mass != 0.0 {
                if next.present != Presence::None {
                    events.push(Event {
                        time,
                        site: k,
                        branch: Branch::Seed,
                        value: next.mass,
                        mass_before: 0.0,
                    });
                }
                sites[k] = next;
            }
        }
    }

    /// One Heun sub-step of at most `h`, halving until the step-doubling
    /// error and positivity checks pass. Returns the step taken.
    fn substep(&mut self, sites: &[SiteState], h: f64, out: &mut Vec<SiteState>) -> Result<f64> {
        let n = sites.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        self.derivative(sites, &mut k1);
        let mut h = h;
        loop {
            out.clear();
            out.extend(sites.iter().zip(&k1).map(|(s, d)| SiteState {
                present: s.present,
                mass: s.mass + h * d,
            }));
            let euler_ok = out
                .iter()
                .zip(sites)
                .all(|(e, s)| e.mass >= 0.0 || s.present == Presence::None);
            if euler_ok {
                self.derivative(out, &mut k2);
                let mut ok = true;
                for k in 0..n {
                    let m0 = sites[k].mass;
                    let euler = out[k].mass;
                    let heun = m0 + 0.5 * h * (k1[k] + k2[k]);
                    if heun < 0.0 || (m0 > 0.0 && heun == 0.0) {
                        ok = false;
                        break;
                    }
                    if (heun - euler).abs() > self.rtol * m0.max(heun) {
                        ok = false;
                        break;
                    }
                    out[k].mass = heun;
                }
                if ok {
                    return Ok(h);
                }
            }
            h *= 0.5;
            if h < MIN_SUBSTEP {
                return Err(Error::Numerical {
                    time: f64::NAN,
                    message: format!("between-jump ODE needs sub-steps below {MIN_SUBSTEP}"),
                });
            }
        }
    }
}

/// What an empty site becomes given its inflows `(A x₁)(k)`, `(A x₂)(k)`.
fn seed_rule(f1: f64, f2: f64, l: f64) -> SiteState {
    match (f1 > 0.0, f2 > 0.0) {
        (true, true) => SiteState {
            present: Presence::Type2,
            mass: 1.0 / l,
        },
        (true, false) => SiteState {
            present: Presence::Type1,
            mass: 0.0,
        },
        (false, true) => SiteState {
            present: Presence::Type2,
            mass: 0.0,
        },
        (false, false) => SiteState::EMPTY,
    }
}

/// State of an empty site `k` once it is opened to inflow: a single inflowing
/// type is placed at mass zero and grows by the ODE; with both types flowing
/// in, type 2 is seeded at mass `1/l`.
pub fn seed_empty_site(state: &Config, k: Site, a: &MigrationMatrix, params: &InfRateParams) -> Result<SiteState> {
    require_e(state)?;
    let p = state.site(k);
    if !p.is_zero() {
        return Err(Error::Contract(format!("site {k} is not empty")));
    }
    let row = a.row(k);
    let f1: f64 = row.iter().zip(state.sites()).map(|(w, p)| w * p.x1).sum();
    let f2: f64 = row.iter().zip(state.sites()).map(|(w, p)| w * p.x2).sum();
    Ok(seed_rule(f1, f2, params.seed_mass_inv))
}

/// Integrates the between-jump ODE over `dt` without jumps or seeding.
pub fn drift_between_jumps(state: &Config, a: &MigrationMatrix, params: &InfRateParams, dt: f64) -> Result<Config> {
    require_e(state)?;
    params.validate()?;
    let mut dynamics = Dynamics::new(a, params)?;
    let mut sites = to_sites(state)?;
    let mut next = Vec::with_capacity(sites.len());
    let mut t = 0.0;
    while t < dt {
        let h = params.ode_dt.min(dt - t);
        let taken = dynamics.substep(&sites, h, &mut next)?;
        std::mem::swap(&mut sites, &mut next);
        t = if taken == dt - t { dt } else { t + taken };
    }
    Ok(to_config(&sites))
}

/// Pluggable continuous dynamics for the exponential clock.
pub trait ClockDynamics {
    type State: Clone;

    fn site_rates(&mut self, state: &Self::State, out: &mut Vec<f64>);

    /// Advances by at most `h`; returns the new state and the step taken.
    fn advance(&mut self, state: &Self::State, h: f64) -> Result<(Self::State, f64)>;
}

impl ClockDynamics for Dynamics<'_> {
    type State = Vec<SiteState>;

    fn site_rates(&mut self, state: &Self::State, out: &mut Vec<f64>) {
        out.resize(state.len(), 0.0);
        Dynamics::site_rates(self, state, out);
    }

    fn advance(&mut self, state: &Self::State, h: f64) -> Result<(Self::State, f64)> {
        let mut out = Vec::with_capacity(state.len());
        let taken = self.substep(state, h, &mut out)?;
        Ok((out, taken))
    }
}

/// Result of one run of the clock.
#[derive(Debug, Clone)]
pub struct ClockOutcome<S> {
    pub time: f64,
    pub site: Option<Site>,
    pub state: S,
}

/// Runs the integrated-rate clock from `t_now` with budget `e`: the total
/// rate is integrated along the dynamics (trapezoid per sub-step) until it
/// reaches `e`, then a site is chosen in proportion to the rates at that
/// time. Returns `site = None` at `t_max`.
pub fn run_clock<D: ClockDynamics, R: Rng + ?Sized>(
    dynamics: &mut D,
    state: D::State,
    t_now: f64,
    t_max: f64,
    max_step: f64,
    budget: f64,
    rng: &mut R,
) -> Result<ClockOutcome<D::State>> {
    let mut rates = Vec::new();
    let mut state = state;
    let mut t = t_now;
    let mut remaining = budget;
    dynamics.site_rates(&state, &mut rates);
    let mut lambda0: f64 = rates.iter().sum();
    while t < t_max {
        let h = max_step.min(t_max - t);
        let (next, taken) = dynamics.advance(&state, h)?;
        dynamics.site_rates(&next, &mut rates);
        let lambda1: f64 = rates.iter().sum();
        if !lambda1.is_finite() {
            return Err(Error::Numerical {
                time: t + taken,
                message: format!("non-finite jump rate {lambda1}"),
            });
        }
        let area = 0.5 * taken * (lambda0 + lambda1);
        if area < remaining {
            remaining -= area;
            t = if taken == t_max - t { t_max } else { t + taken };
            state = next;
            lambda0 = lambda1;
            continue;
        }
        // Crossing inside this step; Λ is linear to the order of the scheme.
        let slope = (lambda1 - lambda0) / taken;
        let tau = if slope.abs() * taken <= 1e-12 * lambda0 {
            remaining / lambda0
        } else {
            let disc = (lambda0 * lambda0 + 2.0 * slope * remaining).max(0.0);
            2.0 * remaining / (lambda0 + disc.sqrt())
        }
        .clamp(0.0, taken);
        let (at, tau_taken) = if tau == taken {
            (next, taken)
        } else {
            dynamics.advance(&state, tau)?
        };
        dynamics.site_rates(&at, &mut rates);
        let lambda_tau: f64 = rates.iter().sum();
        if tau_taken < tau {
            remaining = (remaining - 0.5 * tau_taken * (lambda0 + lambda_tau)).max(0.0);
            t += tau_taken;
            state = at;
            lambda0 = lambda_tau;
            continue;
        }
        let time = t + tau;
        if lambda_tau <= 0.0 {
            state = at;
            t = time;
            lambda0 = 0.0;
            remaining = 0.0;
            continue;
        }
        let site = choose_site(&rates, lambda_tau, rng);
        return Ok(ClockOutcome {
            time,
            site: Some(site),
            state: at,
        });
    }
    Ok(ClockOutcome {
        time: t_max,
        site: None,
        state,
    })
}

fn choose_site<R: Rng + ?Sized>(rates: &[f64], total: f64, rng: &mut R) -> Site {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            acc += r;
            last = k;
            if target < acc {
                return k;
            }
        }
    }
    last
}

/// Drift-advances `state` to the next jump time of the integrated-rate
/// clock, or to `t_max` if no jump occurs first.
pub fn advance_to_next_event<R: Rng + ?Sized>(
    state: &Config,
    a: &MigrationMatrix,
    params: &InfRateParams,
    t_now: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<(f64, Option<Site>, Config)> {
    require_e(state)?;
    params.validate()?;
    let mut dynamics = Dynamics::new(a, params)?;
    let budget: f64 = Exp1.sample(rng);
    let out = run_clock(
        &mut dynamics,
        to_sites(state)?,
        t_now,
        t_max,
        params.ode_dt,
        budget,
        rng,
    )
    .map_err(|e| with_time(e, t_now))?;
    Ok((out.time, out.site, to_config(&out.state)))
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::Numerical { time, message } if time.is_nan() => Error::Numerical { time: t, message },
        other => other,
    }
}

/// Jump at an occupied site: a draw `y` from `ν` restricted to
/// `NuRegion(ε/z)` either multiplies the mass by `u` or flips the type with
/// new mass `v z`.
fn jump_site<R: Rng + ?Sized>(site: &mut SiteState, eps: f64, rng: &mut R) -> Result<(Branch, f64)> {
    let i = site
        .present
        .index()
        .filter(|_| site.mass > 0.0)
        .ok_or_else(|| Error::Contract("jump at an empty site".into()))?;
    let z = site.mass;
    let y = sample_nu(NuRegion::new(eps / z)?, rng);
    Ok(match y.axis() {
        Axis::U => {
            site.mass = y.coord() * z;
            if site.mass == 0.0 {
                site.present = Presence::None;
            }
            (Branch::Multiply, y.coord())
        }
        Axis::V => {
            site.present = Presence::of(3 - i);
            site.mass = y.coord() * z;
            (Branch::Flip, site.mass)
        }
    })
}

/// Applies one jump at site `k`.
pub fn apply_jump<R: Rng + ?Sized>(state: &Config, k: Site, params: &InfRateParams, rng: &mut R) -> Result<Config> {
    require_e(state)?;
    let mut sites = to_sites(state)?;
    let site = sites
        .get_mut(k)
        .ok_or_else(|| Error::Contract(format!("site {k} outside the window")))?;
    jump_site(site, params.epsilon, rng)?;
    Ok(to_config(&sites))
}

/// Simulates `[0, T]` and records the state at each requested time in
/// `[0, T]` plus at `T`.
pub fn simulate_infinite_rate<R: Rng + ?Sized>(
    x0: &Config,
    a: &MigrationMatrix,
    params: &InfRateParams,
    snapshot_times: &[f64],
    rng: &mut R,
) -> Result<EventLog> {
    params.validate()?;
    require_e(x0)?;
    if x0.len() != a.len() {
        return domain("initial state and kernel have different windows");
    }
    let mut targets: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| (0.0..=params.t_end).contains(&t))
        .collect();
    targets.push(params.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut dynamics = Dynamics::new(a, params)?;
    let mut sites = to_sites(x0)?;
    let mut log = EventLog::default();
    let mut t = 0.0;
    for &target in &targets {
        loop {
            dynamics.seed(&mut sites, params.seed_mass_inv, t, &mut log.events);
            if t >= target {
                break;
            }
            let budget: f64 = Exp1.sample(rng);
            let out =
                run_clock(&mut dynamics, sites, t, target, params.ode_dt, budget, rng).map_err(|e| with_time(e, t))?;
            sites = out.state;
            t = out.time;
            if let Some(k) = out.site {
                let mass_before = sites[k].mass;
                let (branch, value) = jump_site(&mut sites[k], params.epsilon, rng)?;
                log.events.push(Event {
                    time: t,
                    site: k,
                    branch,
                    value,
                    mass_before,
                });
            }
            debug_assert!(sites.iter().all(|s| s.mass >= 0.0));
        }
        log.snapshot_times.push(target);
        log.snapshots.push(to_config(&sites));
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn two_site() -> MigrationMatrix {
        MigrationMatrix::cycle(2)
    }

    fn opposed() -> Config {
        Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn rate_examples() {
        let p = InfRateParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            jump_rate(&opposed(), &two_site(), &p, 0),
            5.0 / (3.0 * PI),
            epsilon = 1e-14
        );
        assert_eq!(jump_rate(&opposed(), &MigrationMatrix::zeros(2), &p, 0), 0.0);
    }

    #[test]
    fn rate_times_mass_nondecreasing() {
        let eps = 0.1;
        let mut last = 0.0;
        for i in 1..400 {
            let z = i as f64 * 0.01;
            let r = z * rate_at(Presence::Type1, z, 0.0, 1.0, eps);
            assert!(r >= last, "z = {z}");
            last = r;
        }
    }

    #[test]
    fn rate_itself_is_not_monotone_in_mass() {
        // δ·ν(region δ) rises above its δ → 0 limit 2/π before falling off
        let r = |z: f64| rate_at(Presence::Type1, z, 0.0, 1.0, 0.1);
        assert!(r(0.5) > r(2.0));
        assert!(r(0.5) > r(100.0));
        assert!(r(0.05) < r(0.5));
    }

    #[test]
    fn rate_stays_finite_as_mass_vanishes() {
        for z in [1e-12, 1e-300, 1e-320] {
            let r = rate_at(Presence::Type1, z, 0.0, 1.0, 0.02);
            assert!(r.is_finite() && r >= 0.0, "z={z}: {r}");
            assert!(drift_at(Presence::Type1, z, 0.0, 1.0, 0.02).is_finite());
        }
        assert!(rate_at(Presence::Type1, 1e-320, 0.0, 1.0, 0.02) < 1e-200);
    }

    #[test]
    fn drift_example() {
        let (f1, f2) = (-1.0, 1.0);
        assert_abs_diff_eq!(drift_at(Presence::Type1, 1.0, f1, f2, 1.0), -1.24361, epsilon = 5e-5);
        assert_abs_diff_eq!(
            drift_at(Presence::Type1, 1.0, f1, f2, 1.0),
            -1.0 - compensator(1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn drift_without_kernel_is_identity() {
        let p = InfRateParams::new(0.1, 1.0).unwrap();
        let out = drift_between_jumps(&opposed(), &MigrationMatrix::zeros(2), &p, 0.5).unwrap();
        assert_eq!(out.sites(), opposed().sites());
    }

    #[test]
    fn drift_without_opposite_flow_is_linear() {
        let a = two_site();
        let x = Config::from_pairs(&[(1.0, 0.0), (0.0, 0.0)]).unwrap();
        let p = InfRateParams::new(0.1, 1.0).unwrap().with_ode_dt(1e-4).unwrap();
        let out = drift_between_jumps(&x, &a, &p, 0.3).unwrap();
        // the empty site is not seeded here, so this is dz = -z
        assert_abs_diff_eq!(out.site(0).x1, (-0.3f64).exp(), epsilon = 1e-8);
        assert_eq!(out.site(1), TypePair::ZERO);
    }

    #[test]
    fn jump_examples() {
        let mut rng = stream(3, StreamTag::InfiniteRate, 0);
        let x = Config::from_pairs(&[(0.0, 5.0)]).unwrap();
        let p = InfRateParams::new(0.1, 1.0).unwrap();
        for _ in 0..200 {
            let out = apply_jump(&x, 0, &p, &mut rng).unwrap();
            assert!(validate_e(&out));
            assert_ne!(out, x);
        }
        assert!(apply_jump(&Config::zeros(1), 0, &p, &mut rng).is_err());
    }

    #[test]
    fn jump_branches_respect_region() {
        let p = InfRateParams::new(0.5, 1.0).unwrap();
        let mut rng = stream(4, StreamTag::InfiniteRate, 0);
        let mut flips = 0;
        for _ in 0..2000 {
            let mut s = SiteState {
                present: Presence::Type2,
                mass: 2.0,
            };
            let (branch, value) = jump_site(&mut s, p.epsilon, &mut rng).unwrap();
            match branch {
                Branch::Multiply => {
                    assert_eq!(s.present, Presence::Type2);
                    assert!((value - 1.0).abs() >= 0.25);
                }
                Branch::Flip => {
                    flips += 1;
                    assert_eq!(s.present, Presence::Type1);
                    assert!(value >= 0.5);
                }
                Branch::Seed => unreachable!(),
            }
        }
        assert!(flips > 0);
    }

    #[test]
    fn seed_rules() {
        let a = MigrationMatrix::cycle(3);
        let p = InfRateParams::new(0.1, 1.0).unwrap();
        let one = Config::from_pairs(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).unwrap();
        let s = seed_empty_site(&one, 1, &a, &p).unwrap();
        assert_eq!(
            s,
            SiteState {
                present: Presence::Type1,
                mass: 0.0
            }
        );
        let none = Config::zeros(3);
        assert_eq!(seed_empty_site(&none, 1, &a, &p).unwrap(), SiteState::EMPTY);
        let both = Config::from_pairs(&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]).unwrap();
        let s = seed_empty_site(&both, 1, &a, &p).unwrap();
        assert_eq!(
            s,
            SiteState {
                present: Presence::Type2,
                mass: 1e-3
            }
        );
        assert!(seed_empty_site(&both, 0, &a, &p).is_err());
    }

    #[test]
    fn zero_kernel_path_is_constant() {
        let a = MigrationMatrix::zeros(2);
        let p = InfRateParams::new(0.1, 1.0).unwrap();
        let mut rng = stream(5, StreamTag::InfiniteRate, 0);
        let log = simulate_infinite_rate(&opposed(), &a, &p, &[0.5], &mut rng).unwrap();
        assert!(log.events.is_empty());
        assert!(log.snapshots.iter().all(|x| x.sites() == opposed().sites()));
        let (t, site, x) = advance_to_next_event(&opposed(), &a, &p, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!((t, site, x.sites()), (1.0, None, opposed().sites()));
    }

    #[test]
    fn paths_stay_e_valued_and_reproducible() {
        let a = MigrationMatrix::cycle(3);
        let x = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]).unwrap();
        let p = InfRateParams::new(0.1, 1.0).unwrap();
        let grid: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let run = |rep| {
            let mut rng = stream(11, StreamTag::InfiniteRate, rep);
            simulate_infinite_rate(&x, &a, &p, &grid, &mut rng).unwrap()
        };
        for rep in 0..20 {
            let log = run(rep);
            assert!(log.snapshots.iter().all(validate_e));
            assert!(log.events.windows(2).all(|w| w[0].time <= w[1].time));
            assert_eq!(log.snapshots, run(rep).snapshots);
        }
    }

    #[test]
    fn frozen_sites_do_not_move() {
        let a = MigrationMatrix::cycle(3);
        let x = Config::from_pairs(&[(1.0, 0.0), (0.0, 1.0), (0.0, 2.0)]).unwrap();
        let p = InfRateParams::new(0.1, 1.0).unwrap().with_frozen(vec![2]);
        let mut rng = stream(12, StreamTag::InfiniteRate, 0);
        let log = simulate_infinite_rate(&x, &a, &p, &[], &mut rng).unwrap();
        assert_eq!(log.snapshots[0].site(2), TypePair::new(0.0, 2.0));
        assert!(log.events.iter().all(|e| e.site != 2));
    }

    struct Frozen(Vec<f64>);

    impl ClockDynamics for Frozen {
        type State = ();
        fn site_rates(&mut self, _: &(), out: &mut Vec<f64>) {
            out.clone_from(&self.0);
        }
        fn advance(&mut self, _: &(), h: f64) -> Result<((), f64)> {
            Ok(((), h))
        }
    }

    #[test]
    fn frozen_clock_hits_budget_exactly() {
        let mut d = Frozen(vec![2.0, 1.0]);
        let mut rng = stream(1, StreamTag::Custom(0), 0);
        let out = run_clock(&mut d, (), 0.0, 10.0, 0.01, 0.75, &mut rng).unwrap();
        assert_abs_diff_eq!(out.time, 0.25, epsilon = 1e-12);
        let out = run_clock(&mut d, (), 0.0, 0.1, 0.01, 0.75, &mut rng).unwrap();
        assert_eq!((out.time, out.site), (0.1, None));
    }

    #[test]
    fn linear_rate_crossing_is_exact() {
        struct Ramp;
        impl ClockDynamics for Ramp {
            type State = f64;
            fn site_rates(&mut self, t: &f64, out: &mut Vec<f64>) {
                out.clear();
                out.push(1.0 + t);
            }
            fn advance(&mut self, t: &f64, h: f64) -> Result<(f64, f64)> {
                Ok((t + h, h))
            }
        }
        // ∫₀^τ (1 + s) ds = 1  →  τ = √3 - 1
        let mut rng = stream(1, StreamTag::Custom(1), 0);
        let out = run_clock(&mut Ramp, 0.0, 0.0, 5.0, 0.1, 1.0, &mut rng).unwrap();
        assert_abs_diff_eq!(out.time, 3f64.sqrt() - 1.0, epsilon = 1e-12);
    }
}
