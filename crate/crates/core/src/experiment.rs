//! Experiment configuration, orchestration and CSV/JSON output.
//!
//! A configuration is JSON or `key = value` lines. Lists are comma
//! separated; pair lists separate sites with `;`, e.g. `x0 = 1,0; 0,1`.
//! Every run writes `<kind>.csv` (plus `events.csv` for infinite-rate runs)
//! and `manifest.json` into the output directory. `MUTCAT_OUT_DIR`
//! overrides the configured directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::duality::{dual_h_table, forward_h_table, gamma_sweep, moment_check, CheckRow, DualityGap, SweepParams};
use crate::error::{Error, Result};
use crate::finite_rate::{simulate_finite_rate, FiniteRateParams, Scheme};
use crate::infinite_rate::{simulate_infinite_rate, InfRateParams, SiteState};
use crate::migration::MigrationMatrix;
use crate::oracle::{oracle_table, ORACLE_DELTAS};
use crate::rng::{replicate, stream, StreamTag};
use crate::state::{validate_e, Config, DualConfig, TypePair};

pub const OUT_DIR_ENV: &str = "MUTCAT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Oracle,
    FiniteRate,
    InfiniteRate,
    Duality,
    GammaSweep,
    Moments,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Oracle => "oracle",
            Kind::FiniteRate => "finite-rate",
            Kind::InfiniteRate => "infinite-rate",
            Kind::Duality => "duality",
            Kind::GammaSweep => "gamma-sweep",
            Kind::Moments => "moments",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "defaults::kernel")]
    pub kernel: String,
    #[serde(default = "defaults::sites")]
    pub sites: usize,
    #[serde(default)]
    pub x0: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub y: Option<Vec<[f64; 2]>>,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::gammas")]
    pub gammas: Vec<f64>,
    /// Finite-rate step; `None` means `1e-4 · min(1, 1/γ)`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Finite-rate scheme, `absorbed` or `clamped`.
    #[serde(default = "defaults::scheme")]
    pub scheme: String,
    #[serde(rename = "T", default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::ode_dt")]
    pub ode_dt: f64,
    #[serde(default = "defaults::seed_mass_inv")]
    pub seed_mass_inv: f64,
    #[serde(default)]
    pub frozen: Vec<usize>,
    #[serde(default = "defaults::reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Observation times for duality and moments; defaults to `[T]`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Time-grid spacing of the γ-sweep functional.
    #[serde(default = "defaults::grid_step")]
    pub grid_step: f64,
    #[serde(default = "defaults::deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "defaults::output")]
    pub output: String,
}

mod defaults {
    pub fn kernel() -> String {
        "cycle".into()
    }
    pub fn sites() -> usize {
        2
    }
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn gammas() -> Vec<f64> {
        vec![1.0, 10.0, 100.0, 1000.0]
    }
    pub fn scheme() -> String {
        "absorbed".into()
    }
    pub fn t_end() -> f64 {
        1.0
    }
    pub fn epsilon() -> f64 {
        0.1
    }
    pub fn ode_dt() -> f64 {
        1e-3
    }
    pub fn seed_mass_inv() -> f64 {
        1e3
    }
    pub fn reps() -> usize {
        1000
    }
    pub fn grid_step() -> f64 {
        0.05
    }
    pub fn deltas() -> Vec<f64> {
        super::ORACLE_DELTAS.to_vec()
    }
    pub fn output() -> String {
        "out".into()
    }
}

#[derive(Clone, Copy)]
enum Field {
    Str,
    Float,
    UInt,
    FloatList,
    UIntList,
    PairList,
}

const FIELDS: &[(&str, Field)] = &[
    ("kind", Field::Str),
    ("kernel", Field::Str),
    ("sites", Field::UInt),
    ("x0", Field::PairList),
    ("y", Field::PairList),
    ("gamma", Field::Float),
    ("gammas", Field::FloatList),
    ("dt", Field::Float),
    ("scheme", Field::Str),
    ("T", Field::Float),
    ("epsilon", Field::Float),
    ("ode_dt", Field::Float),
    ("seed_mass_inv", Field::Float),
    ("frozen", Field::UIntList),
    ("reps", Field::UInt),
    ("seed", Field::UInt),
    ("snapshots", Field::FloatList),
    ("times", Field::FloatList),
    ("grid_step", Field::Float),
    ("deltas", Field::FloatList),
    ("output", Field::Str),
];

fn config_err<T>(location: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::Config {
        location: location.into(),
        message: message.into(),
    })
}

fn parse_value(field: Field, raw: &str, at: &str) -> Result<Value> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .or_else(|_| config_err(at, format!("`{}` is not a number", s.trim())))
    };
    let uint = |s: &str| -> Result<u64> {
        s.trim()
            .parse::<u64>()
            .or_else(|_| config_err(at, format!("`{}` is not a nonnegative integer", s.trim())))
    };
    let list = |s: &str| -> Vec<String> {
        s.split(',')
            .map(|x| x.trim().to_string())
            .filter(|x| !x.is_empty())
            .collect()
    };
    Ok(match field {
        Field::Str => Value::String(raw.trim().to_string()),
        Field::Float => Value::from(num(raw)?),
        Field::UInt => Value::from(uint(raw)?),
        Field::FloatList => Value::Array(
            list(raw)
                .iter()
                .map(|s| num(s).map(Value::from))
                .collect::<Result<_>>()?,
        ),
        Field::UIntList => Value::Array(
            list(raw)
                .iter()
                .map(|s| uint(s).map(Value::from))
                .collect::<Result<_>>()?,
        ),
        Field::PairList => Value::Array(
            raw.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|pair| {
                    let xs = list(pair);
                    if xs.len() != 2 {
                        return config_err(at, format!("`{pair}` is not a pair `a,b`"));
                    }
                    Ok(Value::Array(vec![Value::from(num(&xs[0])?), Value::from(num(&xs[1])?)]))
                })
                .collect::<Result<_>>()?,
        ),
    })
}

fn parse_key_value(text: &str) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let at = format!("line {}", i + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, raw)) = line.split_once('=') else {
            return config_err(at, "expected `key = value`");
        };
        let key = key.trim();
        let Some(&(_, field)) = FIELDS.iter().find(|(k, _)| *k == key) else {
            return config_err(format!("{at}, key `{key}`"), "unknown key");
        };
        if map.contains_key(key) {
            return config_err(format!("{at}, key `{key}`"), "duplicate key");
        }
        map.insert(key.to_string(), parse_value(field, raw, &format!("{at}, key `{key}`"))?);
    }
    Ok(map)
}

/// Parses and validates JSON or `key = value` text, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let map = if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(text)
            .or_else(|e| config_err(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        let Value::Object(map) = value else {
            return config_err("top level", "expected a JSON object");
        };
        if let Some(key) = map.keys().find(|k| !FIELDS.iter().any(|(f, _)| f == k)) {
            return config_err(format!("key `{key}`"), "unknown key");
        }
        map
    } else {
        parse_key_value(text)?
    };
    if !map.contains_key("kind") {
        return config_err("key `kind`", "missing");
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(map)).or_else(|e| config_err("config", e.to_string()))?;
    cfg.normalized()
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            kernel: defaults::kernel(),
            sites: defaults::sites(),
            x0: None,
            y: None,
            gamma: defaults::gamma(),
            gammas: defaults::gammas(),
            dt: None,
            scheme: defaults::scheme(),
            t_end: defaults::t_end(),
            epsilon: defaults::epsilon(),
            ode_dt: defaults::ode_dt(),
            seed_mass_inv: defaults::seed_mass_inv(),
            frozen: Vec::new(),
            reps: defaults::reps(),
            seed: 0,
            snapshots: Vec::new(),
            times: None,
            grid_step: defaults::grid_step(),
            deltas: defaults::deltas(),
            output: defaults::output(),
        }
    }

    /// Canonical JSON form; parsing it gives back the same config.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fills site-dependent defaults and validates every field.
    pub fn normalized(mut self) -> Result<Self> {
        let key = |k: &str| format!("key `{k}`");
        if self.sites == 0 {
            return config_err(key("sites"), "must be at least 1");
        }
        let fixture = |first: [f64; 2], second: [f64; 2]| {
            let mut v = vec![[0.0, 0.0]; self.sites];
            v[0] = first;
            if self.sites > 1 {
                v[1] = second;
            }
            v
        };
        if self.x0.is_none() {
            self.x0 = Some(fixture([1.0, 0.0], [0.0, 1.0]));
        }
        if self.y.is_none() {
            // A single-type y has a deterministic dual, which makes E[H] the
            // same for every γ; the sweep needs both types in y.
            self.y = Some(match self.kind {
                Kind::GammaSweep => fixture([0.5, 0.0], [0.0, 0.5]),
                _ => fixture([0.0, 1.0], [0.0, 0.0]),
            });
        }
        if self.times.is_none() {
            self.times = Some(vec![self.t_end]);
        }
        for (name, pairs) in [("x0", self.x0.as_ref()), ("y", self.y.as_ref())] {
            let pairs = pairs.expect("filled above");
            if pairs.len() != self.sites {
                return config_err(key(name), format!("has {} sites, expected {}", pairs.len(), self.sites));
            }
            if pairs.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return config_err(key(name), "entries must be finite and nonnegative");
            }
        }
        let needs_e = !matches!(self.kind, Kind::Oracle | Kind::FiniteRate);
        if needs_e && !validate_e(&self.initial()?) {
            return config_err(key("x0"), "must be E-valued (x1·x2 = 0 at every site)");
        }
        if self.y.as_ref().expect("filled").iter().any(|p| p[0] * p[1] != 0.0) {
            return config_err(key("y"), "must be E-valued (y1·y2 = 0 at every site)");
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                config_err(key(name), format!("must be positive, got {v}"))
            }
        };
        positive("T", self.t_end)?;
        positive("epsilon", self.epsilon)?;
        positive("ode_dt", self.ode_dt)?;
        positive("seed_mass_inv", self.seed_mass_inv)?;
        positive("grid_step", self.grid_step)?;
        if self.ode_dt > self.t_end {
            return config_err(key("ode_dt"), "must not exceed T");
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
            if dt > self.t_end {
                return config_err(key("dt"), "must not exceed T");
            }
        }
        if Scheme::parse(&self.scheme).is_err() {
            return config_err(
                key("scheme"),
                format!("unknown scheme `{}`; use absorbed or clamped", self.scheme),
            );
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return config_err(key("gamma"), "must be finite and nonnegative");
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return config_err(key("gammas"), "must be a nonempty list of nonnegative numbers");
        }
        for &d in &self.deltas {
            positive("deltas", d)?;
        }
        let in_horizon = |name: &str, ts: &[f64]| {
            if ts.iter().all(|t| (0.0..=self.t_end).contains(t)) {
                Ok(())
            } else {
                config_err(key(name), "times must lie in [0, T]")
            }
        };
        in_horizon("snapshots", &self.snapshots)?;
        in_horizon("times", self.times.as_deref().expect("filled"))?;
        if let Some(&k) = self.frozen.iter().find(|&&k| k >= self.sites) {
            return config_err(key("frozen"), format!("site {k} outside window of {}", self.sites));
        }
        let min_reps = if matches!(self.kind, Kind::Duality | Kind::GammaSweep | Kind::Moments) {
            2
        } else {
            1
        };
        if self.reps < min_reps {
            return config_err(key("reps"), format!("must be at least {min_reps}"));
        }
        self.kernel_matrix()?;
        Ok(self)
    }

    pub fn initial(&self) -> Result<Config> {
        let pairs = self.x0.as_ref().ok_or_else(|| Error::Contract("x0 not set".into()))?;
        Config::from_pairs(&pairs.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
    }

    pub fn dual(&self) -> Result<DualConfig> {
        let pairs = self.y.as_ref().ok_or_else(|| Error::Contract("y not set".into()))?;
        DualConfig::from_dense(&pairs.iter().map(|p| TypePair::new(p[0], p[1])).collect::<Vec<_>>())
    }

    /// `cycle`, `zero`, `biased-cycle:<p>` or `custom:<path>` (CSV rows or
    /// JSON triples).
    pub fn kernel_matrix(&self) -> Result<MigrationMatrix> {
        let at = "key `kernel`";
        let k = self.kernel.as_str();
        let a = if k == "cycle" {
            MigrationMatrix::cycle(self.sites)
        } else if k == "zero" {
            MigrationMatrix::zeros(self.sites)
        } else if let Some(p) = k.strip_prefix("biased-cycle:") {
            let p: f64 = p.parse().or_else(|_| config_err(at, format!("bad bias `{p}`")))?;
            if !(0.0..=1.0).contains(&p) {
                return config_err(at, "bias must lie in [0, 1]");
            }
            MigrationMatrix::biased_cycle(self.sites, p)
        } else if let Some(path) = k.strip_prefix("custom:") {
            let text = fs::read_to_string(path).or_else(|e| config_err(at, format!("cannot read `{path}`: {e}")))?;
            let parsed = if path.ends_with(".json") {
                MigrationMatrix::from_json_triples(&text, Some(self.sites))
            } else {
                MigrationMatrix::from_csv(&text)
            };
            parsed.or_else(|e| config_err(at, e.to_string()))?
        } else {
            return config_err(at, format!("unknown kernel `{k}`"));
        };
        if a.len() != self.sites {
            return config_err(at, format!("kernel has {} sites, expected {}", a.len(), self.sites));
        }
        Ok(a)
    }

    fn inf_params(&self) -> Result<InfRateParams> {
        let mut p = InfRateParams::new(self.epsilon, self.t_end)?
            .with_ode_dt(self.ode_dt)?
            .with_seed_mass_inv(self.seed_mass_inv)?;
        p.frozen = self.frozen.clone();
        Ok(p)
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Output directory after applying [`OUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(&self.output))
    }
}

/// Output of one experiment.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<String>,
    /// All gated rows passed.
    pub pass: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kind: &'static str,
    status: &'static str,
    error: Option<String>,
    config_sha256: String,
    seed: u64,
    reps: usize,
    wall_time_seconds: f64,
    outputs: &'a [String],
    pass: Option<bool>,
    config: &'a ExperimentConfig,
}

pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Runs the experiment, writes CSVs and `manifest.json`. On failure the
/// manifest records the error and a `PARTIAL` marker file is left behind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let cfg = cfg.clone().normalized()?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let marker = dir.join(PARTIAL_MARKER);
    fs::write(&marker, "run in progress or failed\n")?;
    let start = Instant::now();
    let mut files = Vec::new();
    let outcome = dispatch(&cfg, &dir, &mut files);
    let wall = start.elapsed().as_secs_f64();
    let (status, error, pass) = match &outcome {
        Ok(pass) => ("complete", None, Some(*pass)),
        Err(e) => ("partial", Some(e.to_string()), None),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind.name(),
        status,
        error,
        config_sha256: cfg.config_hash(),
        seed: cfg.seed,
        reps: cfg.reps,
        wall_time_seconds: wall,
        outputs: &files,
        pass,
        config: &cfg,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let pass = outcome?;
    fs::remove_file(&marker)?;
    Ok(RunSummary { dir, files, pass })
}

fn write_csv(dir: &Path, name: &str, header: &str, body: &str, files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), format!("{header}\n{body}"))?;
    files.push(name.to_string());
    Ok(())
}

/// Rows of the shared `experiment,parameter,value,se,bound,pass` schema;
/// diagnostics leave `bound` and `pass` empty.
struct CheckTable {
    body: String,
    all_pass: bool,
}

impl CheckTable {
    const HEADER: &'static str = "experiment,parameter,value,se,bound,pass";

    fn new() -> Self {
        CheckTable {
            body: String::new(),
            all_pass: true,
        }
    }

    fn gated(&mut self, row: &CheckRow) {
        let _ = writeln!(
            self.body,
            "{},{},{},{},{},{}",
            row.experiment, row.parameter, row.value, row.se, row.bound, row.pass
        );
        self.all_pass &= row.pass;
    }

    fn diagnostic(&mut self, experiment: &str, parameter: &str, value: f64, se: f64) {
        let _ = writeln!(self.body, "{experiment},{parameter},{value},{se},,");
    }
}

fn dispatch(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    match cfg.kind {
        Kind::Oracle => run_oracle(cfg, dir, files),
        Kind::FiniteRate => run_finite(cfg, dir, files),
        Kind::InfiniteRate => run_infinite(cfg, dir, files),
        Kind::Duality => run_duality(cfg, dir, files),
        Kind::GammaSweep => run_sweep(cfg, dir, files),
        Kind::Moments => run_moments(cfg, dir, files),
    }
}

fn run_oracle(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let rows = oracle_table(&cfg.deltas)?;
    let mut body = String::new();
    for r in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            r.quantity, r.delta, r.closed_form, r.quadrature, r.abs_diff
        );
    }
    write_csv(
        dir,
        "oracle.csv",
        "quantity,delta,closed_form,quadrature,abs_diff",
        &body,
        files,
    )?;
    Ok(rows.iter().all(|r| r.pass()))
}

fn snapshot_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut ts = cfg.snapshots.clone();
    ts.push(cfg.t_end);
    ts.retain(|&t| t > 0.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

fn run_finite(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let a = cfg.kernel_matrix()?;
    let x0 = cfg.initial()?;
    let dt = cfg.dt.unwrap_or_else(|| FiniteRateParams::default_dt(cfg.gamma));
    let params = FiniteRateParams::new(cfg.gamma, cfg.t_end)?
        .with_dt(dt)?
        .with_scheme(Scheme::parse(&cfg.scheme)?);
    let grid = snapshot_grid(cfg);
    let paths = replicate(cfg.reps, |r| {
        let mut rng = stream(cfg.seed, StreamTag::FiniteRate, r);
        simulate_finite_rate(&x0, &a, &params, &grid, &mut rng)
    })?;
    let mut body = String::new();
    for (r, path) in paths.iter().enumerate() {
        for (k, p) in x0.sites().iter().enumerate() {
            let _ = writeln!(body, "{r},0,{k},{},{},0", p.x1, p.x2);
        }
        for ((t, state), deg) in path.times.iter().zip(&path.states).zip(&path.degeneracy) {
            for (k, p) in state.sites().iter().enumerate() {
                let _ = writeln!(body, "{r},{t},{k},{},{},{}", p.x1, p.x2, deg[k]);
            }
        }
    }
    write_csv(
        dir,
        "finite-rate.csv",
        "rep,t,site,x1,x2,degeneracy_integral",
        &body,
        files,
    )?;
    Ok(true)
}

fn run_infinite(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let a = cfg.kernel_matrix()?;
    let x0 = cfg.initial()?;
    let params = cfg.inf_params()?;
    let grid = snapshot_grid(cfg);
    let logs = replicate(cfg.reps, |r| {
        let mut rng = stream(cfg.seed, StreamTag::InfiniteRate, r);
        simulate_infinite_rate(&x0, &a, &params, &grid, &mut rng)
    })?;
    let mut body = String::new();
    let mut events = String::new();
    let mut e_valued = true;
    let site_line = |body: &mut String, r: usize, t: f64, k: usize, p: TypePair| {
        let s = SiteState::from_pair(p).unwrap_or(SiteState::EMPTY);
        let _ = writeln!(body, "{r},{t},{k},{},{}", s.observed().code(), s.mass);
    };
    for (r, log) in logs.iter().enumerate() {
        for (k, &p) in x0.sites().iter().enumerate() {
            site_line(&mut body, r, 0.0, k, p);
        }
        for (t, state) in log.snapshot_times.iter().zip(&log.snapshots) {
            e_valued &= validate_e(state);
            for (k, &p) in state.sites().iter().enumerate() {
                site_line(&mut body, r, *t, k, p);
            }
        }
        for e in &log.events {
            let _ = writeln!(events, "{r},{},{},{},{}", e.time, e.site, e.branch.as_str(), e.value);
        }
    }
    write_csv(dir, "infinite-rate.csv", "rep,t,site,present_type,mass", &body, files)?;
    write_csv(dir, "events.csv", "rep,time,site,branch,value", &events, files)?;
    Ok(e_valued)
}

fn run_duality(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let a = cfg.kernel_matrix()?;
    let x0 = cfg.initial()?;
    let y = cfg.dual()?;
    let params = cfg.inf_params()?;
    let times = cfg.times.clone().expect("normalized");
    let forward = forward_h_table(&x0, std::slice::from_ref(&y), &a, &params, &times, cfg.reps, cfg.seed)?;
    let dual = dual_h_table(&x0, &y, &a, &params, &times, cfg.reps, cfg.seed)?;
    let mut table = CheckTable::new();
    for (ti, &t) in times.iter().enumerate() {
        let g = DualityGap::new(forward[ti][0], dual[ti]);
        let param = format!("t={t};epsilon={}", cfg.epsilon);
        table.diagnostic("forward_re", &param, g.forward.mean.re, g.forward.se_re);
        table.diagnostic("forward_im", &param, g.forward.mean.im, g.forward.se_im);
        table.diagnostic("dual_re", &param, g.dual.mean.re, g.dual.se_re);
        table.diagnostic("dual_im", &param, g.dual.mean.im, g.dual.se_im);
        table.gated(&CheckRow {
            experiment: "duality_gap".into(),
            parameter: param,
            value: g.gap,
            se: g.combined_se(),
            bound: g.threshold,
            pass: g.pass(),
        });
    }
    write_csv(dir, "duality.csv", CheckTable::HEADER, &table.body, files)?;
    Ok(table.all_pass)
}

/// Step rule of the γ-sweep: `dt = 1e-3 · min(1, 1/γ)`.
pub fn sweep_dt(gamma: f64) -> f64 {
    1e-3 * (1.0f64).min(1.0 / gamma)
}

fn run_sweep(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let a = cfg.kernel_matrix()?;
    let x0 = cfg.initial()?;
    let y = cfg.dual()?;
    let sweep = SweepParams {
        gammas: cfg.gammas.clone(),
        t_end: cfg.t_end,
        grid_step: cfg.grid_step,
        dt_rule: sweep_dt,
        scheme: Scheme::parse(&cfg.scheme)?,
        infinite: cfg.inf_params()?,
        n_reps: cfg.reps,
        seed: cfg.seed,
    };
    let result = gamma_sweep(&x0, &y, &a, &sweep)?;
    let mut table = CheckTable::new();
    table.diagnostic(
        "infinite_functional_re",
        "gamma=inf",
        result.infinite.mean.re,
        result.infinite.se_re,
    );
    table.diagnostic(
        "infinite_functional_im",
        "gamma=inf",
        result.infinite.mean.im,
        result.infinite.se_im,
    );
    for row in &result.rows {
        let param = format!("gamma={}", row.gamma);
        table.diagnostic("functional_re", &param, row.functional.mean.re, row.functional.se_re);
        table.diagnostic("functional_im", &param, row.functional.mean.im, row.functional.se_im);
        table.diagnostic("gap", &param, row.gap, row.gap_se);
        table.diagnostic("degeneracy", &param, row.degeneracy, row.degeneracy_se);
    }
    if let (Some(first), Some(last)) = (result.rows.first(), result.rows.last()) {
        let se = first.gap_se.hypot(last.gap_se);
        table.gated(&CheckRow {
            experiment: "gap_decrease".into(),
            parameter: format!("gamma={}->{}", first.gamma, last.gamma),
            value: last.gap,
            se,
            bound: first.gap - 2.0 * se,
            pass: last.gap < first.gap - 2.0 * se,
        });
    }
    for w in result.rows.windows(2) {
        let se = w[0].degeneracy_se.hypot(w[1].degeneracy_se);
        table.gated(&CheckRow {
            experiment: "degeneracy_monotone".into(),
            parameter: format!("gamma={}->{}", w[0].gamma, w[1].gamma),
            value: w[1].degeneracy,
            se,
            bound: w[0].degeneracy + se,
            pass: w[1].degeneracy <= w[0].degeneracy + se,
        });
    }
    write_csv(dir, "gamma-sweep.csv", CheckTable::HEADER, &table.body, files)?;
    Ok(table.all_pass)
}

fn run_moments(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<String>) -> Result<bool> {
    let a = cfg.kernel_matrix()?;
    let x0 = cfg.initial()?;
    let rows = moment_check(
        &x0,
        &a,
        &cfg.inf_params()?,
        cfg.times.as_deref().expect("normalized"),
        cfg.reps,
        cfg.seed,
    )?;
    let mut table = CheckTable::new();
    for r in &rows {
        table.gated(r);
    }
    write_csv(dir, "moments.csv", CheckTable::HEADER, &table.body, files)?;
    Ok(table.all_pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_duality_config_gets_defaults() {
        let cfg = parse_config("kind = duality\n").unwrap();
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.sites, 2);
        assert_eq!(cfg.x0, Some(vec![[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(cfg.y, Some(vec![[0.0, 1.0], [0.0, 0.0]]));
        assert_eq!(cfg.times, Some(vec![1.0]));
    }

    #[test]
    fn negative_epsilon_names_the_key() {
        let err = parse_config("kind = duality\nepsilon = -0.1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("epsilon"), "{err}");
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = parse_config("kind = oracle\n\nbogus = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
        let err = parse_config(r#"{"kind": "oracle", "bogus": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn malformed_values_are_located() {
        let err = parse_config("kind = duality\nx0 = 1,0; 0\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("x0"), "{err}");
        let err = parse_config("kind = duality\nreps = many\n").unwrap_err().to_string();
        assert!(err.contains("reps"), "{err}");
        assert!(parse_config("kind = duality\nx0 = 1,1; 0,1\n").is_err());
        assert!(parse_config("epsilon = 1\n").is_err());
    }

    #[test]
    fn emit_is_canonical_and_idempotent() {
        let text =
            "kind = infinite-rate\nsites = 3\nsnapshots = 0.5, 0.25\nseed = 9 # comment\nkernel = biased-cycle:0.7\n";
        let cfg = parse_config(text).unwrap();
        let once = cfg.emit();
        let again = parse_config(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.emit(), once);
    }

    #[test]
    fn kernel_specs() {
        let mut cfg = ExperimentConfig::new(Kind::Moments);
        cfg.kernel = "biased-cycle:2".into();
        assert!(cfg.clone().normalized().is_err());
        cfg.kernel = "torus".into();
        assert!(cfg.clone().normalized().is_err());
        cfg.kernel = "zero".into();
        assert!(cfg.normalized().unwrap().kernel_matrix().unwrap().is_zero());
    }
}
