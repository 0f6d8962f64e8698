//! Experiment configuration, presets and drivers: full runs with ledger and
//! snapshots, manufactured-solution convergence studies, and the boundary-lift
//! check.
//!
//! Configuration files are flat `key = value` text with `#` comments. The
//! `preset` key selects defaults; every other key overrides one field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fem::infsup::estimate_inf_sup;
use crate::fem::sparse::norm2;
use crate::fem::{build_fe_system, FeSystem, FemError, FieldVector, Space};
use crate::hopf::{build_hopf_extension, estimate_hopf_bound_constant, HopfBoundEstimate, HopfBoundOptions, HopfError, HopfExtension};
use crate::mesh::{delta_from_rayleigh, generate_graded_mesh, generate_uniform_mesh, CavityPreset, GradingParams, Mesh, MeshError};
use crate::scheme::{init_state, Forcing, PicardConfig, Scheme, SchemeConfig, SchemeError, SchemeState, Stepper};
use crate::snapshot::{write_snapshot, SnapshotError};
use crate::stability::{check_sublinear_growth, GrowthReport, StabilityError, StabilityLedger};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Hopf(#[from] HopfError),
    #[error("step {step}: {source}")]
    Step { step: usize, source: SchemeError },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    HeatedCavity,
    RayleighBenard,
    Manufactured,
    DecayTest,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::HeatedCavity => "heated_cavity",
            Preset::RayleighBenard => "rayleigh_benard",
            Preset::Manufactured => "manufactured",
            Preset::DecayTest => "decay_test",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heated_cavity" => Ok(Preset::HeatedCavity),
            "rayleigh_benard" => Ok(Preset::RayleighBenard),
            "manufactured" => Ok(Preset::Manufactured),
            "decay_test" => Ok(Preset::DecayTest),
            _ => Err(format!("unknown preset `{s}`")),
        }
    }
}

/// First-line distance: `c_delta / Ra` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSpec {
    CDelta(f64),
    Delta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub width: f64,
    pub height: f64,
    pub n_core: usize,
    /// `None` picks the smallest count whose widths reach the core spacing.
    pub n_layers: Option<usize>,
    pub stretch: f64,
    pub delta: DeltaSpec,
    pub scheme: Scheme,
    pub dt: f64,
    pub n_steps: usize,
    pub pr: f64,
    pub ra: f64,
    pub xi: [f64; 2],
    pub picard_max_iters: usize,
    pub picard_tol: f64,
    pub out_dir: Option<PathBuf>,
    /// Snapshot every this many steps (and at the end); 0 disables snapshots.
    pub snapshot_every: usize,
    /// Growth checkpoints as times; empty disables the growth check.
    pub checkpoints: Vec<f64>,
    pub growth_margin: f64,
    pub identity_tol: f64,
    pub seed: u64,
    /// Amplitude of the seeded initial temperature perturbation.
    pub perturbation: f64,
    pub estimate_beta: bool,
    pub rates_dt0: f64,
    pub rates_levels: usize,
    pub rates_t_final: f64,
    pub rates_meshes: Vec<usize>,
    pub hopf_samples: usize,
    /// First-line distances for the boundary-lift sweep; empty means the configured one.
    pub hopf_deltas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> ExperimentConfig {
        let base = ExperimentConfig {
            preset,
            width: 1.0,
            height: 1.0,
            n_core: 16,
            n_layers: None,
            stretch: 2.0,
            delta: DeltaSpec::CDelta(1.0),
            scheme: Scheme::LiBdf2,
            dt: 1e-2,
            n_steps: 800,
            pr: 0.71,
            ra: 1e3,
            xi: [0.0, 1.0],
            picard_max_iters: 50,
            picard_tol: 1e-9,
            out_dir: None,
            snapshot_every: 100,
            checkpoints: vec![2.0, 4.0, 8.0],
            growth_margin: 1.25,
            identity_tol: 1e-9,
            seed: 0,
            perturbation: 0.0,
            estimate_beta: false,
            rates_dt0: 0.1,
            rates_levels: 5,
            rates_t_final: 1.0,
            rates_meshes: vec![4, 8, 16],
            hopf_samples: 500,
            hopf_deltas: Vec::new(),
        };
        match preset {
            Preset::HeatedCavity => base,
            Preset::RayleighBenard => ExperimentConfig { perturbation: 1e-3, ..base },
            Preset::DecayTest => ExperimentConfig {
                n_core: 8,
                delta: DeltaSpec::Delta(1e-2),
                scheme: Scheme::LiBdf1,
                n_steps: 500,
                snapshot_every: 0,
                checkpoints: vec![1.0, 2.0, 5.0],
                ..base
            },
            Preset::Manufactured => ExperimentConfig {
                n_core: 4,
                delta: DeltaSpec::Delta(0.05),
                scheme: Scheme::Bdf2,
                dt: 0.1,
                n_steps: 10,
                snapshot_every: 0,
                checkpoints: Vec::new(),
                ..base
            },
        }
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ExperimentError::Config { line: i + 1, message: format!("expected `key = value`, found `{line}`") });
            };
            let key = k.trim().to_owned();
            if entries.insert(key.clone(), (i + 1, v.trim().to_owned())).is_some() {
                return Err(ExperimentError::Config { line: i + 1, message: format!("`{key}` given twice") });
            }
        }
        let Some((line, preset)) = entries.remove("preset") else {
            return Err(ExperimentError::Config { line: 0, message: "missing `preset`".into() });
        };
        let preset = preset.parse::<Preset>().map_err(|message| ExperimentError::Config { line, message })?;
        let mut cfg = ExperimentConfig::preset(preset);
        if let (Some(a), Some(b)) = (entries.get("c_delta"), entries.get("delta")) {
            return Err(ExperimentError::Config { line: a.0.max(b.0), message: "give exactly one of `c_delta` and `delta`".into() });
        }
        for (key, (line, value)) in entries {
            cfg.set(&key, &value).map_err(|message| ExperimentError::Config { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
        ExperimentConfig::parse(&text)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
            if v == "none" || v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|s| num(key, s.trim())).collect()
        }
        match key {
            "preset" => self.preset = value.parse()?,
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "n_core" => self.n_core = num(key, value)?,
            "n_layers" => self.n_layers = if value == "auto" { None } else { Some(num(key, value)?) },
            "stretch" => self.stretch = num(key, value)?,
            "c_delta" => self.delta = DeltaSpec::CDelta(num(key, value)?),
            "delta" => self.delta = DeltaSpec::Delta(num(key, value)?),
            "scheme" => self.scheme = value.parse()?,
            "dt" => self.dt = num(key, value)?,
            "n_steps" => self.n_steps = num(key, value)?,
            "pr" => self.pr = num(key, value)?,
            "ra" => self.ra = num(key, value)?,
            "xi" => {
                let v: Vec<f64> = list(key, value)?;
                let [a, b] = v[..] else { return Err("`xi` needs two components".into()) };
                self.xi = [a, b];
            }
            "picard_max_iters" => self.picard_max_iters = num(key, value)?,
            "picard_tol" => self.picard_tol = num(key, value)?,
            "out_dir" => self.out_dir = if value == "none" { None } else { Some(PathBuf::from(value)) },
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "checkpoints" => self.checkpoints = list(key, value)?,
            "growth_margin" => self.growth_margin = num(key, value)?,
            "identity_tol" => self.identity_tol = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "perturbation" => self.perturbation = num(key, value)?,
            "estimate_beta" => self.estimate_beta = num(key, value)?,
            "rates_dt0" => self.rates_dt0 = num(key, value)?,
            "rates_levels" => self.rates_levels = num(key, value)?,
            "rates_t_final" => self.rates_t_final = num(key, value)?,
            "rates_meshes" => self.rates_meshes = list(key, value)?,
            "hopf_samples" => self.hopf_samples = num(key, value)?,
            "hopf_deltas" => self.hopf_deltas = list(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every field as `key = value`; [`ExperimentConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        fn join<T: std::fmt::Debug>(v: &[T]) -> String {
            if v.is_empty() {
                "none".into()
            } else {
                v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
            }
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("preset", self.preset.name().into());
        kv("width", format!("{:?}", self.width));
        kv("height", format!("{:?}", self.height));
        kv("n_core", self.n_core.to_string());
        kv("n_layers", self.n_layers.map_or("auto".into(), |n| n.to_string()));
        kv("stretch", format!("{:?}", self.stretch));
        match self.delta {
            DeltaSpec::CDelta(c) => kv("c_delta", format!("{c:?}")),
            DeltaSpec::Delta(d) => kv("delta", format!("{d:?}")),
        }
        kv("scheme", self.scheme.name().into());
        kv("dt", format!("{:?}", self.dt));
        kv("n_steps", self.n_steps.to_string());
        kv("pr", format!("{:?}", self.pr));
        kv("ra", format!("{:?}", self.ra));
        kv("xi", join(&self.xi));
        kv("picard_max_iters", self.picard_max_iters.to_string());
        kv("picard_tol", format!("{:?}", self.picard_tol));
        kv("out_dir", self.out_dir.as_ref().map_or("none".into(), |p| p.display().to_string()));
        kv("snapshot_every", self.snapshot_every.to_string());
        kv("checkpoints", join(&self.checkpoints));
        kv("growth_margin", format!("{:?}", self.growth_margin));
        kv("identity_tol", format!("{:?}", self.identity_tol));
        kv("seed", self.seed.to_string());
        kv("perturbation", format!("{:?}", self.perturbation));
        kv("estimate_beta", self.estimate_beta.to_string());
        kv("rates_dt0", format!("{:?}", self.rates_dt0));
        kv("rates_levels", self.rates_levels.to_string());
        kv("rates_t_final", format!("{:?}", self.rates_t_final));
        kv("rates_meshes", join(&self.rates_meshes));
        kv("hopf_samples", self.hopf_samples.to_string());
        kv("hopf_deltas", join(&self.hopf_deltas));
        s
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("stretch", self.stretch),
            ("dt", self.dt),
            ("pr", self.pr),
            ("ra", self.ra),
            ("picard_tol", self.picard_tol),
            ("growth_margin", self.growth_margin),
            ("identity_tol", self.identity_tol),
            ("rates_dt0", self.rates_dt0),
            ("rates_t_final", self.rates_t_final),
            (
                "delta",
                match self.delta {
                    DeltaSpec::CDelta(c) => c,
                    DeltaSpec::Delta(d) => d,
                },
            ),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("`{k}` must be positive and finite, got {v}"));
            }
        }
        if self.n_steps == 0 || self.n_core == 0 || self.picard_max_iters == 0 {
            return bad("`n_steps`, `n_core` and `picard_max_iters` must be at least 1".into());
        }
        if self.perturbation < 0.0 || self.hopf_deltas.iter().any(|d| !(*d > 0.0)) {
            return bad("`perturbation` must be nonnegative and `hopf_deltas` positive".into());
        }
        if !self.checkpoints.is_empty() {
            let steps = self.checkpoint_steps();
            if steps.len() < 3 || steps.windows(2).any(|w| w[0] >= w[1]) || steps[0] == 0 || *steps.last().unwrap() > self.n_steps {
                return bad(format!("checkpoints {:?} must be at least 3 increasing times within (0, {}]", self.checkpoints, self.t_final()));
            }
        }
        if self.preset == Preset::Manufactured && (self.width != 1.0 || self.height != 1.0) {
            return bad("the manufactured preset is defined on the unit square".into());
        }
        if self.rates_levels < 2 || self.rates_meshes.iter().any(|&n| n == 0) {
            return bad("`rates_levels` must be at least 2 and `rates_meshes` positive".into());
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Checkpoint times converted to step indices.
    pub fn checkpoint_steps(&self) -> Vec<usize> {
        self.checkpoints.iter().map(|t| (t / self.dt).round() as usize).collect()
    }

    pub fn cavity(&self) -> CavityPreset {
        let mut c = match self.preset {
            Preset::RayleighBenard => CavityPreset::rayleigh_benard(self.width, self.height),
            _ => CavityPreset::heated_sidewalls(self.width, self.height),
        };
        c.xi = self.xi;
        c
    }

    pub fn first_line(&self) -> Result<f64, ExperimentError> {
        Ok(match self.delta {
            DeltaSpec::CDelta(c) => delta_from_rayleigh(self.ra, c)?,
            DeltaSpec::Delta(d) => d,
        })
    }

    pub fn grading(&self, delta: f64) -> GradingParams {
        let core = self.width.min(self.height) / self.n_core as f64;
        let n_layers = self.n_layers.unwrap_or_else(|| GradingParams::layers_to_core(delta, core, self.stretch));
        GradingParams { n_core: self.n_core, delta, n_layers, stretch: self.stretch }
    }

    pub fn mesh(&self) -> Result<Mesh, ExperimentError> {
        let delta = self.first_line()?;
        Ok(generate_graded_mesh(&self.cavity(), &self.grading(delta))?)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut c = SchemeConfig::new(self.scheme, self.dt, self.n_steps, self.pr, self.ra, self.xi);
        c.picard = PicardConfig { max_iters: self.picard_max_iters, tol_rel: self.picard_tol };
        c.forcing = match self.preset {
            Preset::Manufactured => temporal_forcing(self.pr, self.ra, self.xi),
            _ => Forcing::default(),
        };
        c
    }

    /// Nodal temperature data on the Dirichlet walls.
    pub fn wall_data(&self, system: &FeSystem) -> Result<Vec<(usize, f64)>, ExperimentError> {
        Ok(match self.preset {
            Preset::DecayTest => system.temperature_wall_data(0.0, 0.0)?,
            _ => system.heated_wall_data()?,
        })
    }
}

/// Temporal manufactured temperature `T* = 1 - x + sin(t) x (1 - x)` with `u* = p* = 0`.
pub fn temporal_exact_temperature(x: [f64; 2], t: f64) -> f64 {
    1.0 - x[0] + t.sin() * x[0] * (1.0 - x[0])
}

fn temporal_forcing(pr: f64, ra: f64, xi: [f64; 2]) -> Forcing {
    let prra = pr * ra;
    Forcing {
        f: Some(Arc::new(move |x, t| {
            let tt = temporal_exact_temperature(x, t);
            [-prra * xi[0] * tt, -prra * xi[1] * tt]
        })),
        gamma: Some(Arc::new(|x, t| t.cos() * x[0] * (1.0 - x[0]) + 2.0 * t.sin())),
    }
}

/// Mesh, discrete spaces, boundary lift and initial state of an experiment.
pub struct Setup {
    pub mesh: Mesh,
    pub system: FeSystem,
    pub hopf: HopfExtension,
    pub scheme: SchemeConfig,
    pub initial: SchemeState,
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup, ExperimentError> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    let system = build_fe_system(&mesh)?;
    let hopf = build_hopf_extension(&system, &cfg.wall_data(&system)?)?;
    let (w, h) = (cfg.width, cfg.height);
    let t0: Box<dyn Fn([f64; 2]) -> f64> = match cfg.preset {
        Preset::HeatedCavity => Box::new(move |x| 1.0 - x[0] / w),
        Preset::RayleighBenard => Box::new(move |x| 1.0 - x[1] / h),
        Preset::DecayTest => Box::new(move |x| 16.0 * x[0] * (w - x[0]) * x[1] * (h - x[1]) / (w * w * h * h)),
        Preset::Manufactured => Box::new(|x| temporal_exact_temperature(x, 0.0)),
    };
    let mut initial = init_state(&system, |_| [0.0, 0.0], t0, &hopf.boundary_data);
    if cfg.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fixed = system.dirichlet_mask(Space::Temperature);
        for (c, d) in initial.t.coeffs_mut().iter_mut().zip(fixed) {
            let z: f64 = rng.random_range(-1.0..1.0);
            if !d {
                *c += cfg.perturbation * z;
            }
        }
    }
    Ok(Setup { mesh, system, hopf, scheme: cfg.scheme_config(), initial })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub ledger: StabilityLedger,
    pub growth: Option<GrowthReport>,
    pub checks: Vec<CheckOutcome>,
    pub final_state: SchemeState,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let last = self.ledger.last();
        let _ = writeln!(s, "{} steps of {} to t = {}", last.n, self.ledger.meta.scheme, last.t);
        let _ = writeln!(s, "|T| = {:.6e}  |u| = {:.6e}  |p| = {:.6e}", last.norm_t, last.norm_u, last.norm_p);
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, ExperimentError> {
    std::fs::write(&path, contents).map_err(|source| ExperimentError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Runs the configured simulation, recording every step, and evaluates the
/// enabled checks. With an output directory, writes `ledger.csv`,
/// `growth.txt`/`growth.kv` and snapshots; the ledger is flushed even when a
/// step fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    let s = setup(cfg)?;
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.to_path_buf(), source })?;
    }
    let mut stepper = Stepper::new(&s.system, s.scheme.clone(), &s.hopf)?;
    let mut ledger = StabilityLedger::new(&s.system, &s.hopf, &s.scheme, &s.initial);
    if let DeltaSpec::CDelta(c) = cfg.delta {
        ledger.meta.c_delta = Some(c);
    }
    if cfg.estimate_beta {
        ledger.meta.beta = Some(estimate_inf_sup(&s.system)?.beta);
    }
    let mut files = Vec::new();
    let snapshot = |state: &SchemeState, files: &mut Vec<PathBuf>| -> Result<(), ExperimentError> {
        if let Some(dir) = out {
            let (a, b) = write_snapshot(dir, state, &s.system, &s.hopf)?;
            files.extend([a, b]);
        }
        Ok(())
    };
    let save_ledger = |ledger: &StabilityLedger| -> Result<PathBuf, ExperimentError> {
        let path = out.expect("only called with an output directory").join("ledger.csv");
        ledger.save_csv(&path).map_err(|source| ExperimentError::Io { path: path.clone(), source })?;
        Ok(path)
    };
    if cfg.snapshot_every > 0 {
        snapshot(&s.initial, &mut files)?;
    }
    let mut state = s.initial.clone();
    let mut max_div = 0.0_f64;
    let mut max_mean = 0.0_f64;
    for _ in 0..cfg.n_steps {
        let (next, info) = match stepper.step(&state) {
            Ok(v) => v,
            Err(source) => {
                if out.is_some() {
                    save_ledger(&ledger)?;
                }
                return Err(ExperimentError::Step { step: state.n + 1, source });
            }
        };
        let rec = ledger.record_step(&state, &next, &info, &s.system, &s.hopf, &s.scheme)?;
        max_div = max_div.max(divergence_ratio(&s.system, &next.u));
        max_mean = max_mean.max(rec.pressure_mean.abs());
        if next.n % 50 == 0 {
            log::info!("step {} t = {:.4} |T| = {:.6e} |u| = {:.6e}", next.n, next.time, rec.norm_t, rec.norm_u);
        }
        state = next;
        if cfg.snapshot_every > 0 && (state.n % cfg.snapshot_every == 0 || state.n == cfg.n_steps) {
            snapshot(&state, &mut files)?;
        }
    }

    let mut checks = Vec::new();
    let worst_t = ledger.records().iter().map(|r| r.identity.relative_temperature()).fold(0.0, f64::max);
    let worst_u = ledger.records().iter().map(|r| r.identity.relative_momentum()).fold(0.0, f64::max);
    checks.push(CheckOutcome {
        name: "energy identities",
        passed: worst_t <= cfg.identity_tol && worst_u <= cfg.identity_tol,
        detail: format!("worst relative residuals {worst_t:.3e} (temperature), {worst_u:.3e} (momentum); tolerance {:.1e}", cfg.identity_tol),
    });
    checks.push(CheckOutcome {
        name: "incompressibility",
        passed: max_div <= 1e-10 && max_mean <= 1e-12,
        detail: format!("max |Bu|/|u| = {max_div:.3e}, max |mean p| = {max_mean:.3e}"),
    });
    if cfg.preset == Preset::DecayTest {
        let worst = ledger.records().windows(2).map(|w| w[1].norm_t - w[0].norm_t).fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckOutcome { name: "monotone decay", passed: worst <= 0.0, detail: format!("largest step change in |T| {worst:.3e}") });
    }
    let growth = if cfg.checkpoints.is_empty() {
        None
    } else {
        let g = check_sublinear_growth(&ledger, &cfg.checkpoint_steps(), cfg.growth_margin)?;
        checks.push(CheckOutcome { name: "growth Q", passed: g.q_within_margin(), detail: format!("Q ratio {:.4} (margin {})", g.q_ratio, g.margin) });
        checks.push(CheckOutcome { name: "growth P", passed: g.p_within_margin(), detail: format!("P ratio {:.4} (margin {})", g.p_ratio, g.margin) });
        Some(g)
    };
    if out.is_some() {
        files.push(save_ledger(&ledger)?);
        let dir = out.unwrap();
        let growth_text = growth.as_ref().map_or_else(|| "growth check disabled (no checkpoints)\n".to_owned(), GrowthReport::to_text);
        files.push(write_file(dir.join("growth.txt"), &growth_text)?);
        if let Some(g) = &growth {
            files.push(write_file(dir.join("growth.kv"), &g.to_key_values())?);
        }
    }
    Ok(RunReport { ledger, growth, checks, final_state: state, files })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalRow {
    pub dt: f64,
    pub error_t: f64,
    pub error_u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRates {
    pub scheme: Scheme,
    pub rows: Vec<TemporalRow>,
    /// Least-squares order of the temperature error in `dt`.
    pub order_t: f64,
    pub order_u: Option<f64>,
    /// Every halving reduced the temperature error.
    pub monotone: bool,
}

impl TemporalRates {
    pub fn to_text(&self) -> String {
        let mut s = format!("temporal convergence, {}\n{:>12} {:>16} {:>16}\n", self.scheme, "dt", "|T - T*|", "|u - u*|");
        for r in &self.rows {
            let _ = writeln!(s, "{:>12.6e} {:>16.8e} {:>16.8e}", r.dt, r.error_t, r.error_u);
        }
        let _ = writeln!(s, "order (T) {:.4}", self.order_t);
        if let Some(o) = self.order_u {
            let _ = writeln!(s, "order (u) {o:.4}");
        }
        if !self.monotone {
            let _ = writeln!(s, "WARNING: error sequence is not monotone");
        }
        s
    }
}

/// Final-time errors against the temporal manufactured solution at
/// `dt0 / 2^k`, `k < rates_levels`, on the configured mesh.
pub fn manufactured_rates(cfg: &ExperimentConfig) -> Result<TemporalRates, ExperimentError> {
    let mut cfg = cfg.clone();
    cfg.preset = Preset::Manufactured;
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    let system = build_fe_system(&mesh)?;
    let hopf = build_hopf_extension(&system, &system.heated_wall_data()?)?;
    let mut rows = Vec::new();
    for k in 0..cfg.rates_levels {
        let dt = cfg.rates_dt0 / f64::powi(2.0, k as i32);
        let steps = (cfg.rates_t_final / dt).round() as usize;
        let mut sc = cfg.scheme_config();
        sc.dt = dt;
        sc.n_steps = steps;
        let mut stepper = Stepper::new(&system, sc, &hopf)?;
        let mut state = init_state(&system, |_| [0.0, 0.0], |x| temporal_exact_temperature(x, 0.0), &hopf.boundary_data);
        for _ in 0..steps {
            state = stepper.step(&state).map_err(|source| ExperimentError::Step { step: state.n + 1, source })?.0;
        }
        let exact = system.interpolate_scalar(Space::Temperature, |x| temporal_exact_temperature(x, state.time));
        rows.push(TemporalRow { dt, error_t: system.l2_norm(&state.t.sub(&exact)), error_u: system.l2_norm(&state.u) });
    }
    let fit = |f: &dyn Fn(&TemporalRow) -> f64| -> Option<f64> {
        let pts: Vec<_> = rows.iter().filter(|r| f(r) > 0.0).map(|r| (r.dt.ln(), f(r).ln())).collect();
        slope(&pts)
    };
    let order_t = fit(&|r| r.error_t).unwrap_or(f64::NAN);
    let order_u = fit(&|r| r.error_u);
    let monotone = rows.windows(2).all(|w| w[1].error_t < w[0].error_t);
    Ok(TemporalRates { scheme: cfg.scheme, rows, order_t, order_u, monotone })
}

fn slope(xy: &[(f64, f64)]) -> Option<f64> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Steady manufactured flow on the unit square: stream function
/// `g(x) g(y)` with `g(s) = s^2 (1 - s)^2`, `p* = cos(pi x) cos(pi y)` and
/// `T* = 1 - x + x (1 - x) cos(pi y) / 2`.
pub mod steady {
    use std::f64::consts::PI;

    fn g(s: f64) -> [f64; 4] {
        [s * s * (1.0 - s) * (1.0 - s), 2.0 * s - 6.0 * s * s + 4.0 * s * s * s, 2.0 - 12.0 * s + 12.0 * s * s, -12.0 + 24.0 * s]
    }

    pub fn velocity(x: [f64; 2]) -> [f64; 2] {
        let (gx, gy) = (g(x[0]), g(x[1]));
        [gx[0] * gy[1], -gx[1] * gy[0]]
    }

    pub fn pressure(x: [f64; 2]) -> f64 {
        (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    pub fn temperature(x: [f64; 2]) -> f64 {
        1.0 - x[0] + 0.5 * x[0] * (1.0 - x[0]) * (PI * x[1]).cos()
    }

    /// `(u.grad)u - Pr lap u + grad p - Pr Ra xi T`.
    pub fn body_force(x: [f64; 2], pr: f64, ra: f64, xi: [f64; 2]) -> [f64; 2] {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let u = velocity(x);
        let grad_u1 = [gx[1] * gy[1], gx[0] * gy[2]];
        let grad_u2 = [-gx[2] * gy[0], -gx[1] * gy[1]];
        let lap = [gx[2] * gy[1] + gx[0] * gy[3], -(gx[3] * gy[0] + gx[1] * gy[2])];
        let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
        let grad_p = [-PI * sx * cy, -PI * cx * sy];
        let t = temperature(x);
        let conv = [u[0] * grad_u1[0] + u[1] * grad_u1[1], u[0] * grad_u2[0] + u[1] * grad_u2[1]];
        [
            conv[0] - pr * lap[0] + grad_p[0] - pr * ra * xi[0] * t,
            conv[1] - pr * lap[1] + grad_p[1] - pr * ra * xi[1] * t,
        ]
    }

    /// `u.grad T - lap T`.
    pub fn heat_source(x: [f64; 2]) -> f64 {
        let u = velocity(x);
        let (sy, cy) = ((PI * x[1]).sin(), (PI * x[1]).cos());
        let grad_t = [-1.0 + 0.5 * (1.0 - 2.0 * x[0]) * cy, -0.5 * PI * x[0] * (1.0 - x[0]) * sy];
        let lap_t = -cy - 0.5 * PI * PI * x[0] * (1.0 - x[0]) * cy;
        u[0] * grad_t[0] + u[1] * grad_t[1] - lap_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialRow {
    pub n: usize,
    pub h: f64,
    pub error_u: f64,
    pub error_p: f64,
    pub error_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRates {
    pub rows: Vec<SpatialRow>,
    pub order_u: f64,
    pub order_p: f64,
    pub order_t: f64,
    pub monotone: bool,
}

impl SpatialRates {
    pub fn to_text(&self) -> String {
        let mut s = format!("spatial convergence (steady)\n{:>6} {:>12} {:>16} {:>16} {:>16}\n", "n", "h", "|u - u*|", "|p - p*|", "|T - T*|");
        for r in &self.rows {
            let _ = writeln!(s, "{:>6} {:>12.6e} {:>16.8e} {:>16.8e} {:>16.8e}", r.n, r.h, r.error_u, r.error_p, r.error_t);
        }
        let _ = writeln!(s, "orders: u {:.4}, p {:.4}, T {:.4}", self.order_u, self.order_p, self.order_t);
        if !self.monotone {
            let _ = writeln!(s, "WARNING: error sequence is not monotone");
        }
        s
    }
}

/// L2 errors of the steady manufactured flow on uniform `n x n` meshes.
/// The steady discrete solution is reached by fully implicit steps with a
/// step so long that the time difference is negligible.
pub fn manufactured_spatial(cfg: &ExperimentConfig) -> Result<SpatialRates, ExperimentError> {
    let (pr, ra, xi) = (cfg.pr, cfg.ra, cfg.xi);
    let mut rows = Vec::new();
    for &n in &cfg.rates_meshes {
        let mesh = generate_uniform_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), n)?;
        let system = build_fe_system(&mesh)?;
        let hopf = build_hopf_extension(&system, &system.heated_wall_data()?)?;
        let mut sc = SchemeConfig::new(Scheme::Bdf1, 1e8, 3, pr, ra, xi);
        sc.picard = PicardConfig { max_iters: cfg.picard_max_iters, tol_rel: cfg.picard_tol };
        sc.forcing = Forcing {
            f: Some(Arc::new(move |x, _| steady::body_force(x, pr, ra, xi))),
            gamma: Some(Arc::new(|x, _| steady::heat_source(x))),
        };
        let mut stepper = Stepper::new(&system, sc, &hopf)?;
        let mut state = init_state(&system, steady::velocity, steady::temperature, &hopf.boundary_data);
        for _ in 0..3 {
            state = stepper.step(&state).map_err(|source| ExperimentError::Step { step: state.n + 1, source })?.0;
        }
        let n_p2 = system.n_p2();
        let (ux, uy) = state.u.coeffs().split_at(n_p2);
        let eu = l2_error(&system, |k, l| [system.eval_p2(ux, k, l), system.eval_p2(uy, k, l)], steady::velocity);
        let ep = l2_error(&system, |k, l| [eval_p1(&system, state.p.coeffs(), k, l), 0.0], |x| [steady::pressure(x), 0.0]);
        let et = l2_error(&system, |k, l| [system.eval_p2(state.t.coeffs(), k, l), 0.0], |x| [steady::temperature(x), 0.0]);
        rows.push(SpatialRow { n, h: 1.0 / n as f64, error_u: eu, error_p: ep, error_t: et });
    }
    let fit = |f: &dyn Fn(&SpatialRow) -> f64| slope(&rows.iter().map(|r| (r.h.ln(), f(r).ln())).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    let monotone = rows.windows(2).all(|w| w[1].error_u < w[0].error_u && w[1].error_p < w[0].error_p && w[1].error_t < w[0].error_t);
    Ok(SpatialRates { order_u: fit(&|r| r.error_u), order_p: fit(&|r| r.error_p), order_t: fit(&|r| r.error_t), monotone, rows })
}

fn eval_p1(system: &FeSystem, p: &[f64], k: usize, l: [f64; 3]) -> f64 {
    let tri = system.mesh().triangles()[k];
    l[0] * p[tri[0]] + l[1] * p[tri[1]] + l[2] * p[tri[2]]
}

/// `|| discrete - exact ||` in L2 by the element quadrature rule.
fn l2_error(system: &FeSystem, discrete: impl Fn(usize, [f64; 3]) -> [f64; 2], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let q = system.quadrature();
    let mut sum = 0.0;
    for (k, geo) in system.geometry().iter().enumerate() {
        let c = system.mesh().corners(k);
        for (l, w) in q.points.iter().zip(&q.weights) {
            let x = [l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0], l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1]];
            let (d, e) = (discrete(k, *l), exact(x));
            sum += w * geo.area * ((d[0] - e[0]).powi(2) + (d[1] - e[1]).powi(2));
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfCheckRow {
    pub delta: f64,
    pub layer_diameter: f64,
    pub support_elements: usize,
    /// Trace and support verification; `Err` carries the first violation.
    pub verified: Result<(), String>,
    pub estimate: HopfBoundEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfCheckReport {
    pub rows: Vec<HopfCheckRow>,
    /// Largest over smallest measured constant across the rows.
    pub spread: f64,
}

impl HopfCheckReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{:>10} {:>14} {:>8} {:>10} {:>14} {:>14}\n", "delta", "layer diam", "support", "verified", "C max", "C median");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10.3e} {:>14.6e} {:>8} {:>10} {:>14.6e} {:>14.6e}",
                r.delta,
                r.layer_diameter,
                r.support_elements,
                if r.verified.is_ok() { "yes" } else { "NO" },
                r.estimate.max,
                r.estimate.median
            );
        }
        let _ = writeln!(s, "spread of C max across delta: {:.4}", self.spread);
        s
    }
}

/// Builds the boundary lift for each first-line distance in `hopf_deltas`
/// (or the configured one), verifies trace and support, and samples the
/// constant of `|b*(chi1, tau, chi2)| <= C delta (|grad chi1|^2 + |grad chi2|^2)`.
pub fn check_hopf(cfg: &ExperimentConfig) -> Result<HopfCheckReport, ExperimentError> {
    cfg.validate()?;
    let deltas = if cfg.hopf_deltas.is_empty() { vec![cfg.first_line()?] } else { cfg.hopf_deltas.clone() };
    let mut rows = Vec::new();
    for delta in deltas {
        let mut params = cfg.grading(delta);
        if !cfg.hopf_deltas.is_empty() {
            let core = cfg.width.min(cfg.height) / cfg.n_core as f64;
            params.n_layers = GradingParams::layers_to_core(delta, core, cfg.stretch);
        }
        let mesh = generate_graded_mesh(&cfg.cavity(), &params)?;
        let system = build_fe_system(&mesh)?;
        let hopf = build_hopf_extension(&system, &cfg.wall_data(&system)?)?;
        let estimate = estimate_hopf_bound_constant(
            &system,
            &hopf,
            HopfBoundOptions { n_samples: cfg.hopf_samples, seed: cfg.seed, chi2_off_support: false },
        )?;
        rows.push(HopfCheckRow {
            delta,
            layer_diameter: hopf.layer_diameter,
            support_elements: hopf.support_elements.len(),
            verified: hopf.verify(&system),
            estimate,
        });
    }
    let max = rows.iter().map(|r| r.estimate.max).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.estimate.max).fold(f64::INFINITY, f64::min);
    Ok(HopfCheckReport { rows, spread: max / min })
}

/// `|B u| / |u|` with the convention `0` for a zero field.
pub fn divergence_ratio(system: &FeSystem, u: &FieldVector) -> f64 {
    let d = norm2(&system.divergence().mul_vec(u.coeffs()));
    if d == 0.0 {
        0.0
    } else {
        d / system.l2_norm(u)
    }
}
