//! Fully discrete BDF1/BDF2 schemes, fully or linearly implicit.
//!
//! With `eta(chi)` the advecting and buoyancy argument, one step solves
//!
//! ```text
//! (D_t T, S) + b*(eta(u), T', S) + (grad T', grad S) = (gamma', S)
//! (D_t u, v) + b(eta(u), u', v) + Pr (grad u', grad v) - (p', div v) = Pr Ra (xi eta(T), v) + (f', v)
//! (div u', q) = 0
//! ```
//!
//! where primes mark level `n+1` and `D_t` is the backward difference
//! `(X' - X)/dt` or `(3X' - 4X + X'')/(2 dt)`. Linearly implicit schemes take
//! `eta` from history only (`X` or `2X - X''`), so a step is one temperature
//! solve followed by one saddle solve. Fully implicit schemes use `eta(X) = X'`
//! and iterate that pair of solves (Picard) with the latest iterate frozen.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fem::dirichlet::constrain;
use crate::fem::sparse::{dot, norm2, CsrMatrix, TripletBuilder};
use crate::fem::{FeSystem, FemError, FieldVector, Space};
use crate::hopf::HopfExtension;
use crate::linalg::{solve_checked, LinearSolveError, LuCache};

/// Relative residual required from every direct solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("Picard iteration did not converge in {iterations} iterations; relative updates {history:?}")]
    PicardDivergence { iterations: usize, history: Vec<f64> },
    #[error("state is not ready for this scheme: {0}")]
    InconsistentState(String),
    #[error("saddle solve failed: {0}")]
    Singular(#[from] LinearSolveError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf1,
    LiBdf1,
    Bdf2,
    LiBdf2,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Bdf1, Scheme::LiBdf1, Scheme::Bdf2, Scheme::LiBdf2];

    pub fn is_bdf2(self) -> bool {
        matches!(self, Scheme::Bdf2 | Scheme::LiBdf2)
    }

    pub fn is_linearly_implicit(self) -> bool {
        matches!(self, Scheme::LiBdf1 | Scheme::LiBdf2)
    }

    /// `(a_-1, a_0)` of `eta(chi) = a_-1 chi^{n+1} + a_0 chi^n`; the linearly
    /// implicit BDF2 scheme additionally weights `chi^{n-1}` by `-1`.
    pub fn eta_coefficients(self) -> (f64, f64) {
        match self {
            Scheme::Bdf1 | Scheme::Bdf2 => (1.0, 0.0),
            Scheme::LiBdf1 => (0.0, 1.0),
            Scheme::LiBdf2 => (0.0, 2.0),
        }
    }

    /// Weights of `(chi^{n+1}, chi^n, chi^{n-1})` in `eta`.
    pub fn eta_weights(self) -> [f64; 3] {
        match self {
            Scheme::Bdf1 | Scheme::Bdf2 => [1.0, 0.0, 0.0],
            Scheme::LiBdf1 => [0.0, 1.0, 0.0],
            Scheme::LiBdf2 => [0.0, 2.0, -1.0],
        }
    }

    /// The first-order scheme with the same implicitness, used for the BDF2 startup step.
    pub fn startup(self) -> Scheme {
        match self {
            Scheme::Bdf2 => Scheme::Bdf1,
            Scheme::LiBdf2 => Scheme::LiBdf1,
            s => s,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bdf1 => "BDF1",
            Scheme::LiBdf1 => "LI_BDF1",
            Scheme::Bdf2 => "BDF2",
            Scheme::LiBdf2 => "LI_BDF2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "BDF1" => Ok(Scheme::Bdf1),
            "LI_BDF1" => Ok(Scheme::LiBdf1),
            "BDF2" => Ok(Scheme::Bdf2),
            "LI_BDF2" => Ok(Scheme::LiBdf2),
            _ => Err(format!("unknown scheme `{s}`; expected BDF1, LI_BDF1, BDF2 or LI_BDF2")),
        }
    }
}

pub type ScalarData = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
pub type VectorData = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Body force `f(x, t)` and heat source `gamma(x, t)`; `None` means zero.
#[derive(Clone, Default)]
pub struct Forcing {
    pub f: Option<VectorData>,
    pub gamma: Option<ScalarData>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("f", &self.f.is_some()).field("gamma", &self.gamma.is_some()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub max_iters: usize,
    pub tol_rel: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { max_iters: 50, tol_rel: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub a_minus1: f64,
    pub a_0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub pr: f64,
    pub ra: f64,
    pub xi: [f64; 2],
    pub forcing: Forcing,
    pub picard: PicardConfig,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64, n_steps: usize, pr: f64, ra: f64, xi: [f64; 2]) -> SchemeConfig {
        let (a_minus1, a_0) = scheme.eta_coefficients();
        SchemeConfig { scheme, a_minus1, a_0, dt, n_steps, pr, ra, xi, forcing: Forcing::default(), picard: PicardConfig::default() }
    }

    /// Final time `N dt`.
    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::InvalidConfig(m));
        if (self.a_minus1, self.a_0) != self.scheme.eta_coefficients() {
            return bad(format!(
                "{} requires (a_-1, a_0) = {:?}, got ({}, {})",
                self.scheme,
                self.scheme.eta_coefficients(),
                self.a_minus1,
                self.a_0
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.pr > 0.0 && self.pr.is_finite()) || !(self.ra > 0.0 && self.ra.is_finite()) {
            return bad(format!("Pr and Ra must be positive, got Pr = {}, Ra = {}", self.pr, self.ra));
        }
        let norm = self.xi[0].hypot(self.xi[1]);
        if (norm - 1.0).abs() > 1e-12 {
            return bad(format!("xi must be a unit vector, got {:?}", self.xi));
        }
        if self.picard.max_iters == 0 || !(self.picard.tol_rel > 0.0) {
            return bad("Picard needs max_iters >= 1 and tol_rel > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub linear_solves: usize,
    pub picard_iterations: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub n: usize,
    pub time: f64,
    pub u: FieldVector,
    pub p: FieldVector,
    pub t: FieldVector,
    /// Level `n-1`, kept once a step has been taken.
    pub u_prev: Option<FieldVector>,
    pub t_prev: Option<FieldVector>,
    pub stats: SolverStats,
    /// Set when level 1 came from a first-order startup step.
    pub first_order_startup: bool,
}

/// Nodal interpolation of the initial data with the boundary values imposed:
/// `u = 0` on the whole boundary and `T` equal to the Dirichlet data.
pub fn init_state(
    system: &FeSystem,
    u0: impl Fn([f64; 2]) -> [f64; 2],
    t0: impl Fn([f64; 2]) -> f64,
    temperature_data: &[(usize, f64)],
) -> SchemeState {
    let mut u = system.interpolate_velocity(u0);
    for (c, fixed) in u.coeffs_mut().iter_mut().zip(system.dirichlet_mask(Space::Velocity)) {
        if fixed {
            *c = 0.0;
        }
    }
    let mut t = system.interpolate_scalar(Space::Temperature, t0);
    for &(i, v) in temperature_data {
        t.coeffs_mut()[i] = v;
    }
    SchemeState {
        n: 0,
        time: 0.0,
        u,
        p: system.zeros(Space::Pressure),
        t,
        u_prev: None,
        t_prev: None,
        stats: SolverStats::default(),
        first_order_startup: false,
    }
}

/// What a step used, for the energy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Scheme actually applied (the startup scheme for the first BDF2 step).
    pub scheme: Scheme,
    /// Advecting velocity `eta(u)` as defined by the scheme.
    pub eta_u: FieldVector,
    /// Buoyancy temperature `eta(T)` as defined by the scheme.
    pub eta_t: FieldVector,
    /// `(gamma^{n+1}, phi_i)`.
    pub gamma_load: Vec<f64>,
    /// `(f^{n+1}, phi_i)` on velocity DOFs.
    pub f_load: Vec<f64>,
    pub picard_iterations: usize,
    pub picard_history: Vec<f64>,
    pub linear_solves: usize,
}

/// Saddle system `[[K, -B^T, 0], [-B, 0, m], [0, m^T, 0]]` with homogeneous
/// velocity data on `fixed_velocity`. Returns `(u, p)` with `m . p = 0`.
pub fn solve_saddle(
    k: &CsrMatrix,
    divergence: &CsrMatrix,
    pressure_integrals: &[f64],
    rhs_u: &[f64],
    rhs_p: &[f64],
    fixed_velocity: &[(usize, f64)],
    cache: &mut LuCache,
) -> Result<(Vec<f64>, Vec<f64>), LinearSolveError> {
    let nu = k.nrows();
    let np = divergence.nrows();
    let n = nu + np + 1;
    let mut b = TripletBuilder::with_capacity(n, n, k.nnz() + 2 * divergence.nnz() + 2 * np);
    b.push_block(0, 0, k, 1.0);
    b.push_block_transposed(0, nu, divergence, -1.0);
    b.push_block(nu, 0, divergence, -1.0);
    for (q, &m) in pressure_integrals.iter().enumerate() {
        b.push(nu + q, nu + np, m);
        b.push(nu + np, nu + q, m);
    }
    let mut rhs = Vec::with_capacity(n);
    rhs.extend_from_slice(rhs_u);
    rhs.extend(rhs_p.iter().map(|v| -v));
    rhs.push(0.0);
    let a = constrain(&b.build(), &mut rhs, fixed_velocity);
    let lu = cache.factor(&a)?;
    let x = solve_checked(&lu, &a, &rhs, SOLVE_TOLERANCE)?;
    let u = x[..nu].to_vec();
    let mut p = x[nu..nu + np].to_vec();
    let area: f64 = pressure_integrals.iter().sum();
    let mean = dot(pressure_integrals, &p) / area;
    p.iter_mut().for_each(|v| *v -= mean);
    Ok((u, p))
}

/// Advances one simulation; owns the constant operators and factorisation caches.
pub struct Stepper<'a> {
    system: &'a FeSystem,
    config: SchemeConfig,
    temperature_data: Vec<(usize, f64)>,
    velocity_fixed: Vec<(usize, f64)>,
    mass: CsrMatrix,
    velocity_mass: CsrMatrix,
    buoyancy: CsrMatrix,
    temperature_cache: LuCache,
    saddle_cache: LuCache,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a FeSystem, config: SchemeConfig, hopf: &HopfExtension) -> Result<Stepper<'a>, SchemeError> {
        config.validate()?;
        Ok(Stepper {
            system,
            temperature_data: hopf.boundary_data.clone(),
            velocity_fixed: system.homogeneous_velocity_values(),
            mass: system.mass().clone(),
            velocity_mass: system.velocity_mass(),
            buoyancy: system.buoyancy_matrix(config.xi),
            config,
            temperature_cache: LuCache::default(),
            saddle_cache: LuCache::default(),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn system(&self) -> &FeSystem {
        self.system
    }

    fn temperature_solve(
        &mut self,
        scheme: Scheme,
        state: &SchemeState,
        eta_u: &FieldVector,
        gamma_load: &[f64],
    ) -> Result<FieldVector, SchemeError> {
        let dt = self.config.dt;
        let (lead, hist) = self.history(scheme, &state.t, state.t_prev.as_ref());
        let conv = self.system.trilinear_b_star_matrix(eta_u)?;
        let mut k = TripletBuilder::with_capacity(self.mass.nrows(), self.mass.ncols(), 3 * self.mass.nnz());
        k.push_block(0, 0, &self.mass, lead / dt);
        k.push_block(0, 0, &conv, 1.0);
        k.push_block(0, 0, self.system.stiffness(), 1.0);
        let mut rhs = self.mass.mul_vec(&hist);
        rhs.iter_mut().zip(gamma_load).for_each(|(r, g)| *r = *r / dt + g);
        let k = constrain(&k.build(), &mut rhs, &self.temperature_data);
        let lu = self.temperature_cache.factor(&k)?;
        let mut t = solve_checked(&lu, &k, &rhs, SOLVE_TOLERANCE)?;
        for &(i, v) in &self.temperature_data {
            t[i] = v;
        }
        Ok(FieldVector::new(Space::Temperature, t))
    }

    fn momentum_solve(
        &mut self,
        scheme: Scheme,
        state: &SchemeState,
        eta_u: &FieldVector,
        eta_t: &FieldVector,
        f_load: &[f64],
    ) -> Result<(FieldVector, FieldVector), SchemeError> {
        let dt = self.config.dt;
        let (lead, hist) = self.history(scheme, &state.u, state.u_prev.as_ref());
        let conv = self.system.trilinear_b_matrix(eta_u)?;
        let vm = &self.velocity_mass;
        let mut k = TripletBuilder::with_capacity(vm.nrows(), vm.ncols(), 3 * vm.nnz());
        k.push_block(0, 0, vm, lead / dt);
        k.push_block(0, 0, &conv, 1.0);
        let n = self.system.n_p2();
        k.push_block(0, 0, self.system.stiffness(), self.config.pr);
        k.push_block(n, n, self.system.stiffness(), self.config.pr);
        let mut rhs = vm.mul_vec(&hist);
        let buoy = self.buoyancy.mul_vec(eta_t.coeffs());
        let prra = self.config.pr * self.config.ra;
        for ((r, b), f) in rhs.iter_mut().zip(&buoy).zip(f_load) {
            *r = *r / dt + prra * b + f;
        }
        let np = self.system.n_dofs(Space::Pressure);
        let (u, p) = solve_saddle(
            &k.build(),
            self.system.divergence(),
            self.system.pressure_integrals(),
            &rhs,
            &vec![0.0; np],
            &self.velocity_fixed,
            &mut self.saddle_cache,
        )?;
        Ok((FieldVector::new(Space::Velocity, u), FieldVector::new(Space::Pressure, p)))
    }

    /// Leading coefficient of `X^{n+1}` and the history combination, both to be divided by `dt`.
    fn history(&self, scheme: Scheme, now: &FieldVector, prev: Option<&FieldVector>) -> (f64, Vec<f64>) {
        if scheme.is_bdf2() {
            let prev = prev.expect("BDF2 history checked by caller");
            (1.5, now.coeffs().iter().zip(prev.coeffs()).map(|(a, b)| 2.0 * a - 0.5 * b).collect())
        } else {
            (1.0, now.coeffs().to_vec())
        }
    }

    fn extrapolate(&self, scheme: Scheme, now: &FieldVector, prev: Option<&FieldVector>) -> FieldVector {
        let w = scheme.eta_weights();
        match prev {
            Some(prev) if w[2] != 0.0 => now.lincomb(w[1], prev, w[2]),
            _ => now.lincomb(w[1], now, 0.0),
        }
    }

    /// One step of the configured scheme. A BDF2-family scheme at level 0 takes
    /// the first-order startup step instead.
    pub fn step(&mut self, state: &SchemeState) -> Result<(SchemeState, StepInfo), SchemeError> {
        let scheme = self.config.scheme;
        if scheme.is_bdf2() && state.n == 0 {
            return self.bdf2_startup(state);
        }
        if scheme.is_bdf2() && (state.u_prev.is_none() || state.t_prev.is_none()) {
            return Err(SchemeError::InconsistentState(format!("{scheme} at level {} needs level n-1", state.n)));
        }
        self.advance(scheme, state)
    }

    /// Level 1 from level 0 by the first-order scheme of the same implicitness.
    pub fn bdf2_startup(&mut self, state: &SchemeState) -> Result<(SchemeState, StepInfo), SchemeError> {
        if state.n != 0 {
            return Err(SchemeError::InconsistentState(format!("startup requested at level {}", state.n)));
        }
        let (mut next, info) = self.advance(self.config.scheme.startup(), state)?;
        next.first_order_startup = self.config.scheme.is_bdf2();
        Ok((next, info))
    }

    fn advance(&mut self, scheme: Scheme, state: &SchemeState) -> Result<(SchemeState, StepInfo), SchemeError> {
        let clock = Instant::now();
        let t_next = (state.n + 1) as f64 * self.config.dt;
        let gamma_load = match &self.config.forcing.gamma {
            Some(g) => self.system.load_scalar(|x| g(x, t_next)),
            None => vec![0.0; self.system.n_p2()],
        };
        let f_load = match &self.config.forcing.f {
            Some(f) => self.system.load_vector(|x| f(x, t_next)),
            None => vec![0.0; 2 * self.system.n_p2()],
        };
        let (u, p, t, eta_u, eta_t, iterations, history, solves) = if scheme.is_linearly_implicit() {
            let eta_u = self.extrapolate(scheme, &state.u, state.u_prev.as_ref());
            let eta_t = self.extrapolate(scheme, &state.t, state.t_prev.as_ref());
            let t = self.temperature_solve(scheme, state, &eta_u, &gamma_load)?;
            let (u, p) = self.momentum_solve(scheme, state, &eta_u, &eta_t, &f_load)?;
            (u, p, t, eta_u, eta_t, 0, Vec::new(), 2)
        } else {
            let mut u_k = state.u.clone();
            let mut t_k = state.t.clone();
            let mut history = Vec::new();
            let mut converged = None;
            for it in 1..=self.config.picard.max_iters {
                let t_new = self.temperature_solve(scheme, state, &u_k, &gamma_load)?;
                let (u_new, p_new) = self.momentum_solve(scheme, state, &u_k, &t_new, &f_load)?;
                let change = (norm2(u_new.sub(&u_k).coeffs()).powi(2) + norm2(t_new.sub(&t_k).coeffs()).powi(2)).sqrt();
                let size = (norm2(u_new.coeffs()).powi(2) + norm2(t_new.coeffs()).powi(2)).sqrt();
                let rel = if size > 0.0 { change / size } else { change };
                history.push(rel);
                u_k = u_new;
                t_k = t_new;
                if rel <= self.config.picard.tol_rel {
                    converged = Some((p_new, it));
                    break;
                }
            }
            let Some((p, it)) = converged else {
                return Err(SchemeError::PicardDivergence { iterations: history.len(), history });
            };
            (u_k.clone(), p, t_k.clone(), u_k, t_k, it, history, 2 * it)
        };
        let mut stats = state.stats;
        stats.linear_solves += solves;
        stats.picard_iterations += iterations;
        stats.wall_time += clock.elapsed();
        let next = SchemeState {
            n: state.n + 1,
            time: t_next,
            u,
            p,
            t,
            u_prev: Some(state.u.clone()),
            t_prev: Some(state.t.clone()),
            stats,
            first_order_startup: state.first_order_startup,
        };
        let info = StepInfo { scheme, eta_u, eta_t, gamma_load, f_load, picard_iterations: iterations, picard_history: history, linear_solves: solves };
        Ok((next, info))
    }
}

/// One step of `config.scheme` from `state`; see [`Stepper`] to reuse factorisations across steps.
pub fn step(
    state: &SchemeState,
    config: &SchemeConfig,
    system: &FeSystem,
    hopf: &HopfExtension,
) -> Result<(SchemeState, StepInfo), SchemeError> {
    Stepper::new(system, config.clone(), hopf)?.step(state)
}

/// Level 1 for a BDF2-family scheme by one first-order step.
pub fn bdf2_startup(
    state: &SchemeState,
    config: &SchemeConfig,
    system: &FeSystem,
    hopf: &HopfExtension,
) -> Result<(SchemeState, StepInfo), SchemeError> {
    Stepper::new(system, config.clone(), hopf)?.bdf2_startup(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_coefficients_match_the_scheme_family() {
        assert_eq!(Scheme::Bdf1.eta_coefficients(), (1.0, 0.0));
        assert_eq!(Scheme::Bdf2.eta_coefficients(), (1.0, 0.0));
        assert_eq!(Scheme::LiBdf1.eta_coefficients(), (0.0, 1.0));
        assert_eq!(Scheme::LiBdf2.eta_weights(), [0.0, 2.0, -1.0]);
        assert_eq!(Scheme::LiBdf2.startup(), Scheme::LiBdf1);
        assert_eq!(Scheme::Bdf2.startup(), Scheme::Bdf1);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("li-bdf2".parse::<Scheme>().unwrap(), Scheme::LiBdf2);
        assert!("bdf3".parse::<Scheme>().is_err());
    }

    #[test]
    fn mismatched_eta_is_rejected() {
        let mut c = SchemeConfig::new(Scheme::LiBdf1, 0.1, 10, 0.71, 1e3, [0.0, 1.0]);
        assert!(c.validate().is_ok());
        c.a_minus1 = 1.0;
        assert!(c.validate().is_err());
        let c = SchemeConfig::new(Scheme::Bdf1, 0.1, 10, 0.71, 1e3, [0.0, 2.0]);
        assert!(c.validate().is_err());
    }
}
