//! Per-step energy bookkeeping: norms, discrete energy identities, and the
//! growth monitors for the long-time stability bounds.
//!
//! Testing the temperature equation with `theta' = T' - tau` and the momentum
//! equation with `u'` gives, for a first-order step,
//!
//! ```text
//! 1/2 {|theta'|^2 - |theta|^2 + |theta' - theta|^2} + dt |grad theta'|^2 + dt (grad tau, grad theta')
//!     = -dt b*(eta(u), T', theta') + dt (gamma', theta')
//! 1/2 {|u'|^2 - |u|^2 + |u' - u|^2} + Pr dt |grad u'|^2
//!     = -dt b(eta(u), u', u') + dt (p', div u') + dt Pr Ra (xi eta(T), u') + dt (f', u')
//! ```
//!
//! and the BDF2 stencil replaces the bracket by
//! `1/4 {|a'|^2 + |2a' - a|^2} - 1/4 {|a|^2 + |2a - a''|^2} + 1/4 |a' - 2a + a''|^2`.
//! The `(grad tau, grad theta')` term is assembled, not assumed to vanish.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::fem::sparse::dot;
use crate::fem::{FeSystem, FemError, FieldVector};
use crate::hopf::HopfExtension;
use crate::scheme::{Scheme, SchemeConfig, SchemeState, StepInfo};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("growth check needs at least 3 increasing checkpoints within the ledger, got {0:?}")]
    InsufficientCheckpoints(Vec<usize>),
    #[error("ledger recorded for {ledger} cannot be read as {requested}")]
    SchemeMismatch { ledger: Scheme, requested: Scheme },
    #[error("ledger has no level {0}")]
    MissingLevel(usize),
    #[error("step from level {before} does not continue a ledger ending at level {last}")]
    OutOfOrder { before: usize, last: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Prefix sums through a level, all starting at level 1.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulators {
    /// `dt sum |grad T^k|^2`
    pub grad_t_sq_dt: f64,
    /// `dt sum |grad u^k|^2`
    pub grad_u_sq_dt: f64,
    /// `sum |T^k - T^{k-1}|^2`
    pub inc_t_sq: f64,
    /// `sum |u^k - u^{k-1}|^2`
    pub inc_u_sq: f64,
    /// `sum |T^k - 2T^{k-1} + T^{k-2}|^2`, from level 2
    pub second_t_sq: f64,
    /// `sum |u^k - 2u^{k-1} + u^{k-2}|^2`, from level 2
    pub second_u_sq: f64,
    /// `dt sum |p^k|`
    pub pressure_dt: f64,
}

impl Accumulators {
    fn advance(&self, r: &StepRecord, dt: f64) -> Accumulators {
        Accumulators {
            grad_t_sq_dt: self.grad_t_sq_dt + dt * r.grad_t * r.grad_t,
            grad_u_sq_dt: self.grad_u_sq_dt + dt * r.grad_u * r.grad_u,
            inc_t_sq: self.inc_t_sq + r.inc_t * r.inc_t,
            inc_u_sq: self.inc_u_sq + r.inc_u * r.inc_u,
            second_t_sq: self.second_t_sq + r.second_t.map_or(0.0, |s| s * s),
            second_u_sq: self.second_u_sq + r.second_u.map_or(0.0, |s| s * s),
            pressure_dt: self.pressure_dt + dt * r.norm_p,
        }
    }
}

/// Energy identity residuals of one step, with the largest term of each as scale.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdentityResiduals {
    pub temperature: f64,
    pub momentum: f64,
    pub temperature_scale: f64,
    pub momentum_scale: f64,
    /// `dt (grad tau, grad theta')`, carried in the temperature identity.
    pub tau_coupling: f64,
}

impl IdentityResiduals {
    pub fn relative_temperature(&self) -> f64 {
        relative(self.temperature, self.temperature_scale)
    }

    pub fn relative_momentum(&self) -> f64 {
        relative(self.momentum, self.momentum_scale)
    }
}

fn relative(r: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        r.abs() / scale
    } else {
        r.abs()
    }
}

/// Quantities at level `n`; increments and residuals refer to the step into `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub norm_t: f64,
    pub norm_theta: f64,
    pub norm_u: f64,
    pub grad_t: f64,
    pub grad_u: f64,
    pub norm_p: f64,
    pub inc_t: f64,
    pub inc_u: f64,
    pub second_t: Option<f64>,
    pub second_u: Option<f64>,
    /// `|2T^n - T^{n-1}|`
    pub companion_t: Option<f64>,
    /// `|2u^n - u^{n-1}|`
    pub companion_u: Option<f64>,
    pub identity: IdentityResiduals,
    /// `|B u^n|` (Euclidean, over pressure DOFs).
    pub divergence: f64,
    /// `integral of p^n`.
    pub pressure_mean: f64,
    pub picard_iterations: usize,
    pub accum: Accumulators,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerMeta {
    pub scheme: Scheme,
    pub dt: f64,
    pub delta: f64,
    pub ra: f64,
    pub pr: f64,
    pub c_delta: Option<f64>,
    pub first_order_startup: bool,
    pub tau_norm: f64,
    pub beta: Option<f64>,
}

/// Append-only record of a trajectory. Level 0 is recorded on creation.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityLedger {
    pub meta: LedgerMeta,
    records: Vec<StepRecord>,
}

impl StabilityLedger {
    pub fn new(system: &FeSystem, hopf: &HopfExtension, config: &SchemeConfig, initial: &SchemeState) -> StabilityLedger {
        let theta = initial.t.sub(&hopf.coefficients);
        let record = StepRecord {
            n: initial.n,
            t: initial.time,
            norm_t: system.l2_norm(&initial.t),
            norm_theta: system.l2_norm(&theta),
            norm_u: system.l2_norm(&initial.u),
            grad_t: system.grad_norm(&initial.t),
            grad_u: system.grad_norm(&initial.u),
            norm_p: system.l2_norm(&initial.p),
            inc_t: 0.0,
            inc_u: 0.0,
            second_t: None,
            second_u: None,
            companion_t: None,
            companion_u: None,
            identity: IdentityResiduals::default(),
            divergence: crate::fem::sparse::norm2(&system.divergence().mul_vec(initial.u.coeffs())),
            pressure_mean: system.integral(&initial.p),
            picard_iterations: 0,
            accum: Accumulators::default(),
        };
        StabilityLedger {
            meta: LedgerMeta {
                scheme: config.scheme,
                dt: config.dt,
                delta: hopf.delta,
                ra: config.ra,
                pr: config.pr,
                c_delta: None,
                first_order_startup: false,
                tau_norm: system.l2_norm(&hopf.coefficients),
                beta: None,
            },
            records: vec![record],
        }
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("ledger always holds level 0")
    }

    pub fn accumulators(&self) -> Accumulators {
        self.last().accum
    }

    /// Record at level `n`.
    pub fn level(&self, n: usize) -> Result<&StepRecord, StabilityError> {
        let first = self.records[0].n;
        n.checked_sub(first).and_then(|i| self.records.get(i)).ok_or(StabilityError::MissingLevel(n))
    }

    /// Prefix sums recomputed from the per-step entries.
    pub fn recompute_accumulators(&self) -> Vec<Accumulators> {
        let mut acc = Accumulators::default();
        let mut out = vec![acc];
        for r in &self.records[1..] {
            acc = acc.advance(r, self.meta.dt);
            out.push(acc);
        }
        out
    }

    pub fn record_step(
        &mut self,
        before: &SchemeState,
        after: &SchemeState,
        info: &StepInfo,
        system: &FeSystem,
        hopf: &HopfExtension,
        config: &SchemeConfig,
    ) -> Result<&StepRecord, StabilityError> {
        let last = self.last();
        if before.n != last.n || after.n != before.n + 1 {
            return Err(StabilityError::OutOfOrder { before: before.n, last: last.n });
        }
        let identity = check_energy_identity(system, hopf, config, before, after, info)?;
        let theta = after.t.sub(&hopf.coefficients);
        let second = |now: &FieldVector, mid: &FieldVector, old: Option<&FieldVector>| {
            old.map(|old| system.l2_norm(&now.lincomb(1.0, &mid.lincomb(2.0, old, -1.0), -1.0)))
        };
        let mut record = StepRecord {
            n: after.n,
            t: after.n as f64 * config.dt,
            norm_t: system.l2_norm(&after.t),
            norm_theta: system.l2_norm(&theta),
            norm_u: system.l2_norm(&after.u),
            grad_t: system.grad_norm(&after.t),
            grad_u: system.grad_norm(&after.u),
            norm_p: system.l2_norm(&after.p),
            inc_t: system.l2_norm(&after.t.sub(&before.t)),
            inc_u: system.l2_norm(&after.u.sub(&before.u)),
            second_t: second(&after.t, &before.t, before.t_prev.as_ref()),
            second_u: second(&after.u, &before.u, before.u_prev.as_ref()),
            companion_t: Some(system.l2_norm(&after.t.lincomb(2.0, &before.t, -1.0))),
            companion_u: Some(system.l2_norm(&after.u.lincomb(2.0, &before.u, -1.0))),
            identity,
            divergence: crate::fem::sparse::norm2(&system.divergence().mul_vec(after.u.coeffs())),
            pressure_mean: system.integral(&after.p),
            picard_iterations: info.picard_iterations,
            accum: Accumulators::default(),
        };
        record.accum = last.accum.advance(&record, self.meta.dt);
        self.meta.first_order_startup |= after.first_order_startup;
        self.records.push(record);
        Ok(self.last())
    }

    /// Writes the ledger as CSV, preceded by `# key=value` metadata lines.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        let m = &self.meta;
        writeln!(out, "# scheme={}", m.scheme)?;
        writeln!(out, "# dt={:?}", m.dt)?;
        writeln!(out, "# delta={:?}", m.delta)?;
        writeln!(out, "# Ra={:?}", m.ra)?;
        writeln!(out, "# Pr={:?}", m.pr)?;
        writeln!(out, "# c_delta={}", m.c_delta.map_or("none".into(), |c| format!("{c:?}")))?;
        writeln!(out, "# first_order_startup={}", m.first_order_startup)?;
        writeln!(out, "# tau_norm={:?}", m.tau_norm)?;
        writeln!(out, "# beta={}", m.beta.map_or("none".into(), |b| format!("{b:?}")))?;
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        for r in &self.records {
            let a = &r.accum;
            let i = &r.identity;
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.n,
                r.t,
                r.norm_t,
                r.norm_theta,
                r.norm_u,
                r.grad_t,
                r.grad_u,
                r.norm_p,
                r.inc_t,
                r.inc_u,
                opt(r.second_t),
                opt(r.second_u),
                opt(r.companion_t),
                opt(r.companion_u),
                i.temperature,
                i.momentum,
                i.temperature_scale,
                i.momentum_scale,
                i.tau_coupling,
                r.divergence,
                r.pressure_mean,
                r.picard_iterations,
                a.grad_t_sq_dt,
                a.grad_u_sq_dt,
                a.inc_t_sq,
                a.inc_u_sq,
                a.second_t_sq,
                a.second_u_sq,
                a.pressure_dt,
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()
    }
}

/// Column names of [`StabilityLedger::write_csv`]; empty cells mean "not defined at this level".
pub const CSV_HEADER: [&str; 29] = [
    "n",
    "t",
    "norm_T",
    "norm_theta",
    "norm_u",
    "grad_T",
    "grad_u",
    "norm_p",
    "inc_T",
    "inc_u",
    "second_T",
    "second_u",
    "companion_T",
    "companion_u",
    "residual_T",
    "residual_u",
    "scale_T",
    "scale_u",
    "tau_coupling",
    "div_u",
    "mean_p",
    "picard_iterations",
    "sum_dt_grad_T_sq",
    "sum_dt_grad_u_sq",
    "sum_inc_T_sq",
    "sum_inc_u_sq",
    "sum_second_T_sq",
    "sum_second_u_sq",
    "sum_dt_p",
];

/// `1/2 {|a'|^2 - |a|^2 + |a' - a|^2}` or the BDF2 bracket, returned as signed terms.
fn time_terms(system: &FeSystem, bdf2: bool, new: &FieldVector, now: &FieldVector, old: Option<&FieldVector>) -> Vec<f64> {
    let sq = |v: &FieldVector| system.l2_inner(v, v);
    if bdf2 {
        let old = old.expect("BDF2 identity needs level n-1");
        vec![
            0.25 * sq(new),
            0.25 * sq(&new.lincomb(2.0, now, -1.0)),
            -0.25 * sq(now),
            -0.25 * sq(&now.lincomb(2.0, old, -1.0)),
            0.25 * sq(&new.lincomb(1.0, &now.lincomb(2.0, old, -1.0), -1.0)),
        ]
    } else {
        vec![0.5 * sq(new), -0.5 * sq(now), 0.5 * sq(&new.sub(now))]
    }
}

fn residual_of(terms: &[f64]) -> (f64, f64) {
    (terms.iter().sum(), terms.iter().fold(0.0_f64, |m, t| m.max(t.abs())))
}

/// Evaluates both energy identities of the step `before -> after` from
/// independently assembled terms.
pub fn check_energy_identity(
    system: &FeSystem,
    hopf: &HopfExtension,
    config: &SchemeConfig,
    before: &SchemeState,
    after: &SchemeState,
    info: &StepInfo,
) -> Result<IdentityResiduals, FemError> {
    let dt = config.dt;
    let bdf2 = info.scheme.is_bdf2();
    let tau = &hopf.coefficients;
    let theta_new = after.t.sub(tau);
    let theta_now = before.t.sub(tau);
    let theta_old = before.t_prev.as_ref().map(|t| t.sub(tau));

    let mut t_terms = time_terms(system, bdf2, &theta_new, &theta_now, theta_old.as_ref());
    let tau_coupling = dt * system.grad_inner(tau, &theta_new);
    t_terms.push(dt * system.grad_inner(&theta_new, &theta_new));
    t_terms.push(tau_coupling);
    t_terms.push(dt * system.trilinear_b_star(&info.eta_u, &after.t, &theta_new)?);
    t_terms.push(-dt * dot(&info.gamma_load, theta_new.coeffs()));
    let (temperature, temperature_scale) = residual_of(&t_terms);

    let mut u_terms = time_terms(system, bdf2, &after.u, &before.u, before.u_prev.as_ref());
    u_terms.push(config.pr * dt * system.grad_inner(&after.u, &after.u));
    u_terms.push(dt * system.trilinear_b(&info.eta_u, &after.u, &after.u)?);
    u_terms.push(-dt * dot(after.p.coeffs(), &system.divergence().mul_vec(after.u.coeffs())));
    let buoy = system.buoyancy_matrix(config.xi).mul_vec(info.eta_t.coeffs());
    u_terms.push(-dt * config.pr * config.ra * dot(&buoy, after.u.coeffs()));
    u_terms.push(-dt * dot(&info.f_load, after.u.coeffs()));
    let (momentum, momentum_scale) = residual_of(&u_terms);

    Ok(IdentityResiduals { temperature, momentum, temperature_scale, momentum_scale, tau_coupling })
}

/// Left-hand side of the stability bound for `scheme` at level `n`.
pub fn theorem_lhs(ledger: &StabilityLedger, scheme: Scheme, n: usize) -> Result<f64, StabilityError> {
    if scheme != ledger.meta.scheme {
        return Err(StabilityError::SchemeMismatch { ledger: ledger.meta.scheme, requested: scheme });
    }
    let r = ledger.level(n)?;
    let pr = ledger.meta.pr;
    let dt = ledger.meta.dt;
    let a = &r.accum;
    let base = 0.5 * r.norm_t * r.norm_t + r.norm_u * r.norm_u;
    let lhs = match scheme {
        Scheme::Bdf1 => base + a.inc_t_sq + a.inc_u_sq + 0.25 * a.grad_t_sq_dt + 0.25 * pr * a.grad_u_sq_dt,
        Scheme::LiBdf1 => {
            base + a.inc_t_sq + a.inc_u_sq + 0.25 * a.grad_t_sq_dt + 0.125 * pr * a.grad_u_sq_dt
                + 0.125 * pr * dt * r.grad_u * r.grad_u
        }
        Scheme::Bdf2 | Scheme::LiBdf2 => {
            if n == 0 {
                base
            } else {
                // Sums over levels 2..=n exclude the startup step.
                let first = &ledger.level(1)?.accum;
                let ct = r.companion_t.unwrap_or(0.0);
                let cu = r.companion_u.unwrap_or(0.0);
                let mut lhs = base
                    + 0.5 * ct * ct
                    + cu * cu
                    + a.second_t_sq
                    + a.second_u_sq
                    + 0.5 * (a.grad_t_sq_dt - first.grad_t_sq_dt)
                    + 0.5 * pr * (a.grad_u_sq_dt - first.grad_u_sq_dt);
                if scheme == Scheme::LiBdf2 {
                    let prev = ledger.level(n - 1)?;
                    lhs += 0.5 * pr * dt * (r.grad_u * r.grad_u + prev.grad_u * prev.grad_u);
                }
                lhs
            }
        }
    };
    Ok(lhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPoint {
    pub n: usize,
    pub t: f64,
    pub lhs: f64,
    /// `lhs / t`
    pub q: f64,
    /// `dt sum |p|`
    pub pressure_sum: f64,
    /// `pressure_sum / sqrt(t)`
    pub p_monitor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub scheme: Scheme,
    pub margin: f64,
    pub points: Vec<GrowthPoint>,
    /// Largest later `Q` over the first one.
    pub q_ratio: f64,
    pub p_ratio: f64,
    /// Least-squares slope of `log |T^n|` against `log t^n`.
    pub exponent: Option<f64>,
}

impl GrowthReport {
    pub fn q_within_margin(&self) -> bool {
        self.q_ratio <= self.margin
    }

    pub fn p_within_margin(&self) -> bool {
        self.p_ratio <= self.margin
    }

    pub fn exponent_within_margin(&self) -> bool {
        self.exponent.is_none_or(|e| e <= 0.5 + (self.margin - 1.0))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "growth report for {} (margin {})", self.scheme, self.margin);
        let _ = writeln!(s, "{:>10} {:>12} {:>16} {:>16} {:>16} {:>16}", "n", "t", "lhs", "Q", "dt*sum|p|", "P");
        for p in &self.points {
            let _ = writeln!(s, "{:>10} {:>12.6} {:>16.8e} {:>16.8e} {:>16.8e} {:>16.8e}", p.n, p.t, p.lhs, p.q, p.pressure_sum, p.p_monitor);
        }
        let verdict = |ok: bool| if ok { "within margin" } else { "EXCEEDS margin" };
        let _ = writeln!(s, "Q ratio {:.6} ({})", self.q_ratio, verdict(self.q_within_margin()));
        let _ = writeln!(s, "P ratio {:.6} ({})", self.p_ratio, verdict(self.p_within_margin()));
        match self.exponent {
            Some(e) => {
                let _ = writeln!(s, "|T| growth exponent {e:.6} ({})", verdict(self.exponent_within_margin()));
            }
            None => {
                let _ = writeln!(s, "|T| growth exponent undefined");
            }
        }
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme={}", self.scheme);
        let _ = writeln!(s, "margin={:?}", self.margin);
        let _ = writeln!(s, "checkpoints={}", self.points.iter().map(|p| p.n.to_string()).collect::<Vec<_>>().join(","));
        for p in &self.points {
            let _ = writeln!(s, "q.{}={:?}", p.n, p.q);
            let _ = writeln!(s, "p_monitor.{}={:?}", p.n, p.p_monitor);
        }
        let _ = writeln!(s, "q_ratio={:?}", self.q_ratio);
        let _ = writeln!(s, "p_ratio={:?}", self.p_ratio);
        let _ = writeln!(s, "exponent={}", self.exponent.map_or("none".into(), |e| format!("{e:?}")));
        let _ = writeln!(s, "q_ok={}", self.q_within_margin());
        let _ = writeln!(s, "p_ok={}", self.p_within_margin());
        let _ = writeln!(s, "exponent_ok={}", self.exponent_within_margin());
        s
    }
}

pub const DEFAULT_MARGIN: f64 = 1.25;

/// Evaluates `Q(t) = lhs/t` and `P(t) = dt sum |p| / sqrt(t)` at the given levels.
pub fn check_sublinear_growth(ledger: &StabilityLedger, checkpoints: &[usize], margin: f64) -> Result<GrowthReport, StabilityError> {
    let increasing = checkpoints.windows(2).all(|w| w[0] < w[1]);
    let inside = checkpoints.iter().all(|&n| n >= 1 && ledger.level(n).is_ok());
    if checkpoints.len() < 3 || !increasing || !inside {
        return Err(StabilityError::InsufficientCheckpoints(checkpoints.to_vec()));
    }
    let mut points = Vec::new();
    for &n in checkpoints {
        let r = ledger.level(n)?;
        let lhs = theorem_lhs(ledger, ledger.meta.scheme, n)?;
        let pressure_sum = r.accum.pressure_dt;
        points.push(GrowthPoint { n, t: r.t, lhs, q: lhs / r.t, pressure_sum, p_monitor: pressure_sum / r.t.sqrt() });
    }
    let ratio = |f: &dyn Fn(&GrowthPoint) -> f64| {
        let first = f(&points[0]);
        let later = points[1..].iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if first > 0.0 {
            later / first
        } else if later > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    };
    let q_ratio = ratio(&|p| p.q);
    let p_ratio = ratio(&|p| p.p_monitor);
    let samples: Vec<(f64, f64)> = ledger.records().iter().filter(|r| r.t > 0.0 && r.norm_t > 0.0).map(|r| (r.t.ln(), r.norm_t.ln())).collect();
    let exponent = least_squares_slope(&samples);
    Ok(GrowthReport { scheme: ledger.meta.scheme, margin, points, q_ratio, p_ratio, exponent })
}

fn least_squares_slope(xy: &[(f64, f64)]) -> Option<f64> {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<_> = (1..20).map(|k| (k as f64).ln()).map(|x| (x, 0.5 * x + 3.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert!(least_squares_slope(&pts[..1]).is_none());
    }
}
