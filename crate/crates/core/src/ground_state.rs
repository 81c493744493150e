//! Ground states as minimizers of the action on the Nehari manifold.
//!
//! The solver is preconditioned steepest descent: each trial point
//! `U - tau P^{-1} grad S(U)` is pulled back onto `{K = 0}` by the ray
//! rescaling `lambda = -Lqc/(3N)`, and accepted when the action does not
//! increase. On the manifold `S = Lqc/6`, which is coercive, so plain
//! descent with backtracking is enough.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::random_perturbation;
use crate::functionals::{
    action, action_gradient, nehari_factor, symbol_table, FunctionalReport, PhysParams, WaveParams,
};
use crate::grid::{Grid, ScalarField, State, VectorField};

/// Starting profile `u1 = u2 = a g e_1`, `u3 = -d_1(a g) e_1` with
/// `g = exp(-|x - x0|^2 / w^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ansatz {
    pub amplitude: f64,
    pub width: f64,
    /// Multiply component `j` by `exp(i c.x / (2 kappa_j))`, the minimizer of
    /// its linear symbol.
    pub carrier: bool,
    /// Negate `u3`, which flips the sign of `N`.
    pub flip_u3: bool,
    /// Center `x0`; empty means the origin.
    pub center: Vec<f64>,
}

impl Default for Ansatz {
    fn default() -> Self {
        Ansatz { amplitude: 1.0, width: 2.0, carrier: false, flip_u3: false, center: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop when `||P^{-1} grad S||_{H^1} / ||Phi||_{H^1}` drops below this.
    pub residual_tol: f64,
    /// Largest descent step; backtracking halves it, success doubles it back.
    pub step_size: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Relative H1 size of the random kick applied to restarts after the first.
    pub restart_kick: f64,
    pub ansatz: Ansatz,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 20_000,
            residual_tol: 1e-9,
            step_size: 0.5,
            restarts: 3,
            seed: 0,
            restart_kick: 0.1,
            ansatz: Ansatz::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("restarts must be at least 1".into()));
        }
        for (name, v) in [("residual_tol", self.residual_tol), ("step_size", self.step_size)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.restart_kick.is_finite() && self.restart_kick >= 0.0) {
            return Err(Error::InvalidInput("restart_kick must be non-negative".into()));
        }
        if !(self.ansatz.width.is_finite() && self.ansatz.width > 0.0) {
            return Err(Error::InvalidInput("ansatz width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateResult {
    #[serde(skip)]
    pub phi: Option<State>,
    pub phys: PhysParams,
    pub wave: WaveParams,
    /// `S(phi)`, the numerical value of the ground-state level.
    pub mu: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub report: FunctionalReport,
    pub pohozaev_residual: f64,
    pub fourd_residual: f64,
    pub stability_margin: Option<f64>,
    pub tail_mass: f64,
    /// Tail mass above 1e-8: the box is marginal for this solution.
    pub domain_flag: bool,
    /// Which restart produced the result.
    pub restart: usize,
    /// Accepted action values, one per iteration.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl GroundStateResult {
    pub fn phi(&self) -> &State {
        self.phi.as_ref().expect("ground state carries its profile")
    }
}

/// Builds the polarized Gaussian ansatz and rescales it onto the Nehari manifold.
pub fn initial_ansatz(grid: &Grid, phys: &PhysParams, wave: &WaveParams, ansatz: &Ansatz) -> Result<State> {
    wave.check_admissible(phys)?;
    wave.check_dim(grid.dim())?;
    let raw = raw_ansatz(grid, phys, wave, ansatz)?;
    let rep = action(&raw, phys, wave);
    let lambda = nehari_factor(&rep)?;
    Ok(raw.scaled(lambda))
}

fn raw_ansatz(grid: &Grid, phys: &PhysParams, wave: &WaveParams, ansatz: &Ansatz) -> Result<State> {
    let d = grid.dim();
    let mut center = ansatz.center.clone();
    if center.is_empty() {
        center = vec![0.0; d];
    }
    if center.len() != d {
        return Err(Error::InvalidInput(format!("ansatz center has {} entries, expected {d}", center.len())));
    }
    let (a, w) = (ansatz.amplitude, ansatz.width);
    let g = ScalarField::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&center).map(|(p, q)| (p - q) * (p - q)).sum();
        Complex64::new(a * (-r2 / (w * w)).exp(), 0.0)
    });
    let mut u3 = g.partial(0)?;
    u3.scale(Complex64::new(if ansatz.flip_u3 { 1.0 } else { -1.0 }, 0.0));
    let mut fields = [g.clone(), g, u3];
    if ansatz.carrier {
        for (j, f) in fields.iter_mut().enumerate() {
            let kappa = phys.dispersion(j);
            let carrier = ScalarField::from_fn(grid, |x| {
                let ph: f64 = x.iter().zip(&wave.c).map(|(p, c)| p * c).sum::<f64>() / (2.0 * kappa);
                Complex64::from_polar(1.0, ph)
            });
            *f = f.mul(&carrier)?;
        }
    }
    let [f1, f2, f3] = fields;
    State::new(VectorField::polarized(f1, 0)?, VectorField::polarized(f2, 0)?, VectorField::polarized(f3, 0)?)
}

/// Applies the inverse linear symbols `(alpha|k|^2 + 2 omega - c.k)^{-1}`,
/// `(beta|k|^2 + omega - c.k)^{-1}`, `(gamma|k|^2 + omega - c.k)^{-1}`.
pub fn precondition(g: &State, phys: &PhysParams, wave: &WaveParams) -> Result<State> {
    wave.check_admissible(phys)?;
    let symbols = symbol_table(g.grid(), phys, wave);
    Ok(apply_inverse(g, &symbols))
}

fn apply_inverse(g: &State, symbols: &[Vec<f64>; 3]) -> State {
    let d = g.dim();
    let inv: [Vec<f64>; 3] = [0, 1, 2].map(|j| symbols[j].iter().map(|s| 1.0 / s).collect());
    let scalars = g
        .scalars()
        .enumerate()
        .map(|(i, s)| {
            let mut spec = s.forward();
            spec.scale_by(&inv[i / d]);
            spec.into_field()
        })
        .collect();
    State::from_scalars(g.grid(), scalars).expect("same grid")
}

/// Fraction of the L2 mass where some `|x_k| >= 0.4 L_k`.
pub fn tail_mass(u: &State) -> f64 {
    let grid = u.grid();
    let d = grid.dim();
    let total = u.norm_l2_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let outer: Vec<bool> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            (0..d).any(|a| x[a].abs() >= 0.4 * grid.extent()[a])
        })
        .collect();
    let mut tail = 0.0;
    for s in u.scalars() {
        for (v, out) in s.values().iter().zip(&outer) {
            if *out {
                tail += v.norm_sqr();
            }
        }
    }
    tail * grid.cell_volume() / total
}

struct Descent {
    phi: State,
    iterations: usize,
    residual: f64,
    converged: bool,
    history: Vec<f64>,
}

/// `u - tau dir` projected onto the Nehari manifold.
fn projected_trial(u: &State, dir: &State, tau: f64, phys: &PhysParams, wave: &WaveParams) -> Option<(State, FunctionalReport)> {
    let mut trial = u.clone();
    trial.axpy(-tau, dir).expect("same grid");
    let lambda = nehari_factor(&action(&trial, phys, wave)).ok()?;
    let projected = trial.scaled(lambda);
    let rep = action(&projected, phys, wave);
    rep.s.is_finite().then_some((projected, rep))
}

/// Search along `-dir`: halve `tau` until the projected action does not
/// increase, then keep doubling while it decreases by more than roundoff.
fn line_search(
    u: &State,
    rep: &FunctionalReport,
    dir: &State,
    mut tau: f64,
    phys: &PhysParams,
    wave: &WaveParams,
) -> Option<(State, FunctionalReport, f64)> {
    let slack = 1e-12 * rep.s.abs().max(1.0);
    let mut best = loop {
        if tau < 1e-12 {
            return None;
        }
        match projected_trial(u, dir, tau, phys, wave) {
            Some((v, r)) if r.s <= rep.s + slack => break (v, r, tau),
            _ => tau *= 0.5,
        }
    };
    for _ in 0..40 {
        match projected_trial(u, dir, 2.0 * best.2, phys, wave) {
            Some((v, r)) if r.s < best.1.s - slack => best = (v, r, 2.0 * best.2),
            _ => break,
        }
    }
    Some(best)
}

/// Preconditioned nonlinear conjugate gradients (Polak-Ribiere+) on the
/// Nehari manifold. Whenever the conjugate direction fails to descend the
/// search falls back to the plain preconditioned gradient, so every accepted
/// step still satisfies the backtracking rule. Soft modes (e.g. a rotation
/// symmetry weakly broken by `c`) are what make the conjugation worthwhile.
fn descend(start: State, phys: &PhysParams, wave: &WaveParams, cfg: &SolverConfig) -> Descent {
    let symbols = symbol_table(start.grid(), phys, wave);
    let mut u = start;
    let mut rep = action(&u, phys, wave);
    let mut tau = cfg.step_size;
    let mut history = vec![rep.s];
    let mut residual = f64::INFINITY;
    // previous gradient, preconditioned gradient, search direction and <g, Pg>
    let mut prev: Option<(State, State, State, f64)> = None;
    for it in 0..cfg.max_iter {
        let grad = action_gradient(&u, phys, wave);
        let pg = apply_inverse(&grad, &symbols);
        residual = pg.norm_h1() / u.norm_h1();
        if it % 500 == 0 {
            log::trace!("iteration {it}: S = {:.15e}, residual {residual:.3e}, tau {tau:.3e}", rep.s);
        }
        if residual < cfg.residual_tol {
            return Descent { phi: u, iterations: it, residual, converged: true, history };
        }
        let gpg = grad.real_inner(&pg).expect("same grid");
        let mut dir = pg.clone();
        if let Some((g0, pg0, d0, gpg0)) = &prev {
            let _ = g0;
            let beta = (grad.real_inner(&pg).expect("same grid") - grad.real_inner(pg0).expect("same grid")) / gpg0;
            if beta > 0.0 {
                dir.axpy(beta, d0).expect("same grid");
                if grad.real_inner(&dir).expect("same grid") <= 0.0 {
                    dir = pg.clone();
                }
            }
        }
        let mut step = line_search(&u, &rep, &dir, tau, phys, wave);
        if step.is_none() && prev.is_some() {
            dir = pg.clone();
            step = line_search(&u, &rep, &dir, cfg.step_size, phys, wave);
        }
        match step {
            Some((next, next_rep, used)) => {
                u = next;
                rep = next_rep;
                history.push(rep.s);
                tau = used;
                prev = Some((grad, pg, dir, gpg));
            }
            None => {
                log::debug!("descent stalled at iteration {it}, residual {residual:e}");
                return Descent { phi: u, iterations: it, residual, converged: false, history };
            }
        }
    }
    Descent { phi: u, iterations: cfg.max_iter, residual, converged: false, history }
}

/// Computes a ground state. The first descent starts from the plain ansatz;
/// while a descent fails to converge, up to `config.restarts - 1` more are
/// tried from seeded kicks of it.
pub fn solve_ground_state(
    grid: &Grid,
    phys: &PhysParams,
    wave: &WaveParams,
    config: &SolverConfig,
) -> Result<GroundStateResult> {
    config.validate()?;
    let start = initial_ansatz(grid, phys, wave, &config.ansatz)?;
    if phys.resonant() {
        log::warn!("(alpha - gamma)(beta + gamma) = 0: the known well-posedness theory does not cover this system");
    }
    let mut failures = Vec::new();
    let mut found = None;
    for r in 0..config.restarts {
        let mut u0 = start.clone();
        if r > 0 {
            let kick = random_perturbation(grid, config.seed.wrapping_add(r as u64));
            u0.axpy(config.restart_kick * start.norm_h1(), &kick).expect("same grid");
            let rep = action(&u0, phys, wave);
            match nehari_factor(&rep) {
                Ok(lambda) => u0 = u0.scaled(lambda),
                Err(_) => continue,
            }
        }
        let run = descend(u0, phys, wave, config);
        if run.converged {
            found = Some((r, run));
            break;
        }
        log::debug!("attempt {r} did not converge, residual {:e}", run.residual);
        failures.push((run.iterations, run.residual));
    }
    let (restart, run) = match found {
        Some(x) => x,
        None => {
            let best = failures.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
            let iterations = failures.iter().map(|f| f.0).max().unwrap_or(0);
            return Err(Error::NoConvergence { iterations, residual: best });
        }
    };

    let tail = tail_mass(&run.phi);
    if tail > 1e-6 {
        return Err(Error::DomainTooSmall { tail_mass: tail });
    }
    let mut result = summarize(run.phi, phys, wave);
    result.iterations = run.iterations;
    result.final_residual = run.residual;
    result.restart = restart;
    result.history = run.history;
    Ok(result)
}

fn summarize(phi: State, phys: &PhysParams, wave: &WaveParams) -> GroundStateResult {
    let report = action(&phi, phys, wave);
    let tail = tail_mass(&phi);
    let d = phi.dim();
    let mut result = GroundStateResult {
        pohozaev_residual: pohozaev_residual(&phi, phys, wave),
        phi: Some(phi),
        phys: *phys,
        wave: wave.clone(),
        mu: report.s,
        iterations: 0,
        final_residual: 0.0,
        report,
        fourd_residual: 0.0,
        stability_margin: None,
        tail_mass: tail,
        domain_flag: tail > 1e-8,
        restart: 0,
        history: Vec::new(),
    };
    result.fourd_residual = identity_4minusd_check(&result);
    if d <= 2 {
        result.stability_margin = Some(result.report.g / (2.0 * wave.omega));
    }
    result
}

/// Wraps a previously computed profile (e.g. one loaded from disk) as a
/// ground-state result, with `mu = S(phi)` and the preconditioned gradient
/// norm as residual. No descent is run.
pub fn evaluate_profile(phi: &State, phys: &PhysParams, wave: &WaveParams) -> Result<GroundStateResult> {
    wave.check_dim(phi.dim())?;
    if !phi.is_finite() {
        return Err(Error::InvalidInput("profile contains non-finite values".into()));
    }
    let symbols = symbol_table(phi.grid(), phys, wave);
    let dir = apply_inverse(&action_gradient(phi, phys, wave), &symbols);
    let mut result = summarize(phi.clone(), phys, wave);
    result.final_residual = dir.norm_h1() / phi.norm_h1().max(f64::MIN_POSITIVE);
    Ok(result)
}

/// Normalized defect of `2L + (d/2 + 1) N + c.P = 0`.
pub fn pohozaev_residual(phi: &State, phys: &PhysParams, wave: &WaveParams) -> f64 {
    let rep = action(phi, phys, wave);
    let d = phi.dim() as f64;
    let terms = [2.0 * rep.l, (0.5 * d + 1.0) * rep.n, wave.c_dot(&rep.p)];
    let sum: f64 = terms.iter().sum();
    sum.abs() / (terms.iter().map(|t| t.abs()).sum::<f64>() + 1e-30)
}

/// Normalized defect of `2 omega Q + c.P = (4 - d) mu`.
pub fn identity_4minusd_check(result: &GroundStateResult) -> f64 {
    let rep = action(result.phi(), &result.phys, &result.wave);
    let d = result.phi().dim() as f64;
    let lhs = 2.0 * result.wave.omega * rep.q + result.wave.c_dot(&rep.p);
    let rhs = (4.0 - d) * result.mu;
    (lhs - rhs).abs() / rhs.abs()
}

/// One frequency of a scaling scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuScalingPoint {
    pub omega: f64,
    pub c: Vec<f64>,
    pub mu: f64,
    /// `omega^{2 - d/2} mu(1, c0)`.
    pub mu_predicted: f64,
    pub rel_error: f64,
    /// `|Q(Phi_omega) - omega^{1 - d/2} Q(Phi_1)| / Q(Phi_omega)`.
    pub charge_error: f64,
    /// Relative gap between `mu` and the action of the rescaled base
    /// profile `omega^{1/2} Phi_1(omega^{1/2} x)`, when it is resolvable.
    pub scaled_profile_error: Option<f64>,
}

/// Checks `mu(omega, sqrt(omega) c0) = omega^{2 - d/2} mu(1, c0)` by
/// independent solves at every frequency.
pub fn mu_scaling_check(
    grid: &Grid,
    phys: &PhysParams,
    c0: &[f64],
    omegas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<MuScalingPoint>> {
    let d = grid.dim() as f64;
    let base_wave = WaveParams::new(1.0, c0.to_vec());
    let base = solve_ground_state(grid, phys, &base_wave, config)?;
    omegas
        .par_iter()
        .map(|&omega| {
            let wave = WaveParams::new(omega, c0.iter().map(|c| c * omega.sqrt()).collect());
            let (mu, q) = if omega == 1.0 {
                (base.mu, base.report.q)
            } else {
                let r = solve_ground_state(grid, phys, &wave, config)?;
                (r.mu, r.report.q)
            };
            let mu_predicted = omega.powf(2.0 - 0.5 * d) * base.mu;
            let q_predicted = omega.powf(1.0 - 0.5 * d) * base.report.q;
            let scaled_profile_error = crate::functionals::dilate(base.phi(), omega.sqrt())
                .ok()
                .filter(|dl| dl.lost_mass < 1e-8)
                .map(|dl| {
                    let psi = dl.state.scaled(omega.powf(0.5 - 0.25 * d));
                    (action(&psi, phys, &wave).s - mu).abs() / mu
                });
            Ok(MuScalingPoint {
                omega,
                c: wave.c.clone(),
                mu,
                mu_predicted,
                rel_error: (mu - mu_predicted).abs() / mu,
                charge_error: (q - q_predicted).abs() / q,
                scaled_profile_error,
            })
        })
        .collect()
}

/// One point `(omega_tau, c_tau) = ((sqrt(omega) - tau)^2, c (sqrt(omega) - tau)/sqrt(omega))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HCurvePoint {
    pub tau: f64,
    pub omega: f64,
    pub c: Vec<f64>,
    /// Directly solved level.
    pub mu: f64,
    /// `(sqrt(omega) - tau)^{4-d} mu(1, c/sqrt(omega))`.
    pub h_closed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HCurveReport {
    pub points: Vec<HCurvePoint>,
    pub spacing: f64,
    /// `h(0)` from the closed form against the directly solved `mu(omega, c)`.
    pub h0_rel_error: f64,
    pub d1_fd: f64,
    pub d1_closed: f64,
    pub d1_rel_error: f64,
    pub d2_fd: f64,
    pub d2_closed: f64,
    pub d2_rel_error: f64,
}

/// Solves `mu` along the scaling curve through `(omega, c)` and compares
/// finite-difference derivatives at `tau = 0` with
/// `h'(0) = -(2 omega Q + c.P)/sqrt(omega)` and
/// `h''(0) = (3 - d)(2 omega Q + c.P)/omega`.
///
/// Derivatives use the 5-point centered stencil with spacing `0.05 sqrt(omega)`;
/// `extra_taus` adds further reported curve points.
pub fn h_curve(
    grid: &Grid,
    phys: &PhysParams,
    wave: &WaveParams,
    extra_taus: &[f64],
    config: &SolverConfig,
) -> Result<HCurveReport> {
    let d = grid.dim();
    if d > 2 {
        return Err(Error::WrongDimension { expected: "1 or 2".into(), actual: d });
    }
    wave.check_admissible(phys)?;
    let sw = wave.omega.sqrt();
    let s = 0.05 * sw;
    let mut taus = vec![-2.0 * s, -s, 0.0, s, 2.0 * s];
    for t in extra_taus {
        if !(t.is_finite() && *t < sw) {
            return Err(Error::InvalidInput(format!("tau = {t} must be below sqrt(omega) = {sw}")));
        }
        taus.push(*t);
    }
    let unit_wave = WaveParams::new(1.0, wave.c.iter().map(|c| c / sw).collect());
    let solves: Vec<GroundStateResult> = taus
        .par_iter()
        .map(|&tau| {
            let f = (sw - tau) / sw;
            let w = WaveParams::new((sw - tau).powi(2), wave.c.iter().map(|c| c * f).collect());
            solve_ground_state(grid, phys, &w, config)
        })
        .collect::<Result<_>>()?;
    let mu_unit = if (wave.omega - 1.0).abs() == 0.0 {
        solves[2].mu
    } else {
        solve_ground_state(grid, phys, &unit_wave, config)?.mu
    };
    let points: Vec<HCurvePoint> = taus
        .iter()
        .zip(&solves)
        .map(|(&tau, r)| HCurvePoint {
            tau,
            omega: r.wave.omega,
            c: r.wave.c.clone(),
            mu: r.mu,
            h_closed: (sw - tau).powi(4 - d as i32) * mu_unit,
        })
        .collect();
    let h: Vec<f64> = solves[..5].iter().map(|r| r.mu).collect();
    let d1_fd = (h[0] - 8.0 * h[1] + 8.0 * h[3] - h[4]) / (12.0 * s);
    let d2_fd = (-h[0] + 16.0 * h[1] - 30.0 * h[2] + 16.0 * h[3] - h[4]) / (12.0 * s * s);
    let center = &solves[2].report;
    let m = 2.0 * wave.omega * center.q + wave.c_dot(&center.p);
    let d1_closed = -m / sw;
    let d2_closed = (3.0 - d as f64) * m / wave.omega;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    Ok(HCurveReport {
        h0_rel_error: rel(points[2].h_closed, solves[2].mu),
        points,
        spacing: s,
        d1_fd,
        d1_closed,
        d1_rel_error: rel(d1_fd, d1_closed),
        d2_fd,
        d2_closed,
        d2_rel_error: rel(d2_fd, d2_closed),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityMargin {
    /// `h''(0)/2 - Q(Phi)`, which equals `G(Phi)/(2 omega)`.
    pub margin: f64,
    /// Whether `G_display(Phi) >= eta`.
    pub in_mstar: bool,
}

pub fn stability_margin(result: &GroundStateResult, eta_probe: f64) -> Result<StabilityMargin> {
    let d = result.phi().dim();
    if d > 2 {
        return Err(Error::WrongDimension { expected: "1 or 2".into(), actual: d });
    }
    Ok(StabilityMargin {
        margin: result.report.g / (2.0 * result.wave.omega),
        in_mstar: result.report.g_display >= eta_probe,
    })
}

/// `Q(Phi) - E(Phi)` for a two-dimensional ground state at `omega = 1`:
/// initial data with smaller charge evolve globally.
pub fn gwp2d_threshold(result: &GroundStateResult) -> Result<f64> {
    let d = result.phi().dim();
    if d != 2 {
        return Err(Error::WrongDimension { expected: "2".into(), actual: d });
    }
    if (result.wave.omega - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("threshold needs omega = 1, got {}", result.wave.omega)));
    }
    Ok(result.report.q - result.report.e)
}
