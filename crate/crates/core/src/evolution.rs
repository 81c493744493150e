//! Time integration and the experiments built on it.
//!
//! The flow is `d/dt U = i kappa Lap U + C(U)` with the coupling
//! `C(U) = (i (div u3) u2, i (div conj u3) u1, -i grad(u1 . conj u2))`.
//! The linear part is integrated exactly in Fourier space. All derivatives
//! use the effective wavenumbers of [`crate::grid`], so the semi-discrete
//! system conserves the discrete charge and energy exactly; only the time
//! stepper produces drift.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    action, coercivity_certificate, nonlinear_gradient, FunctionalReport, PhysParams, WaveParams,
    WellMembership,
};
use crate::grid::{Grid, ScalarField, State};

/// Time step used when none is configured: `1e-3 (h_min / h_ref)^2` with
/// `h_ref = 40/512`, i.e. `1e-3` on the reference 512-point grid of length 40.
pub fn default_dt(grid: &Grid) -> f64 {
    let h_ref = 40.0 / 512.0;
    1e-3 * (grid.min_spacing() / h_ref).powi(2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Half linear step, RK4 on the coupling, half linear step.
    #[default]
    Strang,
    /// Integrating-factor (Lawson) RK4 on the full equation.
    IfRk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub t_final: f64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// Truncate the coupling to the inner two thirds of the spectrum.
    pub dealias: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { dt: None, t_final: 1.0, record_stride: 10, scheme: Scheme::Strang, dealias: false }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidInput(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Step count and effective step: the configured `dt` is shortened so
    /// that an integer number of steps lands exactly on `t_final`.
    pub fn steps(&self, grid: &Grid) -> (usize, f64) {
        let dt = self.dt.unwrap_or_else(|| default_dt(grid));
        if self.t_final == 0.0 {
            return (0, dt);
        }
        let n = (self.t_final / dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// A level set probe recorded along a trajectory: membership in the wells
/// of `S_{omega, c}` at level `mu`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WellProbe {
    pub name: String,
    pub wave: WaveParams,
    pub mu: f64,
}

/// Optional diagnostics recorded alongside the functionals.
#[derive(Clone, Debug, Default)]
pub struct Monitors<'a> {
    pub orbit_reference: Option<&'a State>,
    pub wells: Vec<WellProbe>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub e: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub k_sign: Vec<i8>,
    pub h1_norm: Vec<f64>,
    pub orbit_distance: Option<Vec<f64>>,
    /// One entry per record, one membership per [`WellProbe`].
    pub wells: Option<Vec<Vec<WellMembership>>>,
    /// Time of the first non-finite state, if any.
    pub divergence_time: Option<f64>,
    pub dt: f64,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, rep: &FunctionalReport, h1: f64) {
        self.times.push(t);
        self.q.push(rep.q);
        self.e.push(rep.e);
        self.p.push(rep.p.clone());
        self.s.push(rep.s);
        self.k.push(rep.k);
        self.k_sign.push(if rep.k > 0.0 {
            1
        } else if rep.k < 0.0 {
            -1
        } else {
            0
        });
        self.h1_norm.push(h1);
    }

    /// `max_t |f(t) - f(0)| / |f(0)|` for a recorded series.
    pub fn relative_drift(series: &[f64]) -> f64 {
        let f0 = series[0];
        series.iter().map(|v| (v - f0).abs()).fold(0.0, f64::max) / f0.abs()
    }

    pub fn momentum_drift(&self) -> Vec<f64> {
        let d = self.p[0].len();
        (0..d)
            .map(|k| Self::relative_drift(&self.p.iter().map(|p| p[k]).collect::<Vec<_>>()))
            .collect()
    }
}

fn minus_i() -> Complex64 {
    Complex64::new(0.0, -1.0)
}

/// The coupling `C(U)`, equal to `-i` times the nonlinear part of the
/// action gradient.
fn coupling(u: &State, dealias: bool) -> State {
    let mut g = nonlinear_gradient(u);
    for s in g.scalars_mut() {
        s.scale(minus_i());
        if dealias {
            let mut spec = s.forward();
            spec.dealias_two_thirds();
            *s = spec.into_field();
        }
    }
    g
}

/// Right-hand side of the evolution equation.
pub fn rhs(u: &State, phys: &PhysParams) -> State {
    let d = u.dim();
    let mut out = coupling(u, false);
    for (i, (dst, src)) in out.scalars_mut().zip(u.scalars()).enumerate() {
        let mut lap = src.laplacian();
        lap.scale(Complex64::new(0.0, phys.dispersion(i / d)));
        dst.axpy(Complex64::new(1.0, 0.0), &lap).expect("same grid");
    }
    out
}

fn propagator_table(grid: &Grid, phys: &PhysParams, t: f64) -> [Vec<Complex64>; 3] {
    [0, 1, 2].map(|j| {
        let kappa = phys.dispersion(j);
        (0..grid.len())
            .map(|i| Complex64::from_polar(1.0, -kappa * grid.k_squared(i) * t))
            .collect()
    })
}

fn apply_table(u: &State, table: &[Vec<Complex64>; 3]) -> State {
    let d = u.dim();
    let scalars = u
        .scalars()
        .enumerate()
        .map(|(i, s)| {
            let mut spec = s.forward();
            for (c, m) in spec.coeffs_mut().iter_mut().zip(&table[i / d]) {
                *c *= m;
            }
            spec.into_field()
        })
        .collect();
    State::from_scalars(u.grid(), scalars).expect("same grid")
}

/// Exact solution operator of the linear part, `exp(-i kappa |k|^2 t)` per component.
pub fn linear_propagator(u: &State, phys: &PhysParams, t: f64) -> State {
    apply_table(u, &propagator_table(u.grid(), phys, t))
}

/// A fixed-step integrator with its propagator tables precomputed.
pub struct Stepper {
    dt: f64,
    scheme: Scheme,
    dealias: bool,
    half: [Vec<Complex64>; 3],
    full: [Vec<Complex64>; 3],
}

impl Stepper {
    pub fn new(grid: &Grid, phys: &PhysParams, dt: f64, scheme: Scheme, dealias: bool) -> Self {
        Stepper {
            dt,
            scheme,
            dealias,
            half: propagator_table(grid, phys, 0.5 * dt),
            full: propagator_table(grid, phys, dt),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, u: &State) -> State {
        match self.scheme {
            Scheme::Strang => {
                let v = apply_table(u, &self.half);
                let v = self.coupling_rk4(&v);
                apply_table(&v, &self.half)
            }
            Scheme::IfRk4 => self.lawson_rk4(u),
        }
    }

    fn coupling_rk4(&self, u: &State) -> State {
        let h = self.dt;
        let c = |v: &State| coupling(v, self.dealias);
        let k1 = c(u);
        let k2 = c(&combine(u, &[(0.5 * h, &k1)]));
        let k3 = c(&combine(u, &[(0.5 * h, &k2)]));
        let k4 = c(&combine(u, &[(h, &k3)]));
        combine(u, &[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)])
    }

    fn lawson_rk4(&self, u: &State) -> State {
        let h = self.dt;
        let c = |v: &State| coupling(v, self.dealias);
        let eh = |v: &State| apply_table(v, &self.half);
        let ef = |v: &State| apply_table(v, &self.full);
        let k1 = c(u);
        let u_half = eh(u);
        let k2 = c(&eh(&combine(u, &[(0.5 * h, &k1)])));
        let k3 = c(&combine(&u_half, &[(0.5 * h, &k2)]));
        let k4 = c(&combine(&ef(u), &[(h, &eh(&k3))]));
        let mid = eh(&combine(&k2, &[(1.0, &k3)]));
        combine(&ef(u), &[(h / 6.0, &ef(&k1)), (h / 3.0, &mid), (h / 6.0, &k4)])
    }
}

fn combine(base: &State, terms: &[(f64, &State)]) -> State {
    let mut out = base.clone();
    for (a, t) in terms {
        out.axpy(*a, t).expect("same grid");
    }
    out
}

/// One step of size `dt`.
pub fn step(u: &State, phys: &PhysParams, dt: f64, scheme: Scheme) -> Result<State> {
    let next = Stepper::new(u.grid(), phys, dt, scheme, false).step(u);
    if !next.is_finite() {
        return Err(Error::NonFinite { time: dt });
    }
    Ok(next)
}

/// Integrates to `config.t_final` and records the functionals every
/// `record_stride` steps and at the final time.
pub fn evolve(u0: &State, phys: &PhysParams, wave: &WaveParams, config: &EvolveConfig) -> Result<(State, EvolutionTrace)> {
    evolve_monitored(u0, phys, wave, config, &Monitors::default())
}

/// As [`evolve`], additionally recording the orbit distance to a reference
/// profile and well memberships. A non-finite state ends the run early with
/// `divergence_time` set; the last finite state is returned.
pub fn evolve_monitored(
    u0: &State,
    phys: &PhysParams,
    wave: &WaveParams,
    config: &EvolveConfig,
    monitors: &Monitors,
) -> Result<(State, EvolutionTrace)> {
    config.validate()?;
    wave.check_dim(u0.dim())?;
    if let Some(r) = monitors.orbit_reference {
        crate::grid::check_same(r.grid(), u0.grid())?;
    }
    if phys.resonant() {
        log::warn!("(alpha - gamma)(beta + gamma) = 0: integrating outside the known well-posedness theory");
    }
    let grid = u0.grid().clone();
    let (n_steps, dt) = config.steps(&grid);
    let stepper = Stepper::new(&grid, phys, dt, config.scheme, config.dealias);
    let mut trace = EvolutionTrace { dt, ..EvolutionTrace::default() };
    if monitors.orbit_reference.is_some() {
        trace.orbit_distance = Some(Vec::new());
    }
    if !monitors.wells.is_empty() {
        trace.wells = Some(Vec::new());
    }

    let mut u = u0.clone();
    if config.dealias {
        u = u.map_scalars(|s| {
            let mut spec = s.forward();
            spec.dealias_two_thirds();
            spec.into_field()
        });
    }
    let record = |trace: &mut EvolutionTrace, t: f64, u: &State| {
        let rep = action(u, phys, wave);
        trace.push(t, &rep, u.norm_h1());
        if let (Some(r), Some(series)) = (monitors.orbit_reference, trace.orbit_distance.as_mut()) {
            series.push(orbit_distance(u, r).dist);
        }
        if let Some(series) = trace.wells.as_mut() {
            series.push(
                monitors
                    .wells
                    .iter()
                    .map(|p| WellMembership::from_report(&action(u, phys, &p.wave), p.mu))
                    .collect(),
            );
        }
    };
    record(&mut trace, 0.0, &u);
    for n in 1..=n_steps {
        let next = stepper.step(&u);
        let t = n as f64 * dt;
        if !next.is_finite() {
            log::warn!("state became non-finite at t = {t}");
            trace.divergence_time = Some(t);
            break;
        }
        u = next;
        if n % config.record_stride == 0 || n == n_steps {
            record(&mut trace, t, &u);
        }
    }
    Ok((u, trace))
}

/// `Lambda(theta) U = (e^{2 i theta} u1, e^{i theta} u2, e^{i theta} u3)`.
pub fn gauge_apply(u: &State, theta: f64) -> State {
    phase_apply(u, [2.0 * theta, theta, theta])
}

fn phase_apply(u: &State, phases: [f64; 3]) -> State {
    let d = u.dim();
    let mut i = 0;
    u.map_scalars(|s| {
        let out = s.scaled(Complex64::from_polar(1.0, phases[i / d]));
        i += 1;
        out
    })
}

/// `Lambda(omega t) phi(x - c t)`.
pub fn solitary_wave(phi: &State, wave: &WaveParams, t: f64) -> State {
    let shift: Vec<f64> = wave.c.iter().map(|c| c * t).collect();
    gauge_apply(&phi.translated(&shift), wave.omega * t)
}

/// Closest point of the symmetry orbit of `phi` to `U` in H1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitDistance {
    pub dist: f64,
    pub y_star: Vec<f64>,
    /// Gauge angle: component phases are `(2 theta, theta + psi, theta - psi)`.
    pub theta_star: f64,
    /// Angle of the second phase symmetry `(1, e^{i psi}, e^{-i psi})`.
    pub psi_star: f64,
}

/// Spectral data for `F(y, a, b) = Re sum_j e^{-i p_j} C_j(y)` with
/// `p = (a + b, a, b)` and `C_j(y) = (u_j, phi_j(. - y))_{H^1}`.
struct Correlation<'a> {
    grid: &'a Grid,
    /// `dV (1 + |k|^2) u_hat conj(phi_hat)` per component, summed over vector entries.
    x: [Vec<Complex64>; 3],
}

impl<'a> Correlation<'a> {
    fn new(u: &'a State, phi: &State) -> Self {
        let grid = u.grid();
        let dv = grid.cell_volume();
        let weight: Vec<f64> = (0..grid.len()).map(|i| dv * (1.0 + grid.k_squared(i))).collect();
        let x = [0, 1, 2].map(|j| {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (a, b) in u.field(j).components().iter().zip(phi.field(j).components()) {
                let (sa, sb) = (a.forward(), b.forward());
                for (i, o) in acc.iter_mut().enumerate() {
                    *o += sa.coeffs()[i] * sb.coeffs()[i].conj() * weight[i];
                }
            }
            acc
        });
        Correlation { grid, x }
    }

    /// `C_j` at every grid shift, by one inverse transform per component.
    fn on_grid(&self) -> [Vec<Complex64>; 3] {
        let scale = (self.grid.len() as f64).sqrt();
        [0, 1, 2].map(|j| {
            let mut data = self.x[j].clone();
            self.grid.transform_in_place(&mut data, true);
            data.iter_mut().for_each(|v| *v *= scale);
            data
        })
    }

    /// `C_j(y)`, its gradient and Hessian in `y` (flattened `d x d`).
    fn at(&self, y: &[f64]) -> [(Complex64, Vec<Complex64>, Vec<Complex64>); 3] {
        let d = self.grid.dim();
        [0, 1, 2].map(|j| {
            let mut c = Complex64::new(0.0, 0.0);
            let mut g = vec![Complex64::new(0.0, 0.0); d];
            let mut h = vec![Complex64::new(0.0, 0.0); d * d];
            for (i, xv) in self.x[j].iter().enumerate() {
                let k = self.grid.raw_wavevector(i);
                let ky: f64 = k.iter().zip(y).map(|(a, b)| a * b).sum();
                let t = xv * Complex64::from_polar(1.0, ky);
                c += t;
                for a in 0..d {
                    g[a] += t * Complex64::new(0.0, k[a]);
                    for b in 0..d {
                        h[a * d + b] -= t * (k[a] * k[b]);
                    }
                }
            }
            (c, g, h)
        })
    }
}

fn phases(a: f64, b: f64) -> [f64; 3] {
    [a + b, a, b]
}

fn objective(c: &[Complex64; 3], a: f64, b: f64) -> f64 {
    let p = phases(a, b);
    (0..3).map(|j| (Complex64::from_polar(1.0, -p[j]) * c[j]).re).sum()
}

fn wrap_angle(x: f64) -> f64 {
    let mut v = (x + PI).rem_euclid(2.0 * PI) - PI;
    if v <= -PI {
        v += 2.0 * PI;
    }
    v
}

/// `inf ||U - T phi||_{H^1}` over translations and the two phase symmetries
/// `Lambda(theta)` and `(1, e^{i psi}, e^{-i psi})`, both of which leave every
/// functional (hence the ground-state set) invariant.
///
/// Grid-shift candidates come from the cross-correlation peak, phases from a
/// 64 x 64 scan, and a Newton iteration refines all parameters jointly.
pub fn orbit_distance(u: &State, phi: &State) -> OrbitDistance {
    let grid = u.grid();
    let d = grid.dim();
    let corr = Correlation::new(u, phi);
    let base = u.norm_h1_sqr() + phi.norm_h1_sqr();

    // coarse: best grid shifts by total correlation magnitude
    let on_grid = corr.on_grid();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    let mag = |i: usize| on_grid.iter().map(|c| c[i].norm()).sum::<f64>();
    order.sort_by(|&p, &q| mag(q).total_cmp(&mag(p)));
    let shift_of = |idx: usize| -> Vec<f64> {
        let m = grid.multi_index(idx);
        (0..d)
            .map(|a| {
                let n = grid.shape()[a] as isize;
                let mi = m[a] as isize;
                let signed = if mi > n / 2 { mi - n } else { mi };
                signed as f64 * grid.spacing()[a]
            })
            .collect()
    };
    let samples = 64;
    let mut best = (f64::NEG_INFINITY, vec![0.0; d], 0.0, 0.0);
    for &idx in order.iter().take(4) {
        let c = [on_grid[0][idx], on_grid[1][idx], on_grid[2][idx]];
        for ia in 0..samples {
            for ib in 0..samples {
                let a = 2.0 * PI * ia as f64 / samples as f64 - PI;
                let b = 2.0 * PI * ib as f64 / samples as f64 - PI;
                let f = objective(&c, a, b);
                if f > best.0 {
                    best = (f, shift_of(idx), a, b);
                }
            }
        }
    }

    // Newton refinement of (y, a, b)
    let (mut y, mut a, mut b) = (best.1, best.2, best.3);
    let eval = |y: &[f64], a: f64, b: f64| -> f64 {
        let at = corr.at(y);
        objective(&[at[0].0, at[1].0, at[2].0], a, b)
    };
    let mut f = eval(&y, a, b);
    let nvar = d + 2;
    for _ in 0..50 {
        let at = corr.at(&y);
        let p = phases(a, b);
        let rot: Vec<Complex64> = (0..3).map(|j| Complex64::from_polar(1.0, -p[j])).collect();
        // derivatives of each term with respect to its own phase p_j
        let dpj: Vec<[usize; 2]> = vec![[1, 1], [1, 0], [0, 1]]; // dp_j/da, dp_j/db
        let mut grad = DVector::<f64>::zeros(nvar);
        let mut hess = DMatrix::<f64>::zeros(nvar, nvar);
        for j in 0..3 {
            let (c, g, h) = &at[j];
            let r = rot[j];
            let pw = [dpj[j][0] as f64, dpj[j][1] as f64];
            for k in 0..d {
                grad[k] += (r * g[k]).re;
                for l in 0..d {
                    hess[(k, l)] += (r * h[k * d + l]).re;
                }
                for (s, w) in pw.iter().enumerate() {
                    let v = w * (r * g[k]).im;
                    hess[(k, d + s)] += v;
                    hess[(d + s, k)] += v;
                }
            }
            let g_j = r * c;
            for (s, w) in pw.iter().enumerate() {
                grad[d + s] += w * g_j.im;
                for (t, w2) in pw.iter().enumerate() {
                    hess[(d + s, d + t)] -= w * w2 * g_j.re;
                }
            }
        }
        let newton = hess.clone().lu().solve(&(-&grad));
        let ascent = match newton {
            Some(step) if step.dot(&grad) > 0.0 => step,
            _ => grad.clone() * (1.0 / (hess.norm() + 1.0)),
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-8 {
            let ny: Vec<f64> = (0..d).map(|k| y[k] + t * ascent[k]).collect();
            let (na, nb) = (a + t * ascent[d], b + t * ascent[d + 1]);
            let nf = eval(&ny, na, nb);
            if nf >= f {
                y = ny;
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || t * ascent.norm() < 1e-12 {
            break;
        }
    }

    // never worse than the untransformed comparison
    let identity = eval(&vec![0.0; d], 0.0, 0.0);
    if identity > f {
        y = vec![0.0; d];
        a = 0.0;
        b = 0.0;
        f = identity;
    }
    let (a, b) = (wrap_angle(a), wrap_angle(b));
    let dist = (base - 2.0 * f).max(0.0).sqrt();
    let y_star = (0..d)
        .map(|k| {
            let l = grid.extent()[k];
            (y[k] + 0.5 * l).rem_euclid(l) - 0.5 * l
        })
        .collect();
    OrbitDistance { dist, y_star, theta_star: 0.5 * (a + b), psi_star: 0.5 * (a - b) }
}

/// Seeded complex white noise smoothed by `(1 - Lap)^{-1}` and normalized to
/// unit H1 norm.
pub fn random_perturbation(grid: &Grid, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalars: Vec<ScalarField> = (0..3 * grid.dim())
        .map(|_| {
            let vals: Vec<Complex64> = (0..grid.len())
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            let mut spec = ScalarField::from_values_unchecked(grid, vals).forward();
            let smooth: Vec<f64> = (0..grid.len()).map(|i| 1.0 / (1.0 + grid.k_squared(i))).collect();
            spec.scale_by(&smooth);
            spec.into_field()
        })
        .collect();
    let u = State::from_scalars(grid, scalars).expect("same grid");
    let n = u.norm_h1();
    u.scaled(1.0 / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub delta: f64,
    pub seed: u64,
    /// Sandwich offset in units of `sqrt(omega)`.
    pub tau0_factor: f64,
    /// Shrink the perturbed data along its ray until it lies in `A+`
    /// (`S < mu`, `K > 0`), where the sign of `K` is invariant.
    pub place_in_well: bool,
    pub evolve: EvolveConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            delta: 1e-2,
            seed: 0,
            tau0_factor: 0.05,
            place_in_well: true,
            evolve: EvolveConfig { t_final: 50.0, record_stride: 100, ..EvolveConfig::default() },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    /// `||U0 - phi||_{H^1}` actually realized after well placement.
    pub initial_offset: f64,
    /// Ray factor applied to `phi + delta eta` (1 when no placement).
    pub ray_factor: f64,
    pub mu: f64,
    pub tau0: f64,
    pub initial_s: f64,
    pub initial_k: f64,
    /// `U0` lies in `B+` at `(omega_+, c_+, mu_+)` and in `B-` at `(omega_-, c_-, mu_-)`.
    pub initial_sandwich: bool,
    pub sup_orbit_distance: f64,
    pub k_sign_constant: bool,
    /// Fraction of records in the sandwich.
    pub sandwich_fraction: f64,
    pub trace: EvolutionTrace,
}

fn sandwich_probes(wave: &WaveParams, mu: f64, d: usize, tau0: f64) -> Vec<WellProbe> {
    let sw = wave.omega.sqrt();
    [("B+ upper", 1.0), ("B- lower", -1.0)]
        .into_iter()
        .map(|(name, sign)| {
            let f = (sw + sign * tau0) / sw;
            WellProbe {
                name: name.to_string(),
                wave: WaveParams::new((sw + sign * tau0).powi(2), wave.c.iter().map(|c| c * f).collect()),
                mu: f.powi(4 - d as i32) * mu,
            }
        })
        .collect()
}

fn in_sandwich(m: &[WellMembership]) -> bool {
    m[0].b_plus && m[1].b_minus
}

/// Evolves `phi + delta eta` for a normalized random `eta` and records its
/// distance to the orbit of `phi` and the sandwich well memberships.
pub fn stability_experiment(
    phi: &State,
    mu: f64,
    phys: &PhysParams,
    wave: &WaveParams,
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    let d = phi.dim();
    if d > 2 {
        return Err(Error::WrongDimension { expected: "1 or 2".into(), actual: d });
    }
    wave.check_admissible(phys)?;
    if !(config.delta.is_finite() && config.delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be non-negative, got {}", config.delta)));
    }
    let mut u0 = phi.clone();
    u0.axpy(config.delta, &random_perturbation(phi.grid(), config.seed))?;
    let mut ray_factor = 1.0;
    if config.place_in_well && config.delta > 0.0 {
        ray_factor = well_ray_factor(&u0, phys, wave, mu)?;
        u0 = u0.scaled(ray_factor);
    }
    let tau0 = config.tau0_factor * wave.omega.sqrt();
    let monitors = Monitors { orbit_reference: Some(phi), wells: sandwich_probes(wave, mu, d, tau0) };
    let (_, trace) = evolve_monitored(&u0, phys, wave, &config.evolve, &monitors)?;
    if let Some(t) = trace.divergence_time {
        return Err(Error::NonFinite { time: t });
    }
    let wells = trace.wells.as_ref().expect("wells monitored");
    let dists = trace.orbit_distance.as_ref().expect("orbit monitored");
    let k0 = trace.k_sign[0];
    Ok(StabilityReport {
        delta: config.delta,
        initial_offset: u0.sub(phi)?.norm_h1(),
        ray_factor,
        mu,
        tau0,
        initial_s: trace.s[0],
        initial_k: trace.k[0],
        initial_sandwich: in_sandwich(&wells[0]),
        sup_orbit_distance: dists.iter().cloned().fold(0.0, f64::max),
        k_sign_constant: trace.k_sign.iter().all(|s| *s == k0),
        sandwich_fraction: wells.iter().filter(|m| in_sandwich(m)).count() as f64 / wells.len() as f64,
        trace,
    })
}

/// Smallest shrink `lambda = lambda_N (1 - eps)` of `U` along its ray, with
/// `eps` from a doubling sequence, that gives `S < mu` and `K > 0`.
fn well_ray_factor(u: &State, phys: &PhysParams, wave: &WaveParams, mu: f64) -> Result<f64> {
    let rep = action(u, phys, wave);
    if rep.s < mu && rep.k > 0.0 {
        return Ok(1.0);
    }
    let lambda_n = crate::functionals::nehari_factor(&rep)?;
    let mut eps = 1e-6;
    while eps < 1.0 {
        let lam = lambda_n * (1.0 - eps);
        let s = 0.5 * lam * lam * rep.lqc + lam.powi(3) * rep.n;
        let k = lam * lam * rep.lqc + 3.0 * lam.powi(3) * rep.n;
        if s < mu * (1.0 - 1e-12) && k > 0.0 {
            return Ok(lam);
        }
        eps *= 2.0;
    }
    Err(Error::InvalidInput("could not place the perturbed data in the well".into()))
}

/// Radius `sup ||U(t)||_{H^1}^2` is bounded by for data in `A+`:
/// `6 S(U0) / C` with `C` the coercivity constant.
pub fn boundedness_radius(u0: &State, phys: &PhysParams, wave: &WaveParams) -> Result<f64> {
    let cert = coercivity_certificate(phys, wave)?;
    Ok(6.0 * action(u0, phys, wave).s / cert.min_coeff)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Fitted decay rate of `|phi_j|` per component.
    pub rates: [f64; 3],
    /// `sqrt(4 omega sigma0) (1 - sqrt(sigma/(4 omega)) |c|)`.
    pub p_max: f64,
    pub half_bound: f64,
    /// Radii bounding the fit window.
    pub window: [f64; 2],
    /// RMS residual of each log-linear fit.
    pub residuals: [f64; 3],
}

impl DecayReport {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Least-squares decay rates of `log |phi_j|` against `|x|` over
/// `|x| in [0.5, 0.9] L/2`, with radial binning (width `h_min`) for `d >= 2`.
pub fn decay_rate_fit(phi: &State, phys: &PhysParams, wave: &WaveParams) -> Result<DecayReport> {
    let grid = phi.grid();
    let d = grid.dim();
    let half = 0.5 * grid.extent().iter().cloned().fold(f64::INFINITY, f64::min);
    let window = [0.5 * half, 0.9 * half];
    let radius: Vec<f64> = (0..grid.len())
        .map(|i| grid.point(i)[..d].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut rates = [0.0; 3];
    let mut residuals = [0.0; 3];
    for (j, field) in phi.fields().iter().enumerate() {
        let modulus: Vec<f64> = (0..grid.len())
            .map(|i| field.components().iter().map(|s| s.values()[i].norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let points: Vec<(f64, f64)> = if d == 1 {
            radius
                .iter()
                .zip(&modulus)
                .filter(|(r, _)| **r >= window[0] && **r <= window[1])
                .map(|(r, m)| (*r, (m + 1e-300).ln()))
                .collect()
        } else {
            let width = grid.min_spacing();
            let nbins = ((window[1] - window[0]) / width).floor() as usize;
            let mut sums = vec![(0.0, 0.0, 0usize); nbins];
            for (r, m) in radius.iter().zip(&modulus) {
                if *r >= window[0] && *r < window[0] + nbins as f64 * width {
                    let bin = ((r - window[0]) / width) as usize;
                    let s = &mut sums[bin.min(nbins - 1)];
                    s.0 += r;
                    s.1 += m * m;
                    s.2 += 1;
                }
            }
            sums.iter()
                .filter(|s| s.2 > 0)
                .map(|s| (s.0 / s.2 as f64, (0.5 * (s.1 / s.2 as f64).ln()).max(-690.0)))
                .collect()
        };
        if points.len() < 2 {
            return Err(Error::FitWindowEmpty);
        }
        let (slope, rms) = linear_fit(&points);
        rates[j] = -slope;
        residuals[j] = rms;
    }
    let c = wave.c_norm_sqr().sqrt();
    let p_max = (4.0 * wave.omega * phys.sigma0()).sqrt() * (1.0 - (phys.sigma() / (4.0 * wave.omega)).sqrt() * c);
    Ok(DecayReport { rates, p_max, half_bound: 0.5 * p_max, window, residuals })
}

fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rms = (points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}
