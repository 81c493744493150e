//! Conserved and variational functionals of the three-wave system.
//!
//! For `U = (u1, u2, u3)` with dispersion coefficients `(alpha, beta, gamma)`:
//!
//! ```text
//! Q   = ||u1||^2 + ||u2||^2/2 + ||u3||^2/2
//! L   = alpha/2 ||grad u1||^2 + beta/2 ||grad u2||^2 + gamma/2 ||grad u3||^2
//! N   = Re (u3, grad(u1 . conj u2))
//! P_k = -1/2 sum_j Re (i u_j, d_k u_j)
//! S   = L + N + omega Q + c.P          (action)
//! K   = 2L + 3N + 2 omega Q + 2 c.P    (Nehari functional, d/dl S(l U) at l = 1)
//! Lqc = K - 3N                         (quadratic part)
//! G   = (4 - 2d) omega Q + (3 - d) c.P
//! ```
//!
//! Everything quadratic is evaluated in Fourier space with the effective
//! wavenumbers of [`crate::grid`]; the cubic term uses pointwise products.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, Spectrum, State, VectorField};

/// Weights of the three components in the charge `Q`.
pub const CHARGE_WEIGHTS: [f64; 3] = [1.0, 0.5, 0.5];

/// Dispersion coefficients `(alpha, beta, gamma)`, all positive.
///
/// Systems with all three coefficients negative reduce to this case through
/// the reflection `(t, x) -> (-t, -x)`, so only the positive octant is
/// accepted here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl PhysParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhysParams { alpha, beta, gamma })
    }

    pub fn unit() -> Self {
        PhysParams { alpha: 1.0, beta: 1.0, gamma: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dispersion coefficient of component `j` in `0..3`.
    pub fn dispersion(&self, j: usize) -> f64 {
        [self.alpha, self.beta, self.gamma][j]
    }

    /// `sigma = 1 / min(2 alpha, beta, gamma)`.
    pub fn sigma(&self) -> f64 {
        1.0 / (2.0 * self.alpha).min(self.beta).min(self.gamma)
    }

    /// `sigma0 = min(2/alpha, 1/beta, 1/gamma)`.
    pub fn sigma0(&self) -> f64 {
        (2.0 / self.alpha).min(1.0 / self.beta).min(1.0 / self.gamma)
    }

    /// True when `(alpha - gamma)(beta + gamma) = 0`, where the known
    /// energy-space well-posedness theory does not apply.
    pub fn resonant(&self) -> bool {
        (self.alpha - self.gamma) * (self.beta + self.gamma) == 0.0
    }
}

/// Solitary-wave parameters: frequency `omega` and velocity `c` in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub omega: f64,
    pub c: Vec<f64>,
}

impl WaveParams {
    pub fn new(omega: f64, c: Vec<f64>) -> Self {
        WaveParams { omega, c }
    }

    /// Standing wave (`c = 0`) in dimension `d`.
    pub fn at_rest(omega: f64, d: usize) -> Self {
        WaveParams { omega, c: vec![0.0; d] }
    }

    pub fn c_norm_sqr(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum()
    }

    pub fn c_dot(&self, p: &[f64]) -> f64 {
        self.c.iter().zip(p).map(|(a, b)| a * b).sum()
    }

    /// `sigma |c|^2 / 4`, the lower bound on admissible frequencies.
    pub fn threshold(&self, phys: &PhysParams) -> f64 {
        phys.sigma() * self.c_norm_sqr() / 4.0
    }

    pub fn is_admissible(&self, phys: &PhysParams) -> bool {
        self.omega > self.threshold(phys)
    }

    pub fn check_admissible(&self, phys: &PhysParams) -> Result<()> {
        if self.is_admissible(phys) {
            Ok(())
        } else {
            Err(Error::InadmissibleParameters { omega: self.omega, threshold: self.threshold(phys) })
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.c.len() != d {
            return Err(Error::InvalidInput(format!(
                "velocity has {} components on a {d}-dimensional grid",
                self.c.len()
            )));
        }
        Ok(())
    }
}

/// One evaluation of every functional on a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    /// Charge `Q`.
    pub q: f64,
    /// Kinetic energy `L`.
    pub l: f64,
    /// Potential energy `N`.
    pub n: f64,
    /// Energy `E = L + N`.
    pub e: f64,
    /// Momentum vector `P`.
    pub p: Vec<f64>,
    /// Action `S = E + omega Q + c.P`.
    pub s: f64,
    /// Nehari functional `K`.
    pub k: f64,
    /// Quadratic part `Lqc = K - 3N`.
    pub lqc: f64,
    /// Raw stability functional `G = (4-2d) omega Q + (3-d) c.P`.
    pub g: f64,
    /// The quantity thresholded in the definition of `M*(eta)`:
    /// `omega Q + c P` for d = 1, `c.P` for d = 2, `G` otherwise.
    pub g_display: f64,
}

impl FunctionalReport {
    /// Relative defect of `S = K/3 + Lqc/6`.
    pub fn skl_residual(&self) -> f64 {
        let rhs = self.k / 3.0 + self.lqc / 6.0;
        (self.s - rhs).abs() / (self.s.abs() + (self.k / 3.0).abs() + (self.lqc / 6.0).abs()).max(f64::MIN_POSITIVE)
    }

    /// Relative defect of `N = -2S + K`.
    pub fn skl4_residual(&self) -> f64 {
        let rhs = -2.0 * self.s + self.k;
        (self.n - rhs).abs() / (self.n.abs() + 2.0 * self.s.abs() + self.k.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Quadratic and cubic building blocks shared by every functional.
struct Pieces {
    /// `||u_j||^2`
    mass: [f64; 3],
    /// `||grad u_j||^2`
    grad: [f64; 3],
    /// momentum vector
    p: Vec<f64>,
    /// potential energy
    n: f64,
}

fn spectra(u: &State) -> Vec<Spectrum> {
    u.scalars().map(|s| s.forward()).collect()
}

fn pieces(u: &State) -> Pieces {
    let d = u.dim();
    let specs = spectra(u);
    let mut mass = [0.0; 3];
    let mut grad = [0.0; 3];
    let mut p = vec![0.0; d];
    for (i, spec) in specs.iter().enumerate() {
        let j = i / d;
        mass[j] += spec.norm_l2_sqr();
        grad[j] += spec.gradient_norm_sqr();
        for (axis, pk) in p.iter_mut().enumerate() {
            *pk -= 0.5 * spec.first_moment(axis);
        }
    }
    Pieces { mass, grad, p, n: potential_from(u) }
}

fn potential_from(u: &State) -> f64 {
    let w = u.u1().dot_conj(u.u2()).expect("state fields share a grid");
    let w_hat = w.forward();
    let mut n = 0.0;
    for (axis, u3k) in u.u3().components().iter().enumerate() {
        let dw = w_hat.partial(axis).inverse();
        n += u3k.inner_l2(&dw).expect("same grid").re;
    }
    n
}

/// `Q(U)`.
pub fn charge(u: &State) -> f64 {
    u.fields().iter().zip(CHARGE_WEIGHTS).map(|(f, w)| w * f.norm_l2_sqr()).sum()
}

/// `L(U)`.
pub fn kinetic(u: &State, phys: &PhysParams) -> f64 {
    u.fields()
        .iter()
        .enumerate()
        .map(|(j, f)| 0.5 * phys.dispersion(j) * f.gradient_norm_sqr())
        .sum()
}

/// `N(U) = Re (u3, grad(u1 . conj u2))`.
pub fn potential(u: &State) -> f64 {
    potential_from(u)
}

/// `E(U) = L(U) + N(U)`.
pub fn energy(u: &State, phys: &PhysParams) -> f64 {
    kinetic(u, phys) + potential(u)
}

/// `P(U)`.
pub fn momentum(u: &State) -> Vec<f64> {
    let d = u.dim();
    let mut p = vec![0.0; d];
    for s in u.scalars() {
        let spec = s.forward();
        for (axis, pk) in p.iter_mut().enumerate() {
            *pk -= 0.5 * spec.first_moment(axis);
        }
    }
    p
}

/// `G(U) = (4 - 2d) omega Q + (3 - d) c.P`.
pub fn stability_g(u: &State, wave: &WaveParams) -> f64 {
    let d = u.dim() as f64;
    (4.0 - 2.0 * d) * wave.omega * charge(u) + (3.0 - d) * wave.c_dot(&momentum(u))
}

fn g_display(d: usize, omega: f64, q: f64, cp: f64, g: f64) -> f64 {
    match d {
        1 => omega * q + cp,
        2 => cp,
        _ => g,
    }
}

/// Evaluates every functional in one pass.
///
/// Inadmissible `(omega, c)` only produce a warning: the functionals are
/// defined regardless, the variational statements are not.
pub fn action(u: &State, phys: &PhysParams, wave: &WaveParams) -> FunctionalReport {
    if !wave.is_admissible(phys) {
        log::warn!(
            "evaluating the action at inadmissible omega = {} (threshold {})",
            wave.omega,
            wave.threshold(phys)
        );
    }
    let d = u.dim();
    let pc = pieces(u);
    let q: f64 = (0..3).map(|j| CHARGE_WEIGHTS[j] * pc.mass[j]).sum();
    let l: f64 = (0..3).map(|j| 0.5 * phys.dispersion(j) * pc.grad[j]).sum();
    let n = pc.n;
    let cp = wave.c_dot(&pc.p);
    let e = l + n;
    let s = e + wave.omega * q + cp;
    let lqc = 2.0 * l + 2.0 * wave.omega * q + 2.0 * cp;
    let k = lqc + 3.0 * n;
    let df = d as f64;
    let g = (4.0 - 2.0 * df) * wave.omega * q + (3.0 - df) * cp;
    FunctionalReport { q, l, n, e, p: pc.p, s, k, lqc, g, g_display: g_display(d, wave.omega, q, cp, g) }
}

/// Fourier symbol of the quadratic part of `S` for component `j`:
/// `kappa_j |k|^2 + w_j omega - c.k` with `w = (2, 1, 1)`.
pub fn linear_symbol(j: usize, k: &[f64], k2: f64, phys: &PhysParams, wave: &WaveParams) -> f64 {
    let ck: f64 = wave.c.iter().zip(k).map(|(a, b)| a * b).sum();
    phys.dispersion(j) * k2 + 2.0 * CHARGE_WEIGHTS[j] * wave.omega - ck
}

/// Symbol table of [`linear_symbol`] over a grid, one vector per component.
pub fn symbol_table(grid: &Grid, phys: &PhysParams, wave: &WaveParams) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|j| (0..grid.len()).map(|i| linear_symbol(j, grid.wavevector(i), grid.k_squared(i), phys, wave)).collect())
}

/// The nonlinear part of the action gradient:
/// `(-(div u3) u2, -(div conj u3) u1, grad(u1 . conj u2))`.
pub(crate) fn nonlinear_gradient(u: &State) -> State {
    let div3 = u.u3().divergence().expect("same grid");
    let div3c = div3.conj();
    let mut g1 = u.u2().mul_scalar_field(&div3).expect("same grid");
    g1.scale(Complex64::new(-1.0, 0.0));
    let mut g2 = u.u1().mul_scalar_field(&div3c).expect("same grid");
    g2.scale(Complex64::new(-1.0, 0.0));
    let w = u.u1().dot_conj(u.u2()).expect("same grid");
    let g3 = w.gradient();
    State::new(g1, g2, g3).expect("same grid")
}

/// L2 gradient of `S`: the state `G` with `dS(U)[V] = Re (G, V)_{L^2}`.
///
/// Component 1 is `-alpha Lap u1 + 2 omega u1 + i (c.grad) u1 - (div u3) u2`,
/// component 2 is `-beta Lap u2 + omega u2 + i (c.grad) u2 - (div conj u3) u1`,
/// component 3 is `-gamma Lap u3 + omega u3 + i (c.grad) u3 + grad(u1 . conj u2)`.
pub fn action_gradient(u: &State, phys: &PhysParams, wave: &WaveParams) -> State {
    let grid = u.grid().clone();
    let d = grid.dim();
    let symbols = symbol_table(&grid, phys, wave);
    let mut out = nonlinear_gradient(u);
    for (i, (dst, src)) in out.scalars_mut().zip(u.scalars()).enumerate() {
        let mut spec = src.forward();
        spec.scale_by(&symbols[i / d]);
        let lin = spec.into_field();
        dst.axpy(Complex64::new(1.0, 0.0), &lin).expect("same grid");
    }
    out
}

/// Rescales `U` onto the Nehari manifold: returns `lambda = -Lqc/(3N)` and
/// `lambda U`, for which `K(lambda U) = lambda^2 Lqc + 3 lambda^3 N = 0`.
pub fn nehari_rescale(u: &State, phys: &PhysParams, wave: &WaveParams) -> Result<(f64, State)> {
    let rep = action(u, phys, wave);
    let lambda = nehari_factor(&rep)?;
    Ok((lambda, u.scaled(lambda)))
}

pub(crate) fn nehari_factor(rep: &FunctionalReport) -> Result<f64> {
    if rep.n.abs() < 1e-14 * (1.0 + rep.lqc.abs()) {
        return Err(Error::DegenerateNonlinearity { n: rep.n, lqc: rep.lqc });
    }
    Ok(-rep.lqc / (3.0 * rep.n))
}

/// Explicit coercivity constants for `Lqc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityCertificate {
    /// The splitting parameters `A_1, A_2, A_3`.
    pub a: [f64; 3],
    /// Coefficients of `||grad u_j||^2` (first three) and `||u_j||^2` (last three).
    pub coefficients: [f64; 6],
    pub min_coeff: f64,
}

impl CoercivityCertificate {
    /// `min_coeff ||U||_{H^1}^2`, a lower bound for `Lqc(U)`.
    pub fn lower_bound(&self, u: &State) -> f64 {
        self.min_coeff * u.norm_h1_sqr()
    }
}

/// Coercivity constants with
/// `A_1 = (alpha + |c|^2/(8 omega))/4`, `A_2 = (beta + |c|^2/(4 omega))/4`,
/// `A_3 = (gamma + |c|^2/(4 omega))/4`.
pub fn coercivity_certificate(phys: &PhysParams, wave: &WaveParams) -> Result<CoercivityCertificate> {
    wave.check_admissible(phys)?;
    let (w, c2) = (wave.omega, wave.c_norm_sqr());
    let a = [
        0.25 * (phys.alpha + c2 / (8.0 * w)),
        0.25 * (phys.beta + c2 / (4.0 * w)),
        0.25 * (phys.gamma + c2 / (4.0 * w)),
    ];
    let coefficients = [
        phys.alpha - 2.0 * a[0],
        phys.beta - 2.0 * a[1],
        phys.gamma - 2.0 * a[2],
        2.0 * w - c2 / (8.0 * a[0]),
        w - c2 / (8.0 * a[1]),
        w - c2 / (8.0 * a[2]),
    ];
    let min_coeff = coefficients.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CoercivityCertificate { a, coefficients, min_coeff })
}

/// Splits `Lqc(U)` as `sum coeff * norm^2 + 2 sum_{j,k} I_{j,k}` where
/// `I_{j,k} = ||A_j d_k u_j - (c_k/4) i u_j||^2 / A_j >= 0`.
///
/// Evaluated mode by mode. On Nyquist modes the first derivative vanishes
/// while `|k|^2` does not, so `I` there also carries `A_j k_nyq^2 |u_hat|^2`;
/// with that the split is exact on the grid.
///
/// Returns `(weighted norms, 2 sum I)`.
pub fn coercivity_decomposition(u: &State, wave: &WaveParams, cert: &CoercivityCertificate) -> (f64, f64) {
    let grid = u.grid();
    let dv = grid.cell_volume();
    let mut quad = 0.0;
    let mut isum = 0.0;
    for (j, f) in u.fields().iter().enumerate() {
        quad += cert.coefficients[j] * f.gradient_norm_sqr() + cert.coefficients[3 + j] * f.norm_l2_sqr();
        let aj = cert.a[j];
        for comp in f.components() {
            let spec = comp.forward();
            for (i, c) in spec.coeffs().iter().enumerate() {
                let (k, raw) = (grid.wavevector(i), grid.raw_wavevector(i));
                let per_mode: f64 = (0..grid.dim())
                    .map(|a| (aj * k[a] - wave.c[a] / 4.0).powi(2) + aj * aj * (raw[a] * raw[a] - k[a] * k[a]))
                    .sum();
                isum += 2.0 * per_mode / aj * c.norm_sqr() * dv;
            }
        }
    }
    (quad, isum)
}

/// Membership in the potential wells
/// `A+- = {S < mu, K >< 0}` and `B+- = {S < mu, N >< -2 mu}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellMembership {
    pub a_plus: bool,
    pub a_minus: bool,
    pub b_plus: bool,
    pub b_minus: bool,
}

impl WellMembership {
    pub fn from_report(rep: &FunctionalReport, mu: f64) -> Self {
        let below = rep.s < mu;
        WellMembership {
            a_plus: below && rep.k > 0.0,
            a_minus: below && rep.k < 0.0,
            b_plus: below && rep.n > -2.0 * mu,
            b_minus: below && rep.n < -2.0 * mu,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.a_plus || self.a_minus || self.b_plus || self.b_minus)
    }

    /// Compact label used in CSV output.
    pub fn label(&self) -> &'static str {
        match (self.a_plus, self.a_minus) {
            (true, _) => "A+",
            (_, true) => "A-",
            _ if self.b_plus => "B+",
            _ if self.b_minus => "B-",
            _ => "none",
        }
    }
}

/// Classifies `U` against the wells at level `mu`.
pub fn classify_well(u: &State, phys: &PhysParams, wave: &WaveParams, mu: f64) -> Result<WellMembership> {
    if !(mu > 0.0) {
        return Err(Error::NonpositiveLevel(mu));
    }
    wave.check_admissible(phys)?;
    if u.norm_l2_sqr() == 0.0 {
        return Ok(WellMembership::default());
    }
    Ok(WellMembership::from_report(&action(u, phys, wave), mu))
}

/// Level of `S` along the ray `lambda U`, `lambda^2 Lqc/2 + lambda^3 N`.
fn ray_action(rep: &FunctionalReport, lambda: f64) -> f64 {
    0.5 * lambda * lambda * rep.lqc + lambda.powi(3) * rep.n
}

/// Root of `ray_action = mu` bracketed by `[lo, hi]`, with `ray_action(lo) < mu`.
fn ray_root(rep: &FunctionalReport, mu: f64, mut lo: f64, mut hi: f64) -> f64 {
    let below_at_lo = ray_action(rep, lo) < mu;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (ray_action(rep, mid) < mu) == below_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Seeded random states below the level `mu` of `S`, half in the small
/// amplitude branch and half beyond the Nehari peak of their ray (where
/// `N < 0` is enforced by flipping `u3`).
///
/// Each sample is a smoothed random field rescaled to a uniformly drawn
/// fraction of the distance to the crossing `S = mu` of its ray.
pub fn sublevel_samples(
    grid: &Grid,
    phys: &PhysParams,
    wave: &WaveParams,
    mu: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<State>> {
    use rand::{Rng, SeedableRng};

    if !(mu > 0.0) {
        return Err(Error::NonpositiveLevel(mu));
    }
    wave.check_admissible(phys)?;
    wave.check_dim(grid.dim())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut u = crate::evolution::random_perturbation(grid, rng.random());
        let far = i % 2 == 1;
        let flip = if far { potential(&u) > 0.0 } else { rng.random_bool(0.5) };
        if flip {
            for s in u.field_mut(2).components_mut() {
                s.scale(Complex64::new(-1.0, 0.0));
            }
        }
        let rep = action(&u, phys, wave);
        let lambda = if far {
            let peak = nehari_factor(&rep)?;
            if ray_action(&rep, peak) <= mu {
                return Err(Error::InvalidInput(format!("ray maximum lies below mu = {mu}")));
            }
            let mut hi = 2.0 * peak;
            while ray_action(&rep, hi) >= mu {
                hi *= 2.0;
            }
            ray_root(&rep, mu, hi, peak) * (1.0 + rng.random_range(1e-3..1.0))
        } else {
            let mut hi = if rep.n < 0.0 { nehari_factor(&rep)? } else { 1.0 };
            while rep.n >= 0.0 && ray_action(&rep, hi) < mu {
                hi *= 2.0;
            }
            if ray_action(&rep, hi) < mu {
                return Err(Error::InvalidInput(format!("ray maximum lies below mu = {mu}")));
            }
            ray_root(&rep, mu, 0.0, hi) * rng.random_range(0.05..0.999)
        };
        out.push(u.scaled(lambda));
    }
    Ok(out)
}

/// Result of an L2-invariant dilation.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub state: State,
    /// Fraction of the L2 mass that is aliased (contraction) or pushed out of
    /// the box (expansion).
    pub lost_mass: f64,
}

/// `Phi^lambda(x) = lambda^{d/2} Phi(lambda x)`, evaluated by exact
/// trigonometric interpolation; samples whose preimage leaves the box are zero.
pub fn l2_scaling(u: &State, lambda: f64) -> Result<State> {
    let out = dilate(u, lambda)?;
    if out.lost_mass > 1e-8 {
        return Err(Error::ResolutionLoss { mass: out.lost_mass });
    }
    Ok(out.state)
}

/// Like [`l2_scaling`] but always returns the result with its mass loss.
pub fn dilate(u: &State, lambda: f64) -> Result<Dilation> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidInput(format!("dilation factor must be positive, got {lambda}")));
    }
    let grid = u.grid().clone();
    let d = grid.dim();
    let total = u.norm_l2_sqr();
    let lost_mass = if total > 0.0 {
        dilation_loss(u, lambda) / total
    } else {
        0.0
    };
    let mats: Vec<Vec<Complex64>> = (0..d).map(|axis| interpolation_matrix(&grid, axis, lambda)).collect();
    let amp = Complex64::new(lambda.powf(0.5 * d as f64), 0.0);
    let state = u.map_scalars(|s| {
        let mut vals = s.values().to_vec();
        for (axis, m) in mats.iter().enumerate() {
            apply_along_axis(&grid, axis, m, &mut vals);
        }
        let mut f = ScalarField::from_values_unchecked(&grid, vals);
        f.scale(amp);
        f
    });
    Ok(Dilation { state, lost_mass })
}

fn dilation_loss(u: &State, lambda: f64) -> f64 {
    let grid = u.grid();
    let d = grid.dim();
    let dv = grid.cell_volume();
    let mut lost = 0.0;
    for s in u.scalars() {
        if lambda > 1.0 {
            let spec = s.forward();
            for (i, c) in spec.coeffs().iter().enumerate() {
                let k = grid.raw_wavevector(i);
                if (0..d).any(|a| lambda * k[a].abs() >= grid.nyquist(a) - 1e-12) {
                    lost += c.norm_sqr() * dv;
                }
            }
        } else if lambda < 1.0 {
            for (i, v) in s.values().iter().enumerate() {
                let x = grid.point(i);
                if (0..d).any(|a| x[a].abs() >= 0.5 * lambda * grid.extent()[a]) {
                    lost += v.norm_sqr() * dv;
                }
            }
        }
    }
    lost
}

/// Row-major `n x n` matrix mapping samples to the interpolant at `lambda x_i`.
fn interpolation_matrix(grid: &Grid, axis: usize, lambda: f64) -> Vec<Complex64> {
    use std::f64::consts::PI;
    let n = grid.shape()[axis];
    let l = grid.extent()[axis];
    let xs = grid.axis_coordinates(axis);
    let x0 = xs[0];
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, &xi) in xs.iter().enumerate() {
        let xe = lambda * xi;
        if xe.abs() >= 0.5 * l && (lambda - 1.0).abs() > 0.0 {
            continue;
        }
        let t = xe - x0;
        // Weight of sample j: (1/n) sum_m e^{i k_m (t - x_j + x0)}, with the
        // Nyquist term taken as a cosine so real data stays real.
        for j in 0..n {
            let s = t - j as f64 * l / n as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for mm in 0..n {
                let signed = if mm < n / 2 { mm as f64 } else { mm as f64 - n as f64 };
                let k = 2.0 * PI * signed / l;
                if mm == n / 2 {
                    acc += (k * s).cos();
                } else {
                    acc += Complex64::from_polar(1.0, k * s);
                }
            }
            m[i * n + j] = acc / n as f64;
        }
    }
    m
}

fn apply_along_axis(grid: &Grid, axis: usize, mat: &[Complex64], data: &mut [Complex64]) {
    let n = grid.shape()[axis];
    let stride = grid.strides()[axis];
    let block = n * stride;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for base in (0..grid.len()).step_by(block) {
        for offset in 0..stride {
            let start = base + offset;
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            for (i, o) in out.iter_mut().enumerate() {
                let row = &mat[i * n..(i + 1) * n];
                *o = row.iter().zip(&line).map(|(a, b)| a * b).sum();
            }
            for (i, v) in out.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

/// Gauge-free helper: a state whose three fields are `f` polarized along
/// axis 0, used by ansatz construction and tests.
pub fn polarized_state(f1: ScalarField, f2: ScalarField, f3: ScalarField) -> Result<State> {
    State::new(
        VectorField::polarized(f1, 0)?,
        VectorField::polarized(f2, 0)?,
        VectorField::polarized(f3, 0)?,
    )
}
