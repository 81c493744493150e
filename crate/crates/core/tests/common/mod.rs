//! Reference implementations used as test oracles.
//!
//! Everything here works on raw value arrays with a direct (quadratic cost)
//! separable DFT, so it shares no code with the FFT-based library.
#![allow(dead_code)]

use std::f64::consts::PI;

use dnls_lab::{PhysParams, State, WaveParams};
use num_complex::Complex64;

/// Row-major field values with their shape and box lengths.
#[derive(Clone, Debug)]
pub struct Field {
    pub shape: Vec<usize>,
    pub extent: Vec<f64>,
    pub data: Vec<Complex64>,
}

impl Field {
    fn strides(&self) -> Vec<usize> {
        let d = self.shape.len();
        let mut s = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    fn multi(&self, idx: usize) -> Vec<usize> {
        let s = self.strides();
        (0..self.shape.len()).map(|a| (idx / s[a]) % self.shape[a]).collect()
    }

    /// Signed mode number along `axis` for spectral index `i`.
    fn mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.shape[axis];
        if 2 * i < n {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Raw wavenumber `2 pi m / L`.
    pub fn k_raw(&self, axis: usize, i: usize) -> f64 {
        2.0 * PI * self.mode(axis, i) as f64 / self.extent[axis]
    }

    /// As [`k_raw`] but zero on the Nyquist mode.
    pub fn k_eff(&self, axis: usize, i: usize) -> f64 {
        let n = self.shape[axis];
        if n % 2 == 0 && i == n / 2 {
            0.0
        } else {
            self.k_raw(axis, i)
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.extent.iter().zip(&self.shape).map(|(l, n)| l / *n as f64).product()
    }

    fn dft_axis(&self, axis: usize, inverse: bool) -> Field {
        let n = self.shape[axis];
        let stride = self.strides()[axis];
        let sign = if inverse { 1.0 } else { -1.0 };
        let twiddle: Vec<Complex64> =
            (0..n).map(|m| Complex64::from_polar(1.0, sign * 2.0 * PI * m as f64 / n as f64)).collect();
        let norm = 1.0 / (n as f64).sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for start in 0..self.data.len() {
            if (start / stride) % n != 0 {
                continue;
            }
            for k in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += self.data[start + j * stride] * twiddle[(j * k) % n];
                }
                out[start + k * stride] = acc * norm;
            }
        }
        Field { shape: self.shape.clone(), extent: self.extent.clone(), data: out }
    }

    /// Unitary DFT over all axes.
    pub fn dft(&self, inverse: bool) -> Field {
        let mut f = self.clone();
        for a in 0..self.shape.len() {
            f = f.dft_axis(a, inverse);
        }
        f
    }

    /// Spectral first derivative with the Nyquist mode removed.
    pub fn derivative(&self, axis: usize) -> Field {
        let mut spec = self.dft(false);
        for i in 0..spec.data.len() {
            let m = spec.multi(i);
            spec.data[i] *= Complex64::new(0.0, self.k_eff(axis, m[axis]));
        }
        spec.dft(true)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// `sum |k|^2 |f_hat|^2 dV` with raw wavenumbers.
    pub fn grad_norm_sqr(&self) -> f64 {
        self.spectral_sums().0
    }

    /// `(sum |k_raw|^2 |f_hat|^2 dV, [sum k_eff,a |f_hat|^2 dV]_a)`.
    pub fn spectral_sums(&self) -> (f64, Vec<f64>) {
        let spec = self.dft(false);
        let dv = self.cell_volume();
        let d = self.shape.len();
        let mut grad = 0.0;
        let mut moments = vec![0.0; d];
        for i in 0..spec.data.len() {
            let m = spec.multi(i);
            let w = spec.data[i].norm_sqr() * dv;
            for a in 0..d {
                grad += self.k_raw(a, m[a]).powi(2) * w;
                moments[a] += self.k_eff(a, m[a]) * w;
            }
        }
        (grad, moments)
    }

    /// Spectral translation `f(. - y)`.
    pub fn translated(&self, y: &[f64]) -> Field {
        let mut spec = self.dft(false);
        for i in 0..spec.data.len() {
            let m = spec.multi(i);
            let phase: f64 = (0..self.shape.len()).map(|a| -self.k_eff(a, m[a]) * y[a]).sum();
            spec.data[i] *= Complex64::from_polar(1.0, phase);
        }
        spec.dft(true)
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.data {
            *v *= a;
        }
    }
}

/// The `3d` scalar components of a state, in storage order.
pub fn components(u: &State) -> Vec<Field> {
    let grid = u.grid();
    u.scalars()
        .map(|s| Field { shape: grid.shape().to_vec(), extent: grid.extent().to_vec(), data: s.values().to_vec() })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Functionals {
    pub q: f64,
    pub l: f64,
    pub n: f64,
    pub p: Vec<f64>,
    pub e: f64,
    pub s: f64,
    pub k: f64,
    pub lqc: f64,
}

/// Independent evaluation of the conserved quantities and the action.
pub fn functionals(u: &State, phys: &PhysParams, wave: &WaveParams) -> Functionals {
    let d = u.dim();
    let comps = components(u);
    let kappa = [phys.alpha(), phys.beta(), phys.gamma()];
    let weight = [1.0, 0.5, 0.5];
    let mut q = 0.0;
    let mut l = 0.0;
    let mut p = vec![0.0; d];
    for (i, f) in comps.iter().enumerate() {
        let j = i / d;
        q += weight[j] * f.norm_sqr();
        let (grad, moments) = f.spectral_sums();
        l += 0.5 * kappa[j] * grad;
        for (pa, m) in p.iter_mut().zip(moments) {
            *pa -= 0.5 * m;
        }
    }
    // N = Re (u3, grad(u1 . conj u2))
    let len = comps[0].data.len();
    let w = Field {
        shape: comps[0].shape.clone(),
        extent: comps[0].extent.clone(),
        data: (0..len).map(|x| (0..d).map(|a| comps[a].data[x] * comps[d + a].data[x].conj()).sum()).collect(),
    };
    let dv = comps[0].cell_volume();
    let mut n = 0.0;
    for a in 0..d {
        let dw = w.derivative(a);
        n += comps[2 * d + a].data.iter().zip(&dw.data).map(|(u3, g)| (u3.conj() * g).re).sum::<f64>() * dv;
    }
    let cp: f64 = wave.c.iter().zip(&p).map(|(c, p)| c * p).sum();
    let e = l + n;
    let lqc = 2.0 * l + 2.0 * wave.omega * q + 2.0 * cp;
    Functionals { q, l, n, e, s: e + wave.omega * q + cp, k: lqc + 3.0 * n, lqc, p }
}

/// `||f||^2 + ||grad f||^2` summed over the components of a difference.
pub fn h1_dist_sqr(a: &[Field], b: &[Field]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = Field {
                shape: x.shape.clone(),
                extent: x.extent.clone(),
                data: x.data.iter().zip(&y.data).map(|(p, q)| p - q).collect(),
            };
            diff.norm_sqr() + diff.grad_norm_sqr()
        })
        .sum()
}

pub fn h1_norm_sqr(a: &[Field]) -> f64 {
    a.iter().map(|x| x.norm_sqr() + x.grad_norm_sqr()).sum()
}

/// The travelling wave `(e^{2i theta}, e^{i theta}, e^{i theta}) phi(. - c t)`
/// with `theta = omega t`.
pub fn travelling_wave(phi: &State, wave: &WaveParams, t: f64) -> Vec<Field> {
    let d = phi.dim();
    let shift: Vec<f64> = wave.c.iter().map(|c| c * t).collect();
    let theta = wave.omega * t;
    components(phi)
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut g = f.translated(&shift);
            let phase = if i / d == 0 { 2.0 * theta } else { theta };
            g.scale(Complex64::from_polar(1.0, phase));
            g
        })
        .collect()
}

/// Decay constants: `sigma0 = min(2/alpha, 1/beta, 1/gamma)`,
/// `sigma = 1/min(2 alpha, beta, gamma)`, and
/// `p_max = sqrt(4 omega sigma0) (1 - sqrt(sigma/(4 omega)) |c|)`.
pub fn p_max(phys: &PhysParams, wave: &WaveParams) -> f64 {
    let sigma0 = (2.0 / phys.alpha()).min(1.0 / phys.beta()).min(1.0 / phys.gamma());
    let sigma = 1.0 / (2.0 * phys.alpha()).min(phys.beta()).min(phys.gamma());
    let c = wave.c.iter().map(|c| c * c).sum::<f64>().sqrt();
    (4.0 * wave.omega * sigma0).sqrt() * (1.0 - (sigma / (4.0 * wave.omega)).sqrt() * c)
}
