//! Radial dipole integrals `⟨ν1 l1| r |ν2 l2⟩` in atomic units.
//!
//! Two independent routes: a quasiclassical Fourier integral over the
//! Kepler orbit (the production path) and inward Numerov integration of
//! Coulomb wavefunctions at the quantum-defect energies (a test oracle).
//! Both use the convention that wavefunctions are positive at large r.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn check_dl(l1: u32, l2: u32) -> Result<()> {
    if l1.abs_diff(l2) != 1 {
        return Err(Error::SelectionRule(format!("radial dipole integral needs |Δl| = 1, got l = {l1}, {l2}")));
    }
    Ok(())
}

/// Quadrature rule for [`radial_qc`].
#[derive(Clone, Debug)]
pub struct QcQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QcQuadrature {
    pub fn new(points: usize) -> Self {
        let (x, w) = gauss_legendre(points);
        let h = std::f64::consts::FRAC_PI_2;
        QcQuadrature { nodes: x.iter().map(|&x| (x + 1.0) * h).collect(), weights: w.iter().map(|&w| w * h).collect() }
    }
}

impl Default for QcQuadrature {
    fn default() -> Self {
        QcQuadrature::new(400)
    }
}

/// Quasiclassical radial integral between effective quantum numbers `nu1`, `nu2`.
///
/// With `s = ν2 − ν1`, `n_c = √(ν1ν2)`, `l_c = max(l1, l2)` and orbit
/// eccentricity `e = √(1 − (l_c/n_c)²)`, the integral is taken over the
/// eccentric anomaly η measured from apocentre:
///
/// `R = (n_c²/π) ∫₀^π (1 + e cos η) [(cos η + e) cos φ + Δl √(1−e²) sin η sin φ] dη`,
/// `φ = s (η + e sin η)`.
pub fn radial_qc(nu1: f64, l1: u32, nu2: f64, l2: u32, quad: &QcQuadrature) -> Result<f64> {
    check_dl(l1, l2)?;
    let s = nu2 - nu1;
    let dl = l2 as f64 - l1 as f64;
    let nc = (nu1 * nu2).sqrt();
    let lc = l1.max(l2) as f64;
    if lc >= nc {
        return Err(Error::InvalidState(format!("l = {lc} too large for effective n = {nc}")));
    }
    let e = (1.0 - (lc / nc).powi(2)).sqrt();
    let b = (1.0 - e * e).sqrt();
    let mut sum = 0.0;
    for (&eta, &w) in quad.nodes.iter().zip(&quad.weights) {
        let (sn, cs) = eta.sin_cos();
        let phi = s * (eta + e * sn);
        let (sp, cp) = phi.sin_cos();
        sum += w * (1.0 + e * cs) * ((cs + e) * cp + dl * b * sn * sp);
    }
    Ok(nc * nc / std::f64::consts::PI * sum)
}

/// Inward Numerov solution on `x = √r`, normalised so that `2∫w²x²dx = 1`.
///
/// Returns the values on the grid `x_i = x_outer − i·h`, truncated near the
/// inner classical turning point once the solution starts to diverge.
fn numerov_wavefunction(nu: f64, l: u32, x_outer: f64, h: f64) -> Vec<f64> {
    let energy = -0.5 / (nu * nu);
    let lf = l as f64;
    let n = (x_outer / h) as usize;
    let g = |x: f64| (4.0 * lf * (lf + 1.0) + 0.75) / (x * x) + 8.0 * x * x * (-1.0 / (x * x) - energy);
    let r_inner = nu * nu * (1.0 - (1.0 - lf * (lf + 1.0) / (nu * nu)).max(0.0).sqrt());
    let h12 = h * h / 12.0;
    let mut w = Vec::with_capacity(n);
    w.push(1e-30);
    w.push(1e-30 * (h * g(x_outer).max(0.0).sqrt()).exp());
    let (mut g_prev, mut g_cur) = (g(x_outer), g(x_outer - h));
    for i in 1..n - 1 {
        let x_next = x_outer - (i + 1) as f64 * h;
        let g_next = g(x_next);
        let next = (2.0 * w[i] * (1.0 + 5.0 * h12 * g_cur) - w[i - 1] * (1.0 - h12 * g_prev)) / (1.0 - h12 * g_next);
        let r = x_next * x_next;
        if r < r_inner && next.abs() > w[i].abs() {
            break;
        }
        w.push(next);
        if r < 1e-3 {
            break;
        }
        g_prev = g_cur;
        g_cur = g_next;
    }
    let norm: f64 = w.iter().enumerate().map(|(i, wi)| {
        let x = x_outer - i as f64 * h;
        wi * wi * x * x
    }).sum::<f64>();
    let scale = 1.0 / (2.0 * norm * h).sqrt();
    w.iter_mut().for_each(|v| *v *= scale);
    w
}

/// Numerov radial integral with step `h` in `x = √r`.
pub fn radial_numerov(nu1: f64, l1: u32, nu2: f64, l2: u32, h: f64) -> Result<f64> {
    check_dl(l1, l2)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("Numerov step must be positive, got {h}")));
    }
    let nu_max = nu1.max(nu2);
    let x_outer = (2.0 * nu_max * (nu_max + 25.0)).sqrt();
    let w1 = numerov_wavefunction(nu1, l1, x_outer, h);
    let w2 = numerov_wavefunction(nu2, l2, x_outer, h);
    let m = w1.len().min(w2.len());
    let sum: f64 = (0..m).map(|i| {
        let x = x_outer - i as f64 * h;
        w1[i] * w2[i] * x.powi(4)
    }).sum();
    Ok(2.0 * sum * h)
}

/// Default Numerov step.
pub const NUMEROV_STEP: f64 = 0.005;
