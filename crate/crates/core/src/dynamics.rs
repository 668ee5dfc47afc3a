//! Time evolution under a fixed non-Hermitian Hamiltonian and the observables
//! read off the resulting amplitudes.
//!
//! Decayed population is simply lost: the norm of ψ shrinks and is never
//! returned to the ground state.

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::atom::RydbergState;
use crate::collective::BasisSet;
use crate::error::{Error, Result};
use crate::expm::{apply, propagator};
use crate::interaction::{HamiltonianModel, HamiltonianTemplate};
use crate::units::TWO_PI;

/// Amplitudes on a uniform time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Array1<Complex64>>,
    /// Real diagonal energy of basis state 0, h·MHz: the rotating frame for phases.
    pub frame_mhz: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array1<Complex64> {
        self.amplitudes.last().expect("trajectory is never empty")
    }

    pub fn norms_squared(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.iter().map(|z| z.norm_sqr()).sum()).collect()
    }
}

/// Basis vector for basis state `k`.
pub fn unit_vector(dim: usize, k: usize) -> Array1<Complex64> {
    let mut v = Array1::zeros(dim);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

fn norm_sqr(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `ψ(T) = exp(−i2πHT) ψ₀` without intermediate samples.
pub fn propagate(h: &HamiltonianModel, psi0: &Array1<Complex64>, t_us: f64) -> Result<Array1<Complex64>> {
    Ok(apply(&propagator(&h.matrix, t_us)?, psi0))
}

/// Integrates `i dψ/dt = 2πHψ` from 0 to `t_us`, sampling `steps + 1` points.
///
/// The sampled end state is compared with a single-shot propagation over the
/// whole interval; a relative mismatch above `tolerance` is reported as an
/// error, as is any growth of the norm.
pub fn evolve(h: &HamiltonianModel, psi0: &Array1<Complex64>, t_us: f64, steps: usize, tolerance: f64) -> Result<Trajectory> {
    if psi0.len() != h.dim() {
        return Err(Error::InvalidParameter(format!("state has {} amplitudes, basis has {}", psi0.len(), h.dim())));
    }
    if (norm_sqr(psi0) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("initial state must be normalised".into()));
    }
    if !(t_us > 0.0) || !(tolerance > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter(format!("need T > 0, tolerance > 0 and steps ≥ 1 (T={t_us}, tol={tolerance}, steps={steps})")));
    }
    let dt = t_us / steps as f64;
    let u = propagator(&h.matrix, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut amplitudes = Vec::with_capacity(steps + 1);
    times.push(0.0);
    amplitudes.push(psi0.clone());
    for k in 1..=steps {
        let next = apply(&u, amplitudes.last().unwrap());
        times.push(k as f64 * dt);
        amplitudes.push(next);
    }
    let direct = propagate(h, psi0, t_us)?;
    let sampled = amplitudes.last().unwrap();
    let mismatch = norm_sqr(&(sampled - &direct)).sqrt() / norm_sqr(&direct).sqrt().max(1e-300);
    if mismatch > tolerance {
        return Err(Error::ToleranceNotMet { requested: tolerance, achieved: mismatch });
    }
    let traj = Trajectory { times, amplitudes, frame_mhz: h.matrix[[0, 0]].re };
    let norms = traj.norms_squared();
    if let Some(w) = norms.windows(2).find(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-15) {
        return Err(Error::ToleranceNotMet { requested: 0.0, achieved: w[1] - w[0] });
    }
    Ok(traj)
}

/// ρ(t): mean number of atoms (out of three) in a state matching `target`,
/// weighted by population.
pub fn transfer_fraction<F>(traj: &Trajectory, basis: &BasisSet, target: F) -> Vec<f64>
where
    F: Fn(&RydbergState) -> bool,
{
    let weights: Vec<f64> = basis.states().iter().map(|cs| cs.atoms().filter(|s| target(s)).count() as f64 / 3.0).collect();
    traj.amplitudes
        .iter()
        .map(|psi| psi.iter().zip(&weights).map(|(z, w)| w * z.norm_sqr()).sum())
        .collect()
}

/// Matches any state with the given `n, l, j`, whatever its projection.
pub fn level_matcher(n: u32, l: u32, j2: u32) -> impl Fn(&RydbergState) -> bool {
    move |s| s.n == n && s.l == l && s.j2 == j2
}

/// Population and rotating-frame phase of basis state 0 at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationPhase {
    pub t_us: f64,
    pub population: f64,
    /// In (−π, π]; `None` where the population is below 1e-12.
    pub phase: Option<f64>,
}

/// `φ₀ = arg(c₀ e^{+i2π E₀ t})` with `E₀` the real diagonal of state 0.
pub fn rotating_frame_amplitude(c0: Complex64, frame_mhz: f64, t_us: f64) -> Complex64 {
    c0 * Complex64::from_polar(1.0, TWO_PI * frame_mhz * t_us)
}

pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(TWO_PI);
    if p > std::f64::consts::PI {
        p -= TWO_PI;
    }
    p
}

pub fn initial_state_population_phase(traj: &Trajectory) -> Vec<PopulationPhase> {
    traj.times
        .iter()
        .zip(&traj.amplitudes)
        .map(|(&t, psi)| {
            let c = rotating_frame_amplitude(psi[0], traj.frame_mhz, t);
            let population = c.norm_sqr();
            let phase = if population < 1e-12 {
                None
            } else if c.im == 0.0 && c.re < 0.0 {
                Some(std::f64::consts::PI)
            } else {
                Some(c.arg())
            };
            PopulationPhase { t_us: t, population, phase }
        })
        .collect()
}

/// ρ(T) at each field of a scan, for a fixed basis and geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceScan {
    pub fields: Vec<f64>,
    pub t_us: f64,
    pub rho: Vec<f64>,
}

impl ResonanceScan {
    /// Evaluates every field point independently, in parallel.
    pub fn compute<F>(template: &HamiltonianTemplate, fields: &[f64], t_us: f64, target: F) -> Result<Self>
    where
        F: Fn(&RydbergState) -> bool + Sync,
    {
        if fields.is_empty() {
            return Err(Error::InvalidParameter("field grid is empty".into()));
        }
        if !(t_us > 0.0) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {t_us}")));
        }
        let basis = template.basis();
        let weights: Vec<f64> = basis.states().iter().map(|cs| cs.atoms().filter(|s| target(s)).count() as f64 / 3.0).collect();
        let psi0 = unit_vector(basis.len(), 0);
        let rho = fields
            .par_iter()
            .map(|&e| {
                let psi = propagate(&template.at_field(e)?, &psi0, t_us)?;
                Ok(psi.iter().zip(&weights).map(|(z, w)| w * z.norm_sqr()).sum())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ResonanceScan { fields: fields.to_vec(), t_us, rho })
    }

    pub fn peaks(&self, min_prominence: f64) -> Vec<Peak> {
        find_peaks(&self.fields, &self.rho, min_prominence)
    }

    /// See [`resonance_features`].
    pub fn features(&self, rel_threshold: f64, merge_gap: f64) -> Vec<Feature> {
        resonance_features(&self.fields, &self.rho, rel_threshold, merge_gap)
    }
}

/// A resonance with its detuning fringes lumped together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feature {
    pub lo: f64,
    pub hi: f64,
    pub peak_x: f64,
    pub peak_y: f64,
}

/// Groups samples with `y ≥ rel_threshold · max(y)` into features, merging
/// groups closer than `merge_gap` in x. At fixed T the transfer oscillates
/// with detuning, so one resonance shows up as a comb of fringes on a
/// coarse grid; merging keeps it as one feature.
pub fn resonance_features(x: &[f64], y: &[f64], rel_threshold: f64, merge_gap: f64) -> Vec<Feature> {
    let top = y.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Vec::new();
    }
    let cut = rel_threshold * top;
    let mut out: Vec<Feature> = Vec::new();
    for (&xi, &yi) in x.iter().zip(y) {
        if yi < cut {
            continue;
        }
        match out.last_mut() {
            Some(f) if xi - f.hi <= merge_gap => {
                f.hi = xi;
                if yi > f.peak_y {
                    f.peak_x = xi;
                    f.peak_y = yi;
                }
            }
            _ => out.push(Feature { lo: xi, hi: xi, peak_x: xi, peak_y: yi }),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub x: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima whose prominence (height above the higher of the two
/// surrounding minima, each taken out to the next taller sample or the grid
/// edge) is at least `min_prominence`. Flat tops count once.
pub fn find_peaks(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        let left_lower = i == 0 || y[i - 1] < y[i];
        let right_lower = j + 1 == n || y[j + 1] < y[i];
        if left_lower && right_lower && n > 1 {
            let h = y[i];
            let mut lmin = h;
            for k in (0..i).rev() {
                if y[k] > h {
                    break;
                }
                lmin = lmin.min(y[k]);
            }
            let mut rmin = h;
            for &v in &y[j + 1..] {
                if v > h {
                    break;
                }
                rmin = rmin.min(v);
            }
            let prominence = h - lmin.max(rmin);
            if prominence >= min_prominence {
                let mid = (i + j) / 2;
                out.push(Peak { index: mid, x: x[mid], height: h, prominence });
            }
        }
        i = j + 1;
    }
    out
}
