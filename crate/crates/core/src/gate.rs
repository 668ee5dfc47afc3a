//! The eight-pulse Toffoli sequence, its fidelity and the (T, E) search.
//!
//! Pulse 1 rotates the target by π/2 about y, pulses 2–4 map |1⟩ → |r⟩ on all
//! three qubits, the atoms interact for T at field E, pulses 5–7 map |r⟩ back
//! to |1⟩ and pulse 8 undoes the target rotation. Each of the eight
//! computational configurations picks up a single complex amplitude from the
//! interaction stage, so the whole gate is `R_y(−π/2)·diag(A)·R_y(π/2)` on
//! the target. Amplitude that ends anywhere but in the initially excited
//! collective state is lost.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atom::RydbergState;
use crate::collective::{build_basis, BasisParams, CollectiveState};
use crate::dynamics::{propagate, unit_vector};
use crate::error::{Error, Result};
use crate::interaction::{Geometry, HamiltonianTemplate};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::physics::Physics;
use crate::units::TWO_PI;

/// Net phase per atom of the |1⟩ → |r⟩ → |1⟩ round trip (π pulse, then −π).
pub const RYDBERG_ROUND_TRIP_PHASE: f64 = 0.0;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Field pulse applied while the atoms are excited and de-excited.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExcitationStage {
    /// V/cm.
    pub field: f64,
    /// µs, before and again after the interaction window.
    pub tau_us: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GateParameters {
    pub r_um: f64,
    pub t_us: f64,
    pub field: f64,
    pub excitation: Option<ExcitationStage>,
    /// Qubit receiving pulses 1 and 8.
    pub target: usize,
    /// Explicit trap positions; equidistant at `r_um` when absent.
    pub positions: Option<[f64; 3]>,
}

impl GateParameters {
    pub fn new(r_um: f64, t_us: f64, field: f64) -> Self {
        GateParameters { r_um, t_us, field, excitation: None, target: 1, positions: None }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.r_um > 0.0) {
            return bad(format!("R must be positive, got {}", self.r_um));
        }
        if !(self.t_us > 0.0) {
            return bad(format!("T must be positive, got {}", self.t_us));
        }
        if !(self.field >= 0.0) {
            return bad(format!("E must be non-negative, got {}", self.field));
        }
        if let Some(ex) = self.excitation {
            if !(ex.tau_us >= 0.0) || !(ex.field >= 0.0) {
                return bad(format!("excitation stage needs E0 ≥ 0 and τ ≥ 0, got {ex:?}"));
            }
        }
        if self.target > 2 {
            return bad(format!("target qubit must be 0, 1 or 2, got {}", self.target));
        }
        self.geometry().map(|_| ())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match self.positions {
            Some(p) => Geometry::new(p),
            None => Geometry::equidistant(self.r_um),
        }
    }
}

/// How the Rydberg part of the sequence is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageMode {
    /// Full open-system dynamics.
    Physical,
    /// No Rydberg excitation at all: every amplitude is 1.
    Disabled,
    /// Exact CCZ: −1 for |111⟩, 1 otherwise.
    IdealCcz,
}

/// One qubit's input state from the six-state set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SingleQubitState {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl SingleQubitState {
    pub const ALL: [SingleQubitState; 6] = [
        SingleQubitState::Zero,
        SingleQubitState::One,
        SingleQubitState::Plus,
        SingleQubitState::Minus,
        SingleQubitState::PlusI,
        SingleQubitState::MinusI,
    ];

    pub fn amplitudes(&self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            SingleQubitState::Zero => [C1, C0],
            SingleQubitState::One => [C0, C1],
            SingleQubitState::Plus => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            SingleQubitState::Minus => [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
            SingleQubitState::PlusI => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            SingleQubitState::MinusI => [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SingleQubitState::Zero => "0",
            SingleQubitState::One => "1",
            SingleQubitState::Plus => "+",
            SingleQubitState::Minus => "-",
            SingleQubitState::PlusI => "+i",
            SingleQubitState::MinusI => "-i",
        }
    }
}

/// Product input state of the three qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QubitInputState {
    pub qubits: [SingleQubitState; 3],
}

impl QubitInputState {
    /// All 6³ = 216 inputs, first qubit slowest.
    pub fn all() -> Vec<QubitInputState> {
        let mut out = Vec::with_capacity(216);
        for a in SingleQubitState::ALL {
            for b in SingleQubitState::ALL {
                for c in SingleQubitState::ALL {
                    out.push(QubitInputState { qubits: [a, b, c] });
                }
            }
        }
        out
    }

    /// The eight computational basis inputs.
    pub fn computational() -> Vec<QubitInputState> {
        (0..8).map(QubitInputState::basis).collect()
    }

    /// `|q0 q1 q2⟩` for basis index `q0·4 + q1·2 + q2`.
    pub fn basis(index: usize) -> QubitInputState {
        let bit = |k: usize| if (index >> (2 - k)) & 1 == 1 { SingleQubitState::One } else { SingleQubitState::Zero };
        QubitInputState { qubits: [bit(0), bit(1), bit(2)] }
    }

    pub fn vector(&self) -> DVector<Complex64> {
        let [a, b, c] = self.qubits.map(|q| q.amplitudes());
        DVector::from_fn(8, |i, _| a[(i >> 2) & 1] * b[(i >> 1) & 1] * c[i & 1])
    }
}

impl fmt::Display for QubitInputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.qubits[0].label(), self.qubits[1].label(), self.qubits[2].label())
    }
}

/// Rotation about y by `theta` in the convention where pulse 1 (θ = π/2),
/// a Z on the target, and pulse 8 (θ = −π/2) compose to X:
/// `[[cos θ/2, sin θ/2], [−sin θ/2, cos θ/2]]`.
pub fn y_rotation(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [[Complex64::new(c, 0.0), Complex64::new(s, 0.0)], [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)]]
}

/// Embeds a one-qubit operator acting on `qubit` into the 8-dim space.
pub fn on_qubit(op: [[Complex64; 2]; 2], qubit: usize) -> DMatrix<Complex64> {
    let shift = 2 - qubit;
    DMatrix::from_fn(8, 8, |r, c| {
        if (r & !(1 << shift)) != (c & !(1 << shift)) {
            return C0;
        }
        op[(r >> shift) & 1][(c >> shift) & 1]
    })
}

/// Toffoli with the given target; the other two qubits are controls.
pub fn ideal_toffoli_matrix(target: usize) -> DMatrix<Complex64> {
    let shift = 2 - target;
    let controls: usize = 0b111 & !(1 << shift);
    DMatrix::from_fn(8, 8, |r, c| {
        let image = if c & controls == controls { c ^ (1 << shift) } else { c };
        if r == image {
            C1
        } else {
            C0
        }
    })
}

pub fn ideal_toffoli(input: &DVector<Complex64>, target: usize) -> DVector<Complex64> {
    ideal_toffoli_matrix(target) * input
}

/// `R_y(−π/2)_t · diag(A) · R_y(π/2)_t`.
pub fn gate_matrix(amplitudes: &[Complex64; 8], target: usize) -> DMatrix<Complex64> {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(amplitudes));
    let half = std::f64::consts::FRAC_PI_2;
    on_qubit(y_rotation(-half), target) * d * on_qubit(y_rotation(half), target)
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues()
}

fn check_psd(m: &DMatrix<Complex64>) -> Result<DVector<f64>> {
    let ev = hermitian_eigenvalues(m);
    let scale = ev.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    Ok(ev)
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `Tr √(√σ ρ √σ)` of two positive semidefinite operators.
pub fn uhlmann_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> Result<f64> {
    check_psd(rho)?;
    check_psd(sigma)?;
    let s = psd_sqrt(sigma);
    let inner = &s * rho * &s;
    Ok(check_psd(&inner)?.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Fidelity against a pure etalon: `√⟨ψ|ρ|ψ⟩`.
pub fn state_fidelity(rho: &DMatrix<Complex64>, etalon: &DVector<Complex64>) -> Result<f64> {
    check_psd(rho)?;
    let overlap = (etalon.adjoint() * rho * etalon)[(0, 0)].re;
    Ok(overlap.max(0.0).sqrt().min(1.0))
}

pub fn pure_density(psi: &DVector<Complex64>) -> DMatrix<Complex64> {
    psi * psi.adjoint()
}

fn geometry_key(g: &Geometry) -> [u64; 3] {
    g.positions().map(f64::to_bits)
}

/// Which sites are Rydberg for computational basis index `p`.
pub fn rydberg_pattern(p: usize) -> [bool; 3] {
    [(p >> 2) & 1 == 1, (p >> 1) & 1 == 1, p & 1 == 1]
}

/// Hamiltonian templates for the seven non-empty excitation patterns.
#[derive(Debug)]
pub struct PatternTemplates {
    templates: Vec<Option<HamiltonianTemplate>>,
}

impl PatternTemplates {
    pub fn basis_sizes(&self) -> [usize; 8] {
        let mut out = [0; 8];
        for (k, t) in self.templates.iter().enumerate() {
            out[k] = t.as_ref().map_or(0, |t| t.basis().len());
        }
        out
    }

    pub fn template(&self, pattern: usize) -> Option<&HamiltonianTemplate> {
        self.templates[pattern].as_ref()
    }
}

/// Physics shared by every gate evaluation, with per-geometry templates cached.
#[derive(Debug)]
pub struct GateModel {
    pub phys: Arc<Physics>,
    pub rydberg: RydbergState,
    pub basis: BasisParams,
    pub decay: bool,
    cache: Mutex<HashMap<[u64; 3], Arc<PatternTemplates>>>,
}

impl GateModel {
    pub fn new(phys: Arc<Physics>, rydberg: RydbergState, basis: BasisParams, decay: bool) -> Self {
        GateModel { phys, rydberg, basis, decay, cache: Mutex::new(HashMap::new()) }
    }

    /// `70P3/2(m_j = 1/2)` with the default basis rule and decay on.
    pub fn rubidium_default(phys: Arc<Physics>) -> Self {
        let r = RydbergState::new(70, 1, 3, 1).expect("valid state");
        GateModel::new(phys, r, BasisParams::default(), true)
    }

    pub fn templates(&self, geometry: &Geometry) -> Result<Arc<PatternTemplates>> {
        let key = geometry_key(geometry);
        if let Some(t) = self.cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let templates = (0..8)
            .map(|p| {
                if p == 0 {
                    return Ok(None);
                }
                let init = CollectiveState::pattern(self.rydberg, rydberg_pattern(p));
                let basis = Arc::new(build_basis(&self.phys, init, self.basis)?);
                HamiltonianTemplate::new(&self.phys, basis, *geometry, self.decay).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        let t = Arc::new(PatternTemplates { templates });
        self.cache.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }

    /// Return amplitude of basis state 0 for one pattern, in the frame
    /// rotating with its own diagonal energy.
    fn pattern_amplitude(&self, tpl: &HamiltonianTemplate, params: &GateParameters) -> Result<Complex64> {
        let mut psi = unit_vector(tpl.basis().len(), 0);
        let mut frame = 0.0;
        let mut stage = |field: f64, t: f64, psi: &mut ndarray::Array1<Complex64>| -> Result<()> {
            if t == 0.0 {
                return Ok(());
            }
            let h = tpl.at_field(field)?;
            *psi = propagate(&h, psi, t)?;
            frame += TWO_PI * h.matrix[[0, 0]].re * t;
            Ok(())
        };
        if let Some(ex) = params.excitation {
            stage(ex.field, ex.tau_us, &mut psi)?;
        }
        stage(params.field, params.t_us, &mut psi)?;
        if let Some(ex) = params.excitation {
            stage(ex.field, ex.tau_us, &mut psi)?;
        }
        let k = tpl.basis().initial().rydberg_count() as f64;
        Ok(psi[0] * Complex64::from_polar(1.0, frame + k * RYDBERG_ROUND_TRIP_PHASE))
    }

    /// Interaction-stage amplitude `A_p` for each computational basis index.
    pub fn amplitudes(&self, params: &GateParameters, mode: StageMode) -> Result<[Complex64; 8]> {
        params.validate()?;
        let mut out = [C1; 8];
        match mode {
            StageMode::Disabled => {}
            StageMode::IdealCcz => out[7] = -C1,
            StageMode::Physical => {
                let templates = self.templates(&params.geometry()?)?;
                let values = (1..8)
                    .into_par_iter()
                    .map(|p| self.pattern_amplitude(templates.template(p).expect("non-empty pattern"), params))
                    .collect::<Result<Vec<_>>>()?;
                out[1..].copy_from_slice(&values);
            }
        }
        Ok(out)
    }

    /// Output operator (unnormalised, on the computational subspace) for one input.
    pub fn simulate_gate(&self, params: &GateParameters, input: &QubitInputState, mode: StageMode) -> Result<DMatrix<Complex64>> {
        let g = gate_matrix(&self.amplitudes(params, mode)?, params.target);
        Ok(pure_density(&(g * input.vector())))
    }

    /// Fidelity of every input in `inputs` against the ideal Toffoli.
    pub fn evaluate(&self, params: &GateParameters, mode: StageMode, inputs: &[QubitInputState]) -> Result<GateResult> {
        let amplitudes = self.amplitudes(params, mode)?;
        let g = gate_matrix(&amplitudes, params.target);
        let toffoli = ideal_toffoli_matrix(params.target);
        let per_input = inputs
            .par_iter()
            .map(|input| {
                let psi = input.vector();
                let out = &g * &psi;
                let rho = pure_density(&out);
                let fidelity = state_fidelity(&rho, &(&toffoli * &psi))?;
                let leakage = (1.0 - out.norm_squared()).max(0.0);
                Ok(InputFidelity { input: *input, fidelity, leakage })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = per_input.iter().map(|r| r.fidelity).sum::<f64>() / per_input.len().max(1) as f64;
        let min = per_input.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
        let basis_sizes = match mode {
            StageMode::Physical => self.templates(&params.geometry()?)?.basis_sizes(),
            _ => [0; 8],
        };
        Ok(GateResult {
            per_input,
            mean,
            min,
            params: *params,
            amplitudes,
            provenance: Provenance {
                species: self.phys.species.species.clone(),
                species_version: self.phys.species.version.clone(),
                species_checksum: self.phys.species.checksum.clone(),
                temperature_k: self.phys.temperature_k(),
                decay: self.decay,
                basis_rule: self.basis,
                basis_sizes,
            },
        })
    }

    /// Mean fidelity over all 216 product inputs.
    pub fn average_fidelity(&self, params: &GateParameters, mode: StageMode) -> Result<GateResult> {
        self.evaluate(params, mode, &QubitInputState::all())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputFidelity {
    pub input: QubitInputState,
    pub fidelity: f64,
    /// `1 − ‖out‖²`: amplitude that left the computational subspace.
    pub leakage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub species: String,
    pub species_version: String,
    pub species_checksum: String,
    pub temperature_k: f64,
    pub decay: bool,
    pub basis_rule: BasisParams,
    /// Collective basis size per excitation pattern (index as computational state).
    pub basis_sizes: [usize; 8],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateResult {
    pub per_input: Vec<InputFidelity>,
    pub mean: f64,
    pub min: f64,
    pub params: GateParameters,
    pub amplitudes: [Complex64; 8],
    pub provenance: Provenance,
}

impl GateResult {
    /// One CSV record per input, then a `#`-prefixed summary block.
    pub fn write_report<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "input,fidelity,leakage")?;
        for r in &self.per_input {
            writeln!(out, "\"{}\",{:.17e},{:.17e}", r.input, r.fidelity, r.leakage)?;
        }
        let p = &self.params;
        let pv = &self.provenance;
        writeln!(out, "# mean_fidelity = {:.17e}", self.mean)?;
        writeln!(out, "# min_fidelity = {:.17e}", self.min)?;
        writeln!(out, "# R_um = {}", p.r_um)?;
        writeln!(out, "# T_us = {}", p.t_us)?;
        writeln!(out, "# E_Vcm = {}", p.field)?;
        writeln!(out, "# target = {}", p.target)?;
        if let Some(ex) = p.excitation {
            writeln!(out, "# excitation E0_Vcm = {} tau_us = {}", ex.field, ex.tau_us)?;
        }
        for (k, a) in self.amplitudes.iter().enumerate() {
            writeln!(out, "# amplitude[{k:03b}] = {:.12e} {:+.12e}i (|A|^2 = {:.9}, arg = {:.9})", a.re, a.im, a.norm_sqr(), a.arg())?;
        }
        writeln!(out, "# species = {} {} sha256 = {}", pv.species, pv.species_version, pv.species_checksum)?;
        writeln!(out, "# temperature_K = {} decay = {}", pv.temperature_k, pv.decay)?;
        writeln!(
            out,
            "# basis hops = {} defect_cutoff_ghz = {} n_window = {} l_max = {} sizes = {:?}",
            pv.basis_rule.hops, pv.basis_rule.defect_cutoff_ghz, pv.basis_rule.window.n_window, pv.basis_rule.window.l_max, pv.basis_sizes
        )
    }
}

/// Search box for (T, E).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GateBounds {
    pub t_us: (f64, f64),
    pub field: (f64, f64),
    /// Used only by the extended search over the excitation stage.
    pub excitation_field: (f64, f64),
    pub tau_us: (f64, f64),
}

impl GateBounds {
    pub fn new(t_us: (f64, f64), field: (f64, f64)) -> Self {
        GateBounds { t_us, field, excitation_field: (0.0, crate::stark::MAX_FIELD_V_CM), tau_us: (0.0, 0.1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizeConfig {
    /// Evaluation budget per simplex pass.
    pub max_evals: usize,
    /// Initial simplex edges relative to the start values of T and E.
    pub t_step: f64,
    pub field_step: f64,
    /// Coarse passes; each restarts from the best point with edges shrunk by `shrink`.
    pub coarse_passes: usize,
    pub shrink: f64,
    /// Convergence threshold on the simplex, in units of the initial edges.
    pub xatol: f64,
    pub fatol: f64,
    /// Relative start jitter drawn from this seed, if given.
    pub seed: Option<u64>,
    pub jitter: f64,
    /// Also search E₀ and τ of the excitation stage (start must carry one).
    pub include_excitation: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_evals: 120,
            t_step: 0.05,
            field_step: 0.05,
            coarse_passes: 3,
            shrink: 0.2,
            xatol: 1e-2,
            fatol: 1e-6,
            seed: None,
            jitter: 0.01,
            include_excitation: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationReport {
    pub params: GateParameters,
    pub result: GateResult,
    pub coarse_evals: usize,
    pub fine_evals: usize,
    pub converged: bool,
    pub simplex_diameter: f64,
}

impl OptimizationReport {
    pub fn evals(&self) -> usize {
        self.coarse_evals + self.fine_evals
    }
}

/// Two-stage Nelder–Mead over (T, E) at fixed R: restarted passes with
/// shrinking simplices on the eight computational inputs, then a final pass
/// scored on all 216.
pub fn optimize(model: &GateModel, start: &GateParameters, bounds: &GateBounds, config: &OptimizeConfig) -> Result<OptimizationReport> {
    start.validate()?;
    let inside = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
    if !(inside(start.t_us, bounds.t_us) && inside(start.field, bounds.field)) {
        return Err(Error::InvalidParameter(format!("start (T={}, E={}) lies outside the bounds {bounds:?}", start.t_us, start.field)));
    }
    let mut x0 = vec![start.t_us, start.field];
    let mut step = vec![config.t_step * start.t_us, config.field_step * start.field.max(1e-3)];
    let mut lower = vec![bounds.t_us.0, bounds.field.0];
    let mut upper = vec![bounds.t_us.1, bounds.field.1];
    if config.include_excitation {
        let ex = start.excitation.ok_or_else(|| Error::InvalidParameter("extended search needs a start with an excitation stage".into()))?;
        if !(inside(ex.field, bounds.excitation_field) && inside(ex.tau_us, bounds.tau_us)) {
            return Err(Error::InvalidParameter(format!("excitation start {ex:?} lies outside the bounds {bounds:?}")));
        }
        x0.extend([ex.field, ex.tau_us]);
        step.extend([config.field_step * ex.field.max(0.05), 0.25 * ex.tau_us.max(0.01)]);
        lower.extend([bounds.excitation_field.0, bounds.tau_us.0]);
        upper.extend([bounds.excitation_field.1, bounds.tau_us.1]);
    }
    if let Some(seed) = config.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..x0.len() {
            x0[k] = (x0[k] * (1.0 + config.jitter * rng.gen_range(-1.0..=1.0))).clamp(lower[k], upper[k]);
        }
    }
    let with = |x: &[f64]| {
        let mut p = GateParameters { t_us: x[0], field: x[1], ..*start };
        if x.len() == 4 {
            p.excitation = Some(ExcitationStage { field: x[2], tau_us: x[3] });
        }
        p
    };
    let objective = |inputs: &[QubitInputState], x: &[f64]| match model.evaluate(&with(x), StageMode::Physical, inputs) {
        Ok(r) => 1.0 - r.mean,
        Err(_) => f64::INFINITY,
    };
    let mut opts = NelderMeadOptions { step, lower, upper, xatol: config.xatol, fatol: config.fatol, max_evals: config.max_evals };
    let basis_inputs = QubitInputState::computational();
    let mut x = x0;
    let mut coarse_evals = 0;
    let mut converged = true;
    for _ in 0..config.coarse_passes.max(1) {
        let pass = nelder_mead(|x: &[f64]| objective(&basis_inputs, x), &x, &opts);
        coarse_evals += pass.evals;
        converged &= pass.converged;
        x = pass.x;
        opts.step.iter_mut().for_each(|s| *s *= config.shrink);
    }
    let all = QubitInputState::all();
    let fine = nelder_mead(|x: &[f64]| objective(&all, x), &x, &opts);
    let params = with(&fine.x);
    let result = model.average_fidelity(&params, StageMode::Physical)?;
    Ok(OptimizationReport {
        params,
        result,
        coarse_evals,
        fine_evals: fine.evals,
        converged: converged && fine.converged,
        simplex_diameter: fine.simplex_diameter,
    })
}

/// Smallest field offsets below and above `params.field` at which the mean
/// fidelity has dropped by `loss`, searched out to `max_offset`.
pub fn field_mismatch_for_loss(model: &GateModel, params: &GateParameters, loss: f64, max_offset: f64) -> Result<(Option<f64>, Option<f64>)> {
    let mean_at = |field: f64| -> Result<f64> {
        Ok(model.average_fidelity(&GateParameters { field, ..*params }, StageMode::Physical)?.mean)
    };
    let goal = mean_at(params.field)? - loss;
    let side = |sign: f64| -> Result<Option<f64>> {
        let mut lo = 0.0;
        let mut hi = max_offset / 64.0;
        loop {
            if mean_at(params.field + sign * hi)? <= goal {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > max_offset * (1.0 + 1e-12) {
                return Ok(None);
            }
        }
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if mean_at(params.field + sign * mid)? <= goal {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-3 * hi {
                break;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    };
    Ok((side(-1.0)?, side(1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn toffoli_truth_table() {
        let m = ideal_toffoli_matrix(2);
        let basis = |k: usize| QubitInputState::basis(k).vector();
        assert_eq!(&m * basis(0b110), basis(0b111));
        assert_eq!(&m * basis(0b100), basis(0b100));
        assert_eq!(&m * basis(0b111), basis(0b110));
        let mid = ideal_toffoli_matrix(1);
        assert_eq!(&mid * basis(0b101), basis(0b111));
        assert_eq!(&mid * basis(0b110), basis(0b110));
        assert_eq!(ideal_toffoli(&basis(0b011), 1), basis(0b011));
    }

    #[test]
    fn hadamard_sandwich() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = [[Complex64::new(s, 0.0), Complex64::new(s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]];
        let mut ccz = DMatrix::identity(8, 8);
        ccz[(7, 7)] = -C1;
        for t in 0..3 {
            let hs = on_qubit(h, t);
            assert!(max_diff(&(&hs * &ccz * &hs), &ideal_toffoli_matrix(t)) < 1e-14);
            let mut a = [C1; 8];
            a[7] = -C1;
            assert!(max_diff(&gate_matrix(&a, t), &ideal_toffoli_matrix(t)) < 1e-14);
        }
    }

    #[test]
    fn input_states() {
        let all = QubitInputState::all();
        assert_eq!(all.len(), 216);
        for s in &all {
            assert!((s.vector().norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(QubitInputState::basis(0b110).to_string(), "1,1,0");
        assert_eq!(QubitInputState::basis(0b110).vector()[6], C1);
    }

    #[test]
    fn fidelity_reductions() {
        let psi = QubitInputState { qubits: [SingleQubitState::Plus, SingleQubitState::One, SingleQubitState::MinusI] }.vector();
        let rho = pure_density(&psi);
        assert!((state_fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-12);
        let perp = QubitInputState { qubits: [SingleQubitState::Minus, SingleQubitState::One, SingleQubitState::MinusI] }.vector();
        assert!(state_fidelity(&pure_density(&perp), &psi).unwrap() < 1e-7);
        let lossy = &rho * Complex64::new(0.81, 0.0);
        assert!((state_fidelity(&lossy, &psi).unwrap() - 0.9).abs() < 1e-12);
        for r in [&rho, &lossy, &pure_density(&perp)] {
            let a = state_fidelity(r, &psi).unwrap();
            let b = uhlmann_fidelity(r, &pure_density(&psi)).unwrap();
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
        let mut bad = rho.clone();
        bad[(0, 0)] -= Complex64::new(1.0, 0.0);
        assert!(matches!(state_fidelity(&bad, &psi), Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn uhlmann_mixed_states() {
        let mut rho = DMatrix::zeros(8, 8);
        let mut sigma = DMatrix::zeros(8, 8);
        for k in 0..8 {
            rho[(k, k)] = Complex64::new(0.125, 0.0);
            sigma[(k, k)] = Complex64::new(if k < 2 { 0.5 } else { 0.0 }, 0.0);
        }
        // F(I/8, diag(1/2, 1/2, 0...)) = Σ √(1/16) over two entries
        assert!((uhlmann_fidelity(&rho, &sigma).unwrap() - 0.5).abs() < 1e-12);
        assert!((uhlmann_fidelity(&sigma, &rho).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_convention() {
        let r = y_rotation(std::f64::consts::FRAC_PI_2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0][1].re - s).abs() < 1e-15 && (r[1][0].re + s).abs() < 1e-15);
        let back = y_rotation(-std::f64::consts::FRAC_PI_2);
        let id = on_qubit(back, 1) * on_qubit(r, 1);
        assert!(max_diff(&id, &DMatrix::identity(8, 8)) < 1e-15);
    }

    #[test]
    fn parameter_validation() {
        assert!(GateParameters::new(10.0, 1.0, 0.14).validate().is_ok());
        assert!(GateParameters::new(0.0, 1.0, 0.14).validate().is_err());
        assert!(GateParameters::new(10.0, 0.0, 0.14).validate().is_err());
        assert!(GateParameters::new(10.0, 1.0, -0.1).validate().is_err());
        let mut p = GateParameters::new(10.0, 1.0, 0.14);
        p.excitation = Some(ExcitationStage { field: 0.2, tau_us: -1.0 });
        assert!(p.validate().is_err());
        p.excitation = None;
        p.target = 3;
        assert!(p.validate().is_err());
    }
}
