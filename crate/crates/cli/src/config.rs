//! Run configuration: one TOML file per figure, overridable from the command line.

use std::path::{Path, PathBuf};

use rydberg_core::gate::{ExcitationStage, GateBounds, GateParameters, OptimizeConfig};
use rydberg_core::stark::PerturberWindow;
use rydberg_core::{BasisParams, CollectiveState, Geometry, RydbergState};
use serde::{Deserialize, Serialize};

/// A configuration problem, with the offending line of the file when known.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Explicit values; overrides min/max/points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Grid {
    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Grid { min, max, points, values: None }
    }

    pub fn values(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::linear(0.0, 0.2, 201)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub r_um: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<[f64; 3]>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { r_um: 10.0, positions: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub hops: u32,
    pub defect_cutoff_ghz: f64,
    pub n_window: u32,
    pub l_max: u32,
}

impl Default for BasisConfig {
    fn default() -> Self {
        let b = BasisParams::default();
        BasisConfig { hops: b.hops, defect_cutoff_ghz: b.defect_cutoff_ghz, n_window: b.window.n_window, l_max: b.window.l_max }
    }
}

impl BasisConfig {
    pub fn params(&self) -> BasisParams {
        BasisParams {
            hops: self.hops,
            defect_cutoff_ghz: self.defect_cutoff_ghz,
            window: PerturberWindow { n_window: self.n_window, l_max: self.l_max },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Gate Rydberg state, also the single-atom state of the initial channel.
    pub rydberg: String,
    pub initial: String,
    #[serde(rename = "final")]
    pub final_: String,
    /// Level counted by ρ, e.g. "71S1/2".
    pub target_level: String,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            rydberg: "70P3/2(1/2)".into(),
            initial: "70P3/2(1/2);70P3/2(1/2);70P3/2(1/2)".into(),
            final_: "70S1/2(1/2);71S1/2(1/2);70P1/2(1/2)".into(),
            target_level: "71S1/2".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarkMapConfig {
    pub fields: Grid,
    /// Collective states to trace; the four initial configurations plus the
    /// final state when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    /// Grid step for locating crossings with the final state, V/cm.
    pub crossing_step: f64,
}

impl Default for StarkMapConfig {
    fn default() -> Self {
        StarkMapConfig { fields: Grid::linear(0.0, 0.2, 201), states: None, crossing_step: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub fields: Grid,
    pub t_us: f64,
    /// Feature threshold relative to the highest ρ.
    pub rel_threshold: f64,
    /// Fringes closer than this merge into one feature, V/cm.
    pub merge_gap: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { fields: Grid::linear(0.10, 0.20, 200), t_us: 1.15, rel_threshold: 0.3, merge_gap: 0.002 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub steps: usize,
    /// Excitation patterns, "r" for Rydberg and "g" for ground per site.
    pub configurations: Vec<String>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { steps: 200, configurations: ["rrr", "rgr", "grr", "rrg"].map(String::from).to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub t_us: f64,
    pub field: f64,
    pub target: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationStage>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { t_us: 1.17194, field: 0.14059453, target: 1, excitation: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    pub fields: Grid,
    /// Also search the field offsets costing `loss` in mean fidelity.
    pub sensitivity: bool,
    pub loss: f64,
    pub max_offset: f64,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig { fields: Grid::linear(0.1400, 0.1412, 25), sensitivity: false, loss: 0.01, max_offset: 5e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub t_bounds: [f64; 2],
    pub field_bounds: [f64; 2],
    pub max_evals: usize,
    pub t_step: f64,
    pub field_step: f64,
    pub coarse_passes: usize,
    pub shrink: f64,
    pub xatol: f64,
    pub fatol: f64,
    pub jitter: f64,
    /// Extend the search to E₀ and τ; needs `[gate.excitation]`.
    pub include_excitation: bool,
    pub excitation_field_bounds: [f64; 2],
    pub tau_bounds: [f64; 2],
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let d = OptimizeConfig::default();
        OptimizeSection {
            t_bounds: [0.2, 2.0],
            field_bounds: [0.10, 0.20],
            max_evals: d.max_evals,
            t_step: d.t_step,
            field_step: d.field_step,
            coarse_passes: d.coarse_passes,
            shrink: d.shrink,
            xatol: d.xatol,
            fatol: d.fatol,
            jitter: d.jitter,
            include_excitation: false,
            excitation_field_bounds: [0.0, rydberg_core::stark::MAX_FIELD_V_CM],
            tau_bounds: [0.0, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Species data file; the bundled Rb table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species: Option<PathBuf>,
    pub temperature_k: f64,
    pub decay: bool,
    /// Integrator self-consistency tolerance.
    pub tolerance: f64,
    pub out: PathBuf,
    /// Also write a gnuplot script next to each plottable CSV.
    pub gnuplot: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub geometry: GeometryConfig,
    pub basis: BasisConfig,
    pub channel: ChannelConfig,
    pub stark_map: StarkMapConfig,
    pub resonance_scan: ScanConfig,
    pub dynamics: DynamicsConfig,
    pub gate: GateConfig,
    pub fidelity: FidelityConfig,
    pub optimize: OptimizeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            species: None,
            temperature_k: 300.0,
            decay: true,
            tolerance: 1e-8,
            out: PathBuf::from("out"),
            gnuplot: false,
            seed: None,
            geometry: GeometryConfig::default(),
            basis: BasisConfig::default(),
            channel: ChannelConfig::default(),
            stark_map: StarkMapConfig::default(),
            resonance_scan: ScanConfig::default(),
            dynamics: DynamicsConfig::default(),
            gate: GateConfig::default(),
            fidelity: FidelityConfig::default(),
            optimize: OptimizeSection::default(),
        }
    }
}

/// Line (1-based) where `key` is assigned inside `[table]` (or at top level).
fn locate(source: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_end_matches(']').trim().to_string();
            continue;
        }
        let name = line.split('=').next().unwrap_or("").trim();
        if current == table && name == key && line.contains('=') {
            return Some(k + 1);
        }
        if table.starts_with(&format!("{current}.")) && !current.is_empty() {
            let sub = &table[current.len() + 1..];
            if name == sub || name.starts_with(&format!("{sub}.")) {
                return Some(k + 1);
            }
        }
    }
    None
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| source[..s.start].matches('\n').count() + 1);
            ConfigError { message: e.message().trim().to_string(), line }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { message: format!("cannot read config {}: {e}", path.display()), line: None })?;
        let cfg = RunConfig::parse(&source).map_err(|e| ConfigError { message: format!("{}: {}", path.display(), e.message), ..e })?;
        Ok((cfg, source))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Semantic checks for what `command` needs; `source` locates errors.
    pub fn validate(&self, command: &str, source: &str) -> Result<(), ConfigError> {
        let err = |table: &str, key: &str, message: String| ConfigError {
            message: format!("{}{key}: {message}", if table.is_empty() { String::new() } else { format!("{table}.") }),
            line: locate(source, table, key),
        };
        if let Some(p) = &self.species {
            if !p.is_file() {
                return Err(err("", "species", format!("file {} does not exist", p.display())));
            }
        }
        if !(self.temperature_k > 0.0) {
            return Err(err("", "temperature_k", "must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(err("", "tolerance", "must be positive".into()));
        }
        self.geometry().map_err(|e| err("geometry", if self.geometry.positions.is_some() { "positions" } else { "r_um" }, e.to_string()))?;
        if !(self.basis.defect_cutoff_ghz > 0.0) {
            return Err(err("basis", "defect_cutoff_ghz", "must be positive".into()));
        }
        self.rydberg().map_err(|m| err("channel", "rydberg", m))?;
        let check_grid = |table: &str, g: &Grid| -> Result<(), ConfigError> {
            let v = g.values();
            let key = if g.values.is_some() { "values" } else { "points" };
            if v.is_empty() {
                return Err(err(table, key, "field grid is empty".into()));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(err(table, if g.values.is_some() { "values" } else { "max" }, "field grid must be strictly increasing".into()));
            }
            if v.iter().any(|f| !(0.0..=rydberg_core::stark::MAX_FIELD_V_CM).contains(f)) {
                return Err(err(table, if g.values.is_some() { "values" } else { "min" }, format!("fields must lie in [0, {}] V/cm", rydberg_core::stark::MAX_FIELD_V_CM)));
            }
            Ok(())
        };
        match command {
            "stark-map" => {
                check_grid("stark_map.fields", &self.stark_map.fields)?;
                self.stark_states().map_err(|m| err("stark_map", "states", m))?;
                self.final_state().map_err(|m| err("channel", "final", m))?;
                if !(self.stark_map.crossing_step > 0.0) {
                    return Err(err("stark_map", "crossing_step", "must be positive".into()));
                }
            }
            "resonance-scan" => {
                check_grid("resonance_scan.fields", &self.resonance_scan.fields)?;
                self.initial_state().map_err(|m| err("channel", "initial", m))?;
                self.target_level().map_err(|m| err("channel", "target_level", m))?;
                if !(self.resonance_scan.t_us > 0.0) {
                    return Err(err("resonance_scan", "t_us", "must be positive".into()));
                }
            }
            "dynamics" => {
                if self.dynamics.steps == 0 {
                    return Err(err("dynamics", "steps", "must be at least 1".into()));
                }
                if self.dynamics.configurations.is_empty() {
                    return Err(err("dynamics", "configurations", "list is empty".into()));
                }
                for c in &self.dynamics.configurations {
                    parse_pattern(c).map_err(|m| err("dynamics", "configurations", m))?;
                }
                self.target_level().map_err(|m| err("channel", "target_level", m))?;
                self.gate_parameters().validate().map_err(|e| err("gate", "t_us", e.to_string()))?;
            }
            "fidelity" | "optimize" => {
                self.gate_parameters().validate().map_err(|e| err("gate", "t_us", e.to_string()))?;
                if command == "fidelity" {
                    check_grid("fidelity.fields", &self.fidelity.fields)?;
                    if !(self.fidelity.loss > 0.0 && self.fidelity.loss < 1.0) {
                        return Err(err("fidelity", "loss", "must lie in (0, 1)".into()));
                    }
                } else {
                    let o = &self.optimize;
                    if !(o.t_bounds[0] > 0.0 && o.t_bounds[1] > o.t_bounds[0]) {
                        return Err(err("optimize", "t_bounds", "need 0 < lower < upper".into()));
                    }
                    if !(o.field_bounds[0] >= 0.0 && o.field_bounds[1] > o.field_bounds[0]) {
                        return Err(err("optimize", "field_bounds", "need 0 ≤ lower < upper".into()));
                    }
                    if o.include_excitation && self.gate.excitation.is_none() {
                        return Err(err("optimize", "include_excitation", "needs a [gate.excitation] start".into()));
                    }
                    if o.max_evals == 0 {
                        return Err(err("optimize", "max_evals", "must be at least 1".into()));
                    }
                }
            }
            "dump-matrix-elements" | "dump-hamiltonian" => {
                self.initial_state().map_err(|m| err("channel", "initial", m))?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn geometry(&self) -> rydberg_core::Result<Geometry> {
        match self.geometry.positions {
            Some(p) => Geometry::new(p),
            None => Geometry::equidistant(self.geometry.r_um),
        }
    }

    pub fn rydberg(&self) -> Result<RydbergState, String> {
        self.channel.rydberg.parse::<RydbergState>().map_err(|e| e.to_string())
    }

    pub fn initial_state(&self) -> Result<CollectiveState, String> {
        self.channel.initial.parse::<CollectiveState>().map_err(|e| e.to_string())
    }

    pub fn final_state(&self) -> Result<CollectiveState, String> {
        self.channel.final_.parse::<CollectiveState>().map_err(|e| e.to_string())
    }

    /// `(n, l, 2j)` of the level counted by ρ.
    pub fn target_level(&self) -> Result<(u32, u32, u32), String> {
        let s = format!("{}(1/2)", self.channel.target_level);
        let st = s.parse::<RydbergState>().map_err(|e| format!("{}: {e}", self.channel.target_level))?;
        Ok((st.n, st.l, st.j2))
    }

    pub fn stark_states(&self) -> Result<Vec<CollectiveState>, String> {
        match &self.stark_map.states {
            None => {
                let r = self.rydberg()?;
                let mut s = rydberg_core::collective::initial_configurations(r.n).map_err(|e| e.to_string())?;
                s.push(self.final_state()?);
                Ok(s)
            }
            Some(list) if list.is_empty() => Err("list is empty".into()),
            Some(list) => list.iter().map(|s| s.parse::<CollectiveState>().map_err(|e| format!("{s}: {e}"))).collect(),
        }
    }

    pub fn gate_parameters(&self) -> GateParameters {
        GateParameters {
            r_um: self.geometry.r_um,
            t_us: self.gate.t_us,
            field: self.gate.field,
            excitation: self.gate.excitation,
            target: self.gate.target,
            positions: self.geometry.positions,
        }
    }

    pub fn gate_bounds(&self) -> GateBounds {
        let o = &self.optimize;
        GateBounds {
            t_us: (o.t_bounds[0], o.t_bounds[1]),
            field: (o.field_bounds[0], o.field_bounds[1]),
            excitation_field: (o.excitation_field_bounds[0], o.excitation_field_bounds[1]),
            tau_us: (o.tau_bounds[0], o.tau_bounds[1]),
        }
    }

    pub fn optimize_config(&self) -> OptimizeConfig {
        let o = &self.optimize;
        OptimizeConfig {
            max_evals: o.max_evals,
            t_step: o.t_step,
            field_step: o.field_step,
            coarse_passes: o.coarse_passes,
            shrink: o.shrink,
            xatol: o.xatol,
            fatol: o.fatol,
            seed: self.seed,
            jitter: o.jitter,
            include_excitation: o.include_excitation,
        }
    }
}

/// "rgr" → `[true, false, true]`.
pub fn parse_pattern(s: &str) -> Result<[bool; 3], String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() != 3 {
        return Err(format!("configuration {s:?} must have three sites"));
    }
    let mut out = [false; 3];
    for (k, c) in chars.iter().enumerate() {
        out[k] = match c {
            'r' => true,
            'g' => false,
            _ => return Err(format!("configuration {s:?}: sites must be 'r' or 'g'")),
        };
    }
    if !out.iter().any(|&b| b) {
        return Err(format!("configuration {s:?} has no Rydberg atom"));
    }
    Ok(out)
}
