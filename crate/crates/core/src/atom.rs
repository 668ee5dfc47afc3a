//! Single-atom Rydberg states, quantum-defect energies and lifetimes.
//!
//! Angular momenta are stored doubled (`j2 = 2j`, `mj2 = 2m_j`) so that every
//! quantum number is an exact integer.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const ORBITAL_LETTERS: [char; 7] = ['S', 'P', 'D', 'F', 'G', 'H', 'I'];

/// The Rb data file shipped with the crate.
pub const DEFAULT_SPECIES_TOML: &str = include_str!("../data/rb87.toml");

/// A fine-structure series `(l, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Series {
    pub l: u32,
    pub j2: u32,
}

impl Series {
    pub fn new(l: u32, j2: u32) -> Self {
        Series { l, j2 }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = ORBITAL_LETTERS.get(self.l as usize).copied().unwrap_or('?');
        write!(f, "{}{}/2", letter, self.j2)
    }
}

/// Single-atom state `|n l j m_j⟩`.
///
/// Ordering is lexicographic in `(n, l, j, m_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RydbergState {
    pub n: u32,
    pub l: u32,
    pub j2: u32,
    pub mj2: i32,
}

impl RydbergState {
    /// Builds a state from doubled `j` and `m_j`, checking every constraint.
    pub fn new(n: u32, l: u32, j2: u32, mj2: i32) -> Result<Self> {
        let bad = |why: &str| Err(Error::InvalidState(format!("n={n} l={l} 2j={j2} 2mj={mj2}: {why}")));
        if n < 5 {
            return bad("n must be at least 5");
        }
        if l >= n {
            return bad("l must be below n");
        }
        if j2 != 2 * l + 1 && (l == 0 || j2 != 2 * l - 1) {
            return bad("j must be l ± 1/2");
        }
        if mj2.unsigned_abs() > j2 || (mj2 - j2 as i32) % 2 != 0 {
            return bad("m_j must satisfy |m_j| ≤ j with matching parity");
        }
        Ok(RydbergState { n, l, j2, mj2 })
    }

    pub fn series(&self) -> Series {
        Series { l: self.l, j2: self.j2 }
    }

    pub fn j(&self) -> f64 {
        self.j2 as f64 / 2.0
    }

    pub fn mj(&self) -> f64 {
        self.mj2 as f64 / 2.0
    }

    /// Same `n, l, j` with a different projection, if allowed.
    pub fn with_mj2(&self, mj2: i32) -> Option<Self> {
        RydbergState::new(self.n, self.l, self.j2, mj2).ok()
    }
}

impl fmt::Display for RydbergState {
    /// `70P3/2(1/2)`, `71S1/2(-1/2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}({}/2)", self.n, self.series(), self.mj2)
    }
}

/// Parses labels of the form `70P3/2(1/2)`.
impl std::str::FromStr for RydbergState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidState(format!("cannot parse state label '{s}'"));
        let s = s.trim();
        let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
        let n: u32 = s[..digits].parse().map_err(|_| err())?;
        let rest = &s[digits..];
        let letter = rest.chars().next().ok_or_else(err)?;
        let l = ORBITAL_LETTERS.iter().position(|&c| c == letter.to_ascii_uppercase()).ok_or_else(err)? as u32;
        let rest = &rest[1..];
        let open = rest.find('(').ok_or_else(err)?;
        let j2: u32 = rest[..open].strip_suffix("/2").ok_or_else(err)?.parse().map_err(|_| err())?;
        let inner = rest[open + 1..].strip_suffix(')').ok_or_else(err)?;
        let mj2: i32 = inner.strip_suffix("/2").ok_or_else(err)?.parse().map_err(|_| err())?;
        RydbergState::new(n, l, j2, mj2)
    }
}

/// Rydberg–Ritz coefficients for one series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defects {
    pub delta0: f64,
    pub delta2: f64,
}

/// Quantum defects for every series of a species, plus its Rydberg constant.
#[derive(Clone, Debug)]
pub struct QuantumDefectTable {
    pub rydberg_constant_ghz: f64,
    series: BTreeMap<Series, Defects>,
}

impl QuantumDefectTable {
    pub fn new(rydberg_constant_ghz: f64, series: impl IntoIterator<Item = (Series, Defects)>) -> Self {
        QuantumDefectTable { rydberg_constant_ghz, series: series.into_iter().collect() }
    }

    /// Same table with every defect set to zero (hydrogenic limit).
    pub fn hydrogenic(&self) -> Self {
        let series = self.series.keys().map(|&s| (s, Defects { delta0: 0.0, delta2: 0.0 }));
        QuantumDefectTable::new(self.rydberg_constant_ghz, series)
    }

    pub fn defects(&self, series: Series) -> Result<Defects> {
        self.series.get(&series).copied().ok_or(Error::UnknownSeries(series))
    }

    pub fn contains(&self, series: Series) -> bool {
        self.series.contains_key(&series)
    }

    pub fn series(&self) -> impl Iterator<Item = Series> + '_ {
        self.series.keys().copied()
    }

    pub fn max_l(&self) -> u32 {
        self.series.keys().map(|s| s.l).max().unwrap_or(0)
    }

    /// Effective principal quantum number `n* = n − δ(n)`.
    pub fn n_star(&self, state: &RydbergState) -> Result<f64> {
        let d = self.defects(state.series())?;
        let n = state.n as f64;
        Ok(n - d.delta0 - d.delta2 / (n - d.delta0).powi(2))
    }

    /// Binding energy `−Ry/n*²` in h·GHz, relative to the ionisation limit.
    pub fn level_energy(&self, state: &RydbergState) -> Result<f64> {
        let ns = self.n_star(state)?;
        Ok(-self.rydberg_constant_ghz / (ns * ns))
    }
}

/// Lifetime-fit coefficients for one series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifetimeCoefficients {
    /// Radiative lifetime prefactor, ns.
    pub tau_s_ns: f64,
    /// Radiative lifetime exponent.
    pub gamma: f64,
    pub bbr_a: f64,
    pub bbr_b: f64,
    pub bbr_c: f64,
    pub bbr_d: f64,
}

/// Radiative plus blackbody-induced decay of Rydberg states.
#[derive(Clone, Debug)]
pub struct LifetimeModel {
    pub temperature_k: f64,
    series: BTreeMap<Series, LifetimeCoefficients>,
}

impl LifetimeModel {
    pub const DEFAULT_TEMPERATURE_K: f64 = 300.0;

    pub fn new(temperature_k: f64, series: impl IntoIterator<Item = (Series, LifetimeCoefficients)>) -> Self {
        LifetimeModel { temperature_k, series: series.into_iter().collect() }
    }

    pub fn with_temperature(&self, temperature_k: f64) -> Self {
        LifetimeModel { temperature_k, series: self.series.clone() }
    }

    fn coefficients(&self, series: Series) -> Result<LifetimeCoefficients> {
        self.series.get(&series).copied().ok_or(Error::UnknownSeries(series))
    }

    /// 0 K radiative decay rate, 1/µs.
    pub fn radiative_rate(&self, state: &RydbergState, defects: &QuantumDefectTable) -> Result<f64> {
        let c = self.coefficients(state.series())?;
        let ns = defects.n_star(state)?;
        let tau_us = c.tau_s_ns * ns.powf(c.gamma) * 1e-3;
        Ok(1.0 / tau_us)
    }

    /// Blackbody-induced depopulation rate, 1/µs. Zero at 0 K.
    pub fn blackbody_rate(&self, state: &RydbergState, defects: &QuantumDefectTable) -> Result<f64> {
        let c = self.coefficients(state.series())?;
        if self.temperature_k <= 0.0 {
            return Ok(0.0);
        }
        let ns = defects.n_star(state)?;
        let x = 315_780.0 * c.bbr_b / (ns.powf(c.bbr_c) * self.temperature_k);
        let per_second = c.bbr_a / ns.powf(c.bbr_d) * 2.14e10 / x.exp_m1();
        Ok(per_second * 1e-6)
    }

    /// Total decay rate Γ = 1/τ_eff in 1/µs.
    pub fn decay_rate(&self, state: &RydbergState, defects: &QuantumDefectTable) -> Result<f64> {
        Ok(self.radiative_rate(state, defects)? + self.blackbody_rate(state, defects)?)
    }
}

#[derive(Deserialize)]
struct SpeciesFile {
    species: String,
    version: String,
    rydberg_constant_ghz: f64,
    series: Vec<SeriesRecord>,
}

#[derive(Deserialize)]
struct SeriesRecord {
    label: String,
    l: u32,
    j: f64,
    delta0: f64,
    delta2: f64,
    tau_s_ns: f64,
    gamma: f64,
    bbr_a: f64,
    bbr_b: f64,
    bbr_c: f64,
    bbr_d: f64,
}

/// Everything loaded from one species data file.
#[derive(Clone, Debug)]
pub struct SpeciesData {
    pub species: String,
    pub version: String,
    /// SHA-256 of the raw file contents, hex encoded.
    pub checksum: String,
    pub defects: QuantumDefectTable,
    pub lifetimes: LifetimeModel,
}

impl SpeciesData {
    pub fn parse(text: &str) -> Result<Self> {
        let file: SpeciesFile = toml::from_str(text).map_err(|e| Error::SpeciesData(e.to_string()))?;
        if !(file.rydberg_constant_ghz > 0.0) {
            return Err(Error::SpeciesData("rydberg_constant_ghz must be positive".into()));
        }
        let mut defects = Vec::new();
        let mut lifetimes = Vec::new();
        for rec in &file.series {
            let j2 = (2.0 * rec.j).round();
            if (2.0 * rec.j - j2).abs() > 1e-9 || j2 < 1.0 {
                return Err(Error::SpeciesData(format!("series {}: j = {} is not a positive half-integer", rec.label, rec.j)));
            }
            let series = Series::new(rec.l, j2 as u32);
            if series.to_string() != rec.label {
                return Err(Error::SpeciesData(format!("series label '{}' does not match l={} j={}", rec.label, rec.l, rec.j)));
            }
            if !(rec.delta0 > 0.0 && rec.delta0 < 5.0) {
                return Err(Error::SpeciesData(format!("series {}: delta0 = {} outside (0, 5)", rec.label, rec.delta0)));
            }
            defects.push((series, Defects { delta0: rec.delta0, delta2: rec.delta2 }));
            lifetimes.push((
                series,
                LifetimeCoefficients {
                    tau_s_ns: rec.tau_s_ns,
                    gamma: rec.gamma,
                    bbr_a: rec.bbr_a,
                    bbr_b: rec.bbr_b,
                    bbr_c: rec.bbr_c,
                    bbr_d: rec.bbr_d,
                },
            ));
        }
        Ok(SpeciesData {
            species: file.species,
            version: file.version,
            checksum: hex::encode(Sha256::digest(text.as_bytes())),
            defects: QuantumDefectTable::new(file.rydberg_constant_ghz, defects),
            lifetimes: LifetimeModel::new(LifetimeModel::DEFAULT_TEMPERATURE_K, lifetimes),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled Rb data.
    pub fn rubidium() -> Self {
        Self::parse(DEFAULT_SPECIES_TOML).expect("bundled species file is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: u32, l: u32, j2: u32, mj2: i32) -> RydbergState {
        RydbergState::new(n, l, j2, mj2).unwrap()
    }

    #[test]
    fn state_validation() {
        assert!(RydbergState::new(70, 1, 3, 1).is_ok());
        assert!(RydbergState::new(70, 0, 3, 1).is_err());
        assert!(RydbergState::new(70, 1, 3, 5).is_err());
        assert!(RydbergState::new(70, 1, 3, 0).is_err());
        assert!(RydbergState::new(3, 1, 3, 1).is_err());
        assert!(RydbergState::new(6, 6, 13, 1).is_err());
    }

    #[test]
    fn label_round_trip() {
        let s = st(70, 1, 3, 1);
        assert_eq!(s.to_string(), "70P3/2(1/2)");
        assert_eq!("70P3/2(1/2)".parse::<RydbergState>().unwrap(), s);
        assert_eq!("71S1/2(-1/2)".parse::<RydbergState>().unwrap(), st(71, 0, 1, -1));
        assert!("70Q3/2(1/2)".parse::<RydbergState>().is_err());
    }

    #[test]
    fn hydrogenic_limit_is_exact() {
        let rb = SpeciesData::rubidium();
        let h = rb.defects.hydrogenic();
        for n in [30, 70, 120] {
            let e = h.level_energy(&st(n, 0, 1, 1)).unwrap();
            let expect = -rb.defects.rydberg_constant_ghz / (n * n) as f64;
            assert!(((e - expect) / expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ordering_follows_defects() {
        let t = SpeciesData::rubidium().defects;
        let s = t.level_energy(&st(70, 0, 1, 1)).unwrap();
        let p = t.level_energy(&st(70, 1, 3, 1)).unwrap();
        let d = t.level_energy(&st(70, 2, 5, 1)).unwrap();
        assert!(s < p && p < d && d < 0.0);
    }

    #[test]
    fn unknown_series() {
        let t = SpeciesData::rubidium().defects;
        let s = st(70, 5, 11, 1);
        assert!(matches!(t.level_energy(&s), Err(Error::UnknownSeries(_))));
        let m = SpeciesData::rubidium().lifetimes;
        assert!(matches!(m.decay_rate(&s, &t), Err(Error::UnknownSeries(_))));
    }

    #[test]
    fn zero_temperature_is_radiative_only() {
        let rb = SpeciesData::rubidium();
        let cold = rb.lifetimes.with_temperature(0.0);
        let s = st(70, 1, 3, 1);
        let r = cold.decay_rate(&s, &rb.defects).unwrap();
        assert_eq!(r, cold.radiative_rate(&s, &rb.defects).unwrap());
        assert!(r < rb.lifetimes.decay_rate(&s, &rb.defects).unwrap());
    }

    #[test]
    fn malformed_species_file() {
        assert!(SpeciesData::parse("species = 1").is_err());
        let bad = DEFAULT_SPECIES_TOML.replace("delta0 = 3.1311804", "delta0 = 7.0");
        assert!(SpeciesData::parse(&bad).is_err());
    }
}
