//! Species data plus the caches every higher-level calculation shares.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::atom::{LifetimeModel, RydbergState, SpeciesData};
use crate::dipole::DipoleCalculator;
use crate::error::Result;
use crate::stark::{self, PerturberWindow};
use crate::units::TWO_PI;

/// Single-atom physics for one species at a fixed ambient temperature.
///
/// Thread-safe: the memo tables sit behind `RwLock`s.
#[derive(Debug)]
pub struct Physics {
    pub species: SpeciesData,
    pub lifetimes: LifetimeModel,
    pub dipoles: DipoleCalculator,
    pub window: PerturberWindow,
    polarizabilities: RwLock<HashMap<RydbergState, f64>>,
}

impl Physics {
    pub fn new(species: SpeciesData, temperature_k: f64, window: PerturberWindow) -> Self {
        Physics {
            lifetimes: species.lifetimes.with_temperature(temperature_k),
            dipoles: DipoleCalculator::new(species.defects.clone()),
            species,
            window,
            polarizabilities: RwLock::new(HashMap::new()),
        }
    }

    /// Bundled Rb data at 300 K with the default perturber window.
    pub fn rubidium() -> Self {
        Physics::new(SpeciesData::rubidium(), LifetimeModel::DEFAULT_TEMPERATURE_K, PerturberWindow::default())
    }

    pub fn temperature_k(&self) -> f64 {
        self.lifetimes.temperature_k
    }

    /// Zero-field level energy in h·MHz relative to the ionisation limit.
    pub fn level_energy_mhz(&self, state: &RydbergState) -> Result<f64> {
        Ok(self.species.defects.level_energy(state)? * 1e3)
    }

    /// Stark coefficient `k` in h·MHz/(V/cm)², memoised.
    pub fn polarizability(&self, state: &RydbergState) -> Result<f64> {
        if let Some(&a) = self.polarizabilities.read().unwrap().get(state) {
            return Ok(a);
        }
        let a = stark::polarizability(state, &self.dipoles, self.window)?;
        self.polarizabilities.write().unwrap().insert(*state, a);
        Ok(a)
    }

    /// Quadratic Stark shift in h·MHz at `field` V/cm.
    pub fn single_atom_stark_shift(&self, state: &RydbergState, field: f64) -> Result<f64> {
        stark::check_field(field)?;
        if field == 0.0 {
            return Ok(0.0);
        }
        Ok(self.polarizability(state)? * field * field)
    }

    /// Population decay rate Γ in 1/µs.
    pub fn decay_rate(&self, state: &RydbergState) -> Result<f64> {
        self.lifetimes.decay_rate(state, &self.species.defects)
    }

    /// Γ expressed as an energy width in h·MHz, for the `−iΓ/2` diagonal.
    pub fn decay_width_mhz(&self, state: &RydbergState) -> Result<f64> {
        Ok(self.decay_rate(state)? / TWO_PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: u32, l: u32, j2: u32, mj2: i32) -> RydbergState {
        RydbergState::new(n, l, j2, mj2).unwrap()
    }

    #[test]
    fn stark_shift_is_quadratic() {
        let ph = Physics::rubidium();
        let p = st(70, 1, 3, 1);
        assert_eq!(ph.single_atom_stark_shift(&p, 0.0).unwrap(), 0.0);
        for e0 in [0.01, 0.025, 0.05] {
            let r = ph.single_atom_stark_shift(&p, 2.0 * e0).unwrap() / ph.single_atom_stark_shift(&p, e0).unwrap();
            assert!((r - 4.0).abs() < 0.04);
        }
        assert!(ph.single_atom_stark_shift(&p, 0.6).is_err());
    }

    #[test]
    fn lifetime_of_70p() {
        let ph = Physics::rubidium();
        let tau = 1.0 / ph.decay_rate(&st(70, 1, 3, 1)).unwrap();
        // Hand evaluation of the scaling fit at n* = 67.3583, 300 K.
        let ns: f64 = 70.0 - 2.6416737 - 0.2950 / (70.0f64 - 2.6416737).powi(2);
        let rad = 1e3 / (2.5341 * ns.powf(2.9970));
        let bbr = 0.046 / ns.powf(3.941) * 2.14e10 / ((315780.0 * 0.195 / (ns.powf(2.404) * 300.0)).exp() - 1.0) * 1e-6;
        assert!((tau * (rad + bbr) - 1.0).abs() < 1e-12);
        assert!((tau - 114.93).abs() < 0.01, "{tau}");
    }
}
