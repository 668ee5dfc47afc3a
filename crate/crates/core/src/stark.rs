//! Quadratic Stark shifts from second-order perturbation theory.
//!
//! For a field F along z, `ΔE = −F² Σ_k |⟨k|d_0|i⟩|² / (E_k − E_i)`, summed
//! over dipole-coupled states within a window of principal quantum numbers.

use crate::atom::RydbergState;
use crate::dipole::DipoleCalculator;
use crate::error::{Error, Result};
use crate::units::DIPOLE_FIELD_MHZ;

/// Upper end of the field range treated perturbatively, V/cm.
pub const MAX_FIELD_V_CM: f64 = 0.5;

pub fn check_field(field: f64) -> Result<()> {
    if !(0.0..=MAX_FIELD_V_CM).contains(&field) {
        return Err(Error::FieldOutOfRegime { field, max: MAX_FIELD_V_CM });
    }
    Ok(())
}

/// Window of perturbers included in the Stark sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PerturberWindow {
    /// Principal quantum numbers n ± `n_window`.
    pub n_window: u32,
    /// Highest orbital momentum included.
    pub l_max: u32,
}

impl Default for PerturberWindow {
    fn default() -> Self {
        PerturberWindow { n_window: 6, l_max: 3 }
    }
}

/// All states reachable from `state` by one dipole step with projection change `q`.
pub fn dipole_partners(
    state: &RydbergState,
    dipoles: &DipoleCalculator,
    window: PerturberWindow,
    q: i32,
) -> Vec<RydbergState> {
    let mut out = Vec::new();
    let mj2 = state.mj2 + 2 * q;
    for l2 in [state.l.wrapping_sub(1), state.l + 1] {
        if l2 > window.l_max || l2 == u32::MAX {
            continue;
        }
        for j2 in [2 * l2 + 1, (2 * l2).wrapping_sub(1)] {
            if j2 > 2 * l2 + 1 || mj2.unsigned_abs() > j2 || !dipoles.defects().contains(crate::atom::Series::new(l2, j2)) {
                continue;
            }
            let lo = state.n.saturating_sub(window.n_window).max(5).max(l2 + 1);
            for n2 in lo..=state.n + window.n_window {
                if let Ok(s) = RydbergState::new(n2, l2, j2, mj2) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Scalar-plus-tensor static polarizability coefficient `k` with `ΔE = k·F²`,
/// in h·MHz/(V/cm)².
pub fn polarizability(state: &RydbergState, dipoles: &DipoleCalculator, window: PerturberWindow) -> Result<f64> {
    let table = dipoles.defects();
    let e0 = table.level_energy(state)? * 1e3;
    let mut total = 0.0;
    for k in dipole_partners(state, dipoles, window, 0) {
        let d = dipoles.dipole_component(state, &k, 0)?.value * DIPOLE_FIELD_MHZ;
        total -= d * d / (table.level_energy(&k)? * 1e3 - e0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::SpeciesData;

    fn st(n: u32, l: u32, j2: u32, mj2: i32) -> RydbergState {
        RydbergState::new(n, l, j2, mj2).unwrap()
    }

    #[test]
    fn partners_respect_selection_rules() {
        let d = DipoleCalculator::new(SpeciesData::rubidium().defects);
        let p = st(70, 1, 3, 1);
        let parts = dipole_partners(&p, &d, PerturberWindow::default(), 0);
        assert!(parts.iter().all(|s| s.l.abs_diff(1) == 1 && s.mj2 == 1));
        // S1/2, D3/2, D5/2 over 13 values of n each
        assert_eq!(parts.len(), 39);
        let up = dipole_partners(&st(70, 1, 3, 3), &d, PerturberWindow::default(), 1);
        assert!(up.iter().all(|s| s.mj2 == 5 && s.j2 == 5));
    }

    #[test]
    fn window_convergence() {
        let d = DipoleCalculator::new(SpeciesData::rubidium().defects);
        let p = st(70, 1, 3, 1);
        let narrow = polarizability(&p, &d, PerturberWindow::default()).unwrap();
        let wide = polarizability(&p, &d, PerturberWindow { n_window: 10, l_max: 3 }).unwrap();
        assert!(((narrow - wide) / wide).abs() < 5e-3, "{narrow} vs {wide}");
    }

    #[test]
    fn field_guard() {
        assert!(check_field(0.0).is_ok());
        assert!(check_field(0.5).is_ok());
        assert!(check_field(-0.1).is_err());
        assert!(check_field(0.51).is_err());
        assert!(check_field(f64::NAN).is_err());
    }
}
