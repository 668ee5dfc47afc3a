//! Physical constants and unit conversions (CODATA 2018).

/// Hartree energy in h·MHz.
pub const HARTREE_MHZ: f64 = 6.579_683_920_502e9;

/// Bohr radius in µm.
pub const BOHR_UM: f64 = 5.291_772_109_03e-5;

/// Energy of a 1 e·a₀ dipole in a 1 V/cm field, in h·MHz.
pub const DIPOLE_FIELD_MHZ: f64 = 1.602_176_634e-19 * 5.291_772_109_03e-11 * 100.0 / 6.626_070_15e-34 * 1e-6;

/// Dipole–dipole interaction of two 1 e·a₀ dipoles 1 µm apart, in h·MHz·µm³.
pub const DIPOLE_DIPOLE_MHZ_UM3: f64 = HARTREE_MHZ * BOHR_UM * BOHR_UM * BOHR_UM;

/// Angular frequency per unit of h·MHz·µs: phases are `TWO_PI * E * t`.
pub const TWO_PI: f64 = std::f64::consts::TAU;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_factors() {
        assert!((DIPOLE_FIELD_MHZ - 1.279_544).abs() < 1e-5);
        assert!((DIPOLE_DIPOLE_MHZ_UM3 - 9.750_04e-4).abs() < 1e-8);
    }
}
