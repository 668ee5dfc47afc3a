//! Electric-dipole matrix elements between fine-structure Rydberg states.
//!
//! Convention: `d_q = r·C¹_q(r̂)` in units of e·a₀ with Condon–Shortley
//! phases throughout. The electron charge sign is dropped; it cancels in
//! every product of two dipoles and in the second-order Stark sum.
//!
//! `⟨l' j' m'| C¹_q |l j m⟩ = (−1)^(j'−m') (j' 1 j; −m' q m)
//!     · (−1)^(l'+1/2+j+1) √((2j+1)(2j'+1)) {l' j' 1/2; j l 1}
//!     · (−1)^l' √((2l+1)(2l'+1)) (l' 1 l; 0 0 0)`

use std::collections::HashMap;
use std::sync::RwLock;

use crate::angular::{wigner_3j, wigner_6j};
use crate::atom::{QuantumDefectTable, RydbergState};
use crate::error::Result;
use crate::radial::{self, QcQuadrature};

fn parity_sign(k: i32) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `⟨l'||C¹||l⟩`.
pub fn reduced_c1(l_bra: u32, l_ket: u32) -> f64 {
    let (lb, lk) = (2 * l_bra as i32, 2 * l_ket as i32);
    parity_sign(l_bra as i32) * (((2 * l_ket + 1) * (2 * l_bra + 1)) as f64).sqrt() * wigner_3j(lb, 2, lk, 0, 0, 0)
}

/// `⟨bra| C¹_q |ket⟩` including fine structure.
pub fn angular_factor(bra: &RydbergState, ket: &RydbergState, q: i32) -> f64 {
    if bra.l.abs_diff(ket.l) != 1 || bra.mj2 != ket.mj2 + 2 * q {
        return 0.0;
    }
    let (lb, jb, mb) = (2 * bra.l as i32, bra.j2 as i32, bra.mj2);
    let (lk, jk, mk) = (2 * ket.l as i32, ket.j2 as i32, ket.mj2);
    let three_j = parity_sign((jb - mb) / 2) * wigner_3j(jb, 2, jk, -mb, 2 * q, mk);
    let reduced_j = parity_sign((lb + 1 + jk + 2) / 2)
        * (((jk + 1) * (jb + 1)) as f64).sqrt()
        * wigner_6j(lb, jb, 1, jk, lk, 2)
        * reduced_c1(bra.l, ket.l);
    three_j * reduced_j
}

/// One spherical component `⟨bra| d_q |ket⟩` in e·a₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleMatrixElement {
    pub bra: RydbergState,
    pub ket: RydbergState,
    pub q: i32,
    pub value: f64,
}

type RadialKey = (u32, u32, u32, u32, u32, u32);

fn radial_key(a: &RydbergState, b: &RydbergState) -> RadialKey {
    let ka = (a.n, a.l, a.j2);
    let kb = (b.n, b.l, b.j2);
    let (x, y) = if ka <= kb { (ka, kb) } else { (kb, ka) };
    (x.0, x.1, x.2, y.0, y.1, y.2)
}

/// Dipole matrix elements for one species, with a shared radial-integral cache.
#[derive(Debug)]
pub struct DipoleCalculator {
    defects: QuantumDefectTable,
    quadrature: QcQuadrature,
    cache: RwLock<HashMap<RadialKey, f64>>,
}

impl DipoleCalculator {
    pub fn new(defects: QuantumDefectTable) -> Self {
        DipoleCalculator { defects, quadrature: QcQuadrature::default(), cache: RwLock::new(HashMap::new()) }
    }

    pub fn defects(&self) -> &QuantumDefectTable {
        &self.defects
    }

    /// Quasiclassical radial integral in a₀, memoised on `(n, l, j)` pairs.
    pub fn radial_qc(&self, s1: &RydbergState, s2: &RydbergState) -> Result<f64> {
        let key = radial_key(s1, s2);
        if let Some(&v) = self.cache.read().unwrap().get(&key) {
            return Ok(v);
        }
        let v = radial::radial_qc(self.defects.n_star(s1)?, s1.l, self.defects.n_star(s2)?, s2.l, &self.quadrature)?;
        self.cache.write().unwrap().insert(key, v);
        Ok(v)
    }

    /// Numerov radial integral in a₀ (uncached oracle).
    pub fn radial_numerov(&self, s1: &RydbergState, s2: &RydbergState) -> Result<f64> {
        radial::radial_numerov(self.defects.n_star(s1)?, s1.l, self.defects.n_star(s2)?, s2.l, radial::NUMEROV_STEP)
    }

    /// `⟨s2| d_q |s1⟩`: the transition s1 → s2 absorbing one unit `q` of projection.
    ///
    /// Zero unless `|l2 − l1| = 1` and `m_j2 − m_j1 = q`.
    pub fn dipole_component(&self, s1: &RydbergState, s2: &RydbergState, q: i32) -> Result<DipoleMatrixElement> {
        let ang = angular_factor(s2, s1, q);
        let value = if ang == 0.0 { 0.0 } else { self.radial_qc(s1, s2)? * ang };
        Ok(DipoleMatrixElement { bra: *s2, ket: *s1, q, value })
    }

    pub fn cached_integrals(&self) -> usize {
        self.cache.read().unwrap().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::SpeciesData;
    use proptest::prelude::*;

    fn st(n: u32, l: u32, j2: u32, mj2: i32) -> RydbergState {
        RydbergState::new(n, l, j2, mj2).unwrap()
    }

    fn calc() -> DipoleCalculator {
        DipoleCalculator::new(SpeciesData::rubidium().defects)
    }

    #[test]
    fn known_angular_values() {
        let s = st(70, 0, 1, 1);
        let p3 = st(70, 1, 3, 1);
        let p1 = st(70, 1, 1, 1);
        assert!((angular_factor(&p3, &s, 0) - (2.0f64).sqrt() / 3.0).abs() < 1e-14);
        assert!((angular_factor(&p1, &s, 0) + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn selection_rules_give_zero() {
        let c = calc();
        let p = st(70, 1, 3, 1);
        let s = st(70, 0, 1, 1);
        assert_eq!(c.dipole_component(&p, &s, 1).unwrap().value, 0.0);
        assert_eq!(c.dipole_component(&p, &st(70, 1, 1, 1), 0).unwrap().value, 0.0);
        assert_eq!(c.dipole_component(&st(70, 0, 1, 1), &st(69, 2, 3, 1), 0).unwrap().value, 0.0);
        assert_ne!(c.dipole_component(&p, &s, 0).unwrap().value, 0.0);
    }

    #[test]
    fn hermitian_symmetry() {
        let c = calc();
        let a = st(70, 1, 3, 1);
        for b in [st(70, 0, 1, -1), st(71, 0, 1, 1), st(69, 2, 5, 3), st(70, 2, 3, -1)] {
            for q in -1..=1 {
                let fwd = c.dipole_component(&a, &b, q).unwrap().value;
                let back = c.dipole_component(&b, &a, -q).unwrap().value;
                let sgn = if q == 0 { 1.0 } else { -1.0 };
                assert!((fwd - sgn * back).abs() < 1e-12 * fwd.abs().max(1.0), "{b} {q}");
            }
        }
    }

    #[test]
    fn radial_cache_is_symmetric() {
        let c = calc();
        let a = st(70, 1, 3, 1);
        let b = st(71, 0, 1, 1);
        let x = c.radial_qc(&a, &b).unwrap();
        assert_eq!(c.cached_integrals(), 1);
        assert_eq!(c.radial_qc(&b, &a).unwrap(), x);
        assert_eq!(c.cached_integrals(), 1);
    }

    #[test]
    fn near_diagonal_elements_agree_with_numerov() {
        let c = calc();
        let p = st(70, 1, 3, 1);
        for other in [st(70, 0, 1, 1), st(71, 0, 1, 1)] {
            let qc = c.radial_qc(&p, &other).unwrap();
            let nv = c.radial_numerov(&p, &other).unwrap();
            assert!(((qc - nv) / nv).abs() < 0.02, "{other}: {qc} vs {nv}");
        }
    }

    fn all_states(n: u32, l: u32) -> Vec<RydbergState> {
        let mut out = Vec::new();
        for j2 in [2 * l + 1, (2 * l).wrapping_sub(1)] {
            if j2 > 2 * l + 1 {
                continue;
            }
            for mj2 in (-(j2 as i32)..=j2 as i32).step_by(2) {
                out.push(st(n, l, j2, mj2));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn sum_rule_independent_of_mj(l in 0u32..3, lp_up in proptest::bool::ANY, up in proptest::bool::ANY) {
            let j2 = if up || l == 0 { 2 * l + 1 } else { 2 * l - 1 };
            let lp = if lp_up || l == 0 { l + 1 } else { l - 1 };
            let sums: Vec<f64> = (-(j2 as i32)..=j2 as i32).step_by(2).map(|mj2| {
                let ket = st(70, l, j2, mj2);
                let mut s = 0.0;
                for bra in all_states(70, lp) {
                    for q in -1..=1 {
                        s += angular_factor(&bra, &ket, q).powi(2);
                    }
                }
                s
            }).collect();
            for s in &sums {
                prop_assert!((s - sums[0]).abs() < 1e-10 * sums[0]);
            }
        }
    }
}
