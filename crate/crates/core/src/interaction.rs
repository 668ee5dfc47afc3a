//! Dipole-dipole couplings and the non-Hermitian Hamiltonian over a basis.
//!
//! `V = −√6 e²/(4πε₀ R³) Σ_q C(1 q 1 −q | 2 0) a_q b_{−q}` for two atoms on
//! the quantisation axis. Couplings use zero-field dipoles; the field enters
//! only through the diagonal.

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::cg;
use crate::collective::{collective_energy, BasisSet, CollectiveState, Site};
use crate::error::{Error, Result};
use crate::physics::Physics;
use crate::stark;
use crate::units::DIPOLE_DIPOLE_MHZ_UM3;

/// Three trap positions on the z axis, µm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    positions: [f64; 3],
}

impl Geometry {
    pub fn new(positions: [f64; 3]) -> Result<Self> {
        if !positions.iter().all(|p| p.is_finite()) || !(positions[0] < positions[1] && positions[1] < positions[2]) {
            return Err(Error::InvalidParameter(format!("trap positions must be strictly increasing, got {positions:?}")));
        }
        Ok(Geometry { positions })
    }

    /// Traps at 0, R, 2R.
    pub fn equidistant(r_um: f64) -> Result<Self> {
        Geometry::new([0.0, r_um, 2.0 * r_um])
    }

    pub fn positions(&self) -> [f64; 3] {
        self.positions
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions[j] - self.positions[i]).abs()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Geometry::new(self.positions.map(|p| p * factor))
    }
}

/// Matrix element `⟨b| V_ij |a⟩` in h·MHz between collective states that differ
/// at most on sites `i` and `j`.
///
/// States differing on all three sites are not coupled by a two-body operator
/// and give zero. A difference on the third site alone is an error.
pub fn pair_coupling(
    phys: &Physics,
    a: &CollectiveState,
    b: &CollectiveState,
    pair: (usize, usize),
    geometry: &Geometry,
) -> Result<f64> {
    let (i, j) = pair;
    if i == j || i > 2 || j > 2 {
        return Err(Error::InvalidPair(format!("atoms ({i}, {j}) do not form a pair")));
    }
    let diff = a.differing_sites(b);
    if diff.len() == 3 {
        return Ok(0.0);
    }
    let k = 3 - i - j;
    if diff.contains(&k) {
        return Err(Error::InvalidPair(format!("{a} and {b} differ on atom {k}, outside pair ({i}, {j})")));
    }
    let (Site::Rydberg(ai), Site::Rydberg(aj), Site::Rydberg(bi), Site::Rydberg(bj)) =
        (a.sites[i], a.sites[j], b.sites[i], b.sites[j])
    else {
        return Ok(0.0);
    };
    let mut sum = 0.0;
    for q in -1..=1 {
        let di = phys.dipoles.dipole_component(&ai, &bi, q)?.value;
        if di == 0.0 {
            continue;
        }
        let dj = phys.dipoles.dipole_component(&aj, &bj, -q)?.value;
        sum += cg(2, 2 * q, 2, -2 * q, 4, 0) * di * dj;
    }
    let r = geometry.distance(i, j);
    Ok(-(6.0f64).sqrt() * DIPOLE_DIPOLE_MHZ_UM3 / (r * r * r) * sum)
}

/// Field-independent parts of the Hamiltonian over one basis and geometry.
///
/// Off-diagonal couplings and zero-field energies are computed once;
/// [`HamiltonianTemplate::at_field`] only rewrites the diagonal.
#[derive(Clone, Debug)]
pub struct HamiltonianTemplate {
    basis: Arc<BasisSet>,
    geometry: Geometry,
    off_diagonal: Array2<f64>,
    zero_field: Vec<f64>,
    polarizability: Vec<f64>,
    half_width: Vec<f64>,
}

impl HamiltonianTemplate {
    /// `decay = false` zeroes every Γ.
    pub fn new(phys: &Physics, basis: Arc<BasisSet>, geometry: Geometry, decay: bool) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::EmptyBasis("cannot assemble a Hamiltonian over an empty basis".into()));
        }
        let states = basis.states();
        let n = states.len();
        let initial = *basis.initial();
        let mut zero_field = Vec::with_capacity(n);
        let mut polarizability = Vec::with_capacity(n);
        let mut half_width = Vec::with_capacity(n);
        for cs in states {
            zero_field.push(collective_energy(phys, cs, &initial, 0.0)?);
            let mut alpha = 0.0;
            let mut width = 0.0;
            for s in cs.atoms() {
                alpha += phys.polarizability(s)?;
                if decay {
                    width += phys.decay_width_mhz(s)?;
                }
            }
            polarizability.push(alpha);
            half_width.push(0.5 * width);
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut row = Vec::new();
                for c in r + 1..n {
                    let diff = states[r].differing_sites(&states[c]);
                    if diff.len() != 2 {
                        continue;
                    }
                    let v = pair_coupling(phys, &states[r], &states[c], (diff[0], diff[1]), &geometry)?;
                    if v != 0.0 {
                        row.push((c, v));
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut off_diagonal = Array2::zeros((n, n));
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                off_diagonal[[r, c]] = v;
                off_diagonal[[c, r]] = v;
            }
        }
        Ok(HamiltonianTemplate { basis, geometry, off_diagonal, zero_field, polarizability, half_width })
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Real diagonal energy of basis state `k` at `field`, h·MHz.
    pub fn diagonal_energy(&self, k: usize, field: f64) -> f64 {
        self.zero_field[k] + self.polarizability[k] * field * field
    }

    pub fn at_field(&self, field: f64) -> Result<HamiltonianModel> {
        stark::check_field(field)?;
        let mut matrix = self.off_diagonal.mapv(|v| Complex64::new(v, 0.0));
        for k in 0..self.zero_field.len() {
            matrix[[k, k]] = Complex64::new(self.diagonal_energy(k, field), -self.half_width[k]);
        }
        Ok(HamiltonianModel { basis: self.basis.clone(), matrix, field, geometry: self.geometry })
    }
}

/// `H = Σ E_k|k⟩⟨k| − (i/2) Σ Γ_k|k⟩⟨k| + V_dd` in h·MHz.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    pub basis: Arc<BasisSet>,
    pub matrix: Array2<Complex64>,
    pub field: f64,
    pub geometry: Geometry,
}

impl HamiltonianModel {
    pub fn assemble(phys: &Physics, basis: Arc<BasisSet>, field: f64, geometry: Geometry, decay: bool) -> Result<Self> {
        HamiltonianTemplate::new(phys, basis, geometry, decay)?.at_field(field)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest |H − H†| element.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.matrix[[r, c]] - self.matrix[[c, r]].conj()).norm());
            }
        }
        worst
    }

    /// Nonzero entries as CSV rows `row,col,bra,ket,re_mhz,im_mhz`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,bra,ket,re_mhz,im_mhz")?;
        let states = self.basis.states();
        for ((r, c), v) in self.matrix.indexed_iter() {
            if *v != Complex64::new(0.0, 0.0) {
                writeln!(out, "{r},{c},{},{},{:e},{:e}", states[r], states[c], v.re, v.im)?;
            }
        }
        Ok(())
    }
}
