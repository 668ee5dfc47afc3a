//! Three-atom collective states, the basis built around an initial state,
//! Stark-shifted collective energies and crossing search.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::RydbergState;
use crate::error::{Error, Result};
use crate::physics::Physics;
use crate::stark::{self, dipole_partners, PerturberWindow};

/// One trap site: either a ground-state atom (a spectator) or a Rydberg atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Ground,
    Rydberg(RydbergState),
}

impl Site {
    pub fn rydberg(&self) -> Option<&RydbergState> {
        match self {
            Site::Ground => None,
            Site::Rydberg(s) => Some(s),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Ground => write!(f, "g"),
            Site::Rydberg(s) => write!(f, "{s}"),
        }
    }
}

/// Ordered triple of sites; index i is trap i along z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CollectiveState {
    pub sites: [Site; 3],
}

impl CollectiveState {
    pub fn new(sites: [Site; 3]) -> Self {
        CollectiveState { sites }
    }

    pub fn rydberg(a: RydbergState, b: RydbergState, c: RydbergState) -> Self {
        CollectiveState { sites: [Site::Rydberg(a), Site::Rydberg(b), Site::Rydberg(c)] }
    }

    /// `state` on every site flagged in `pattern`, ground elsewhere.
    pub fn pattern(state: RydbergState, pattern: [bool; 3]) -> Self {
        CollectiveState { sites: pattern.map(|r| if r { Site::Rydberg(state) } else { Site::Ground }) }
    }

    /// Twice the total projection M.
    pub fn total_m2(&self) -> i32 {
        self.atoms().map(|s| s.mj2).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &RydbergState> + '_ {
        self.sites.iter().filter_map(Site::rydberg)
    }

    pub fn rydberg_count(&self) -> usize {
        self.atoms().count()
    }

    /// Sites at which `self` and `other` differ.
    pub fn differing_sites(&self, other: &CollectiveState) -> Vec<usize> {
        (0..3).filter(|&i| self.sites[i] != other.sites[i]).collect()
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CollectiveState {
    /// `70S1/2(1/2);71S1/2(1/2);70P1/2(1/2)`, ground sites as `g`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{};{}", self.sites[0], self.sites[1], self.sites[2])
    }
}

impl std::str::FromStr for CollectiveState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidState(format!("collective label '{s}' needs three ';'-separated sites")));
        }
        let mut sites = [Site::Ground; 3];
        for (site, p) in sites.iter_mut().zip(parts) {
            if !p.eq_ignore_ascii_case("g") {
                *site = Site::Rydberg(p.parse()?);
            }
        }
        Ok(CollectiveState { sites })
    }
}

/// Basis-construction rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    /// Number of two-atom dipole-dipole hops from the initial state.
    pub hops: u32,
    /// Largest |zero-field Förster defect| kept, h·GHz.
    pub defect_cutoff_ghz: f64,
    /// Single-atom dipole steps considered at each hop.
    pub window: PerturberWindow,
}

impl Default for BasisParams {
    fn default() -> Self {
        BasisParams { hops: 2, defect_cutoff_ghz: 0.4, window: PerturberWindow::default() }
    }
}

/// Collective basis around an initial state (always at index 0).
#[derive(Clone, Debug)]
pub struct BasisSet {
    states: Vec<CollectiveState>,
    defects_mhz: Vec<f64>,
    index: HashMap<CollectiveState, usize>,
    pub params: BasisParams,
}

impl BasisSet {
    pub fn states(&self) -> &[CollectiveState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &CollectiveState {
        &self.states[0]
    }

    pub fn index_of(&self, state: &CollectiveState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Zero-field Förster defect of each state relative to the initial one, h·MHz.
    pub fn defects_mhz(&self) -> &[f64] {
        &self.defects_mhz
    }

    /// One-line provenance record: construction rule and resulting size.
    pub fn provenance(&self) -> String {
        format!(
            "hops={} defect_cutoff_ghz={} n_window={} l_max={} size={}",
            self.params.hops, self.params.defect_cutoff_ghz, self.params.window.n_window, self.params.window.l_max, self.len()
        )
    }

    /// Basis holding a single state.
    /// Every pair of distinct fine-structure levels present in the basis that
    /// a dipole step can connect, as `m_j = 1/2` representatives, sorted.
    pub fn radial_pairs(&self) -> Vec<(RydbergState, RydbergState)> {
        let levels: std::collections::BTreeSet<(u32, u32, u32)> =
            self.states.iter().flat_map(|cs| cs.atoms().map(|a| (a.n, a.l, a.j2)).collect::<Vec<_>>()).collect();
        let levels: Vec<RydbergState> = levels.into_iter().filter_map(|(n, l, j2)| RydbergState::new(n, l, j2, 1).ok()).collect();
        let mut out = Vec::new();
        for (k, a) in levels.iter().enumerate() {
            for b in &levels[k + 1..] {
                if a.l.abs_diff(b.l) == 1 && a.j2.abs_diff(b.j2) <= 2 {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    pub fn single(state: CollectiveState, params: BasisParams) -> Self {
        BasisSet { states: vec![state], defects_mhz: vec![0.0], index: HashMap::from([(state, 0)]), params }
    }
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

fn zero_field_energy(phys: &Physics, cs: &CollectiveState) -> Result<f64> {
    cs.atoms().map(|s| phys.level_energy_mhz(s)).sum()
}

/// Breadth-first expansion of `initial` by two-atom dipole-dipole hops.
///
/// Each hop moves two Rydberg atoms by one dipole step each with their total
/// projection unchanged. States whose zero-field defect exceeds the cutoff are
/// neither kept nor expanded. Order: initial first, then by |defect| and
/// quantum numbers.
pub fn build_basis(phys: &Physics, initial: CollectiveState, params: BasisParams) -> Result<BasisSet> {
    if !(params.defect_cutoff_ghz > 0.0) {
        return Err(Error::InvalidParameter(format!("defect cutoff must be positive, got {}", params.defect_cutoff_ghz)));
    }
    if initial.rydberg_count() == 0 {
        return Err(Error::EmptyBasis("initial state has no Rydberg atoms".into()));
    }
    let e0 = zero_field_energy(phys, &initial).map_err(|e| Error::EmptyBasis(format!("initial state {initial}: {e}")))?;
    let cutoff = params.defect_cutoff_ghz * 1e3;
    let mut seen: HashMap<CollectiveState, f64> = HashMap::from([(initial, 0.0)]);
    let mut frontier = vec![initial];
    let mut partner_cache: HashMap<RydbergState, Vec<RydbergState>> = HashMap::new();
    let mut partners = |s: &RydbergState| -> Vec<RydbergState> {
        partner_cache
            .entry(*s)
            .or_insert_with(|| (-1..=1).flat_map(|q| dipole_partners(s, &phys.dipoles, params.window, q)).collect())
            .clone()
    };
    for _ in 0..params.hops {
        let mut next = Vec::new();
        for cs in &frontier {
            for (i, j) in PAIRS {
                let (Some(a0), Some(b0)) = (cs.sites[i].rydberg(), cs.sites[j].rydberg()) else { continue };
                let m_pair = a0.mj2 + b0.mj2;
                let (pa, pb) = (partners(a0), partners(b0));
                for a in &pa {
                    for b in &pb {
                        if a.mj2 + b.mj2 != m_pair {
                            continue;
                        }
                        let mut new = *cs;
                        new.sites[i] = Site::Rydberg(*a);
                        new.sites[j] = Site::Rydberg(*b);
                        if seen.contains_key(&new) {
                            continue;
                        }
                        let d = zero_field_energy(phys, &new)? - e0;
                        if d.abs() > cutoff {
                            continue;
                        }
                        seen.insert(new, d);
                        next.push(new);
                    }
                }
            }
        }
        frontier = next;
    }
    let mut rest: Vec<(CollectiveState, f64)> = seen.into_iter().filter(|(s, _)| *s != initial).collect();
    rest.sort_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(x.0.cmp(&y.0)));
    let mut states = vec![initial];
    let mut defects_mhz = vec![0.0];
    for (s, d) in rest {
        states.push(s);
        defects_mhz.push(d);
    }
    let index = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();
    Ok(BasisSet { states, defects_mhz, index, params })
}

/// Energy of `cs` at `field`, relative to `reference` at zero field, h·MHz.
pub fn collective_energy(phys: &Physics, cs: &CollectiveState, reference: &CollectiveState, field: f64) -> Result<f64> {
    stark::check_field(field)?;
    let mut e = zero_field_energy(phys, cs)? - zero_field_energy(phys, reference)?;
    for s in cs.atoms() {
        e += phys.single_atom_stark_shift(s, field)?;
    }
    Ok(e)
}

/// Fields in `[lo, hi]` where the bare energies of `initial` and `final_` cross.
///
/// Sign changes on a grid of spacing `step` are refined by bisection.
pub fn find_resonances(
    phys: &Physics,
    initial: &CollectiveState,
    final_: &CollectiveState,
    range: (f64, f64),
    step: f64,
) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    stark::check_field(lo)?;
    stark::check_field(hi)?;
    if !(step > 0.0) || hi < lo {
        return Err(Error::InvalidParameter(format!("bad scan range [{lo}, {hi}] with step {step}")));
    }
    let gap = |f: f64| -> Result<f64> {
        Ok(collective_energy(phys, final_, initial, f)? - collective_energy(phys, initial, initial, f)?)
    };
    let n = ((hi - lo) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| (lo + k as f64 * step).min(hi)).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &f in &grid {
        values.push(gap(f)?);
    }
    let mut out = Vec::new();
    for k in 0..grid.len() - 1 {
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let (mut ga, gb) = (values[k], values[k + 1]);
        if ga == 0.0 {
            out.push(a);
            continue;
        }
        if ga * gb >= 0.0 {
            continue;
        }
        while b - a > 1e-10 {
            let m = 0.5 * (a + b);
            let gm = gap(m)?;
            if gm.signum() == ga.signum() {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    if values.last() == Some(&0.0) {
        out.push(hi);
    }
    Ok(out)
}

/// Energy curves of several collective states over a field grid.
#[derive(Clone, Debug)]
pub struct StarkMap {
    pub fields: Vec<f64>,
    pub states: Vec<CollectiveState>,
    /// `curves[k][i]`: energy of `states[k]` at `fields[i]`, h·MHz.
    pub curves: Vec<Vec<f64>>,
}

impl StarkMap {
    pub fn compute(phys: &Physics, states: &[CollectiveState], reference: &CollectiveState, fields: &[f64]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("Stark map needs at least one state".into()));
        }
        if fields.is_empty() || fields.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("field grid must be nonempty and strictly increasing".into()));
        }
        for &f in fields {
            stark::check_field(f)?;
        }
        for s in states {
            for a in s.atoms() {
                phys.polarizability(a)?;
            }
        }
        let columns: Vec<Vec<f64>> = fields
            .par_iter()
            .map(|&f| states.iter().map(|s| collective_energy(phys, s, reference, f)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let curves = (0..states.len()).map(|k| columns.iter().map(|c| c[k]).collect()).collect();
        Ok(StarkMap { fields: fields.to_vec(), states: states.to_vec(), curves })
    }
}

/// `|nP3/2(1/2)⟩^⊗3`.
pub fn three_body_initial(n: u32) -> Result<CollectiveState> {
    let p = RydbergState::new(n, 1, 3, 1)?;
    Ok(CollectiveState::rydberg(p, p, p))
}

/// `|nS1/2(1/2); (n+1)S1/2(1/2); nP1/2(1/2)⟩`.
pub fn three_body_final(n: u32) -> Result<CollectiveState> {
    Ok(CollectiveState::rydberg(
        RydbergState::new(n, 0, 1, 1)?,
        RydbergState::new(n + 1, 0, 1, 1)?,
        RydbergState::new(n, 1, 1, 1)?,
    ))
}

/// The four fine-structure initial configurations of `nP3/2`: k atoms with
/// |m_j| = 3/2 and the rest with 1/2, for k = 0..3.
pub fn initial_configurations(n: u32) -> Result<Vec<CollectiveState>> {
    let lo = RydbergState::new(n, 1, 3, 1)?;
    let hi = RydbergState::new(n, 1, 3, 3)?;
    Ok((0..=3)
        .map(|k| {
            let mut sites = [Site::Rydberg(lo); 3];
            for site in sites.iter_mut().take(k) {
                *site = Site::Rydberg(hi);
            }
            CollectiveState { sites }
        })
        .collect())
}

/// True when every state in the set has the same total projection.
pub fn uniform_projection(states: &[CollectiveState]) -> bool {
    let ms: HashSet<i32> = states.iter().map(CollectiveState::total_m2).collect();
    ms.len() <= 1
}
