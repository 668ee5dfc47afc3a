//! Stark-tuned three-body Förster resonances between Rb Rydberg atoms and a
//! Toffoli gate built on them.
//!
//! The crate is organised bottom-up:
//!
//! * [`atom`]: single-atom states, quantum-defect energies and lifetimes.
//! * [`angular`], [`radial`], [`dipole`]: angular-momentum algebra and
//!   electric-dipole matrix elements.
//! * [`stark`], [`collective`]: Stark shifts, three-atom collective bases,
//!   Stark maps and resonance crossings.
//! * [`interaction`]: the non-Hermitian Hamiltonian over a collective basis.
//! * [`expm`], [`dynamics`]: time evolution and observables.
//! * [`gate`], [`optimize`]: the eight-pulse Toffoli sequence, its fidelity and
//!   a Nelder–Mead parameter search.
//!
//! Interface units are h·MHz for energies, µs for times, µm for lengths and
//! V/cm for fields. Matrix-element arithmetic runs in atomic units.

pub mod angular;
pub mod atom;
pub mod collective;
pub mod dipole;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod gate;
pub mod interaction;
pub mod optimize;
pub mod physics;
pub mod radial;
pub mod stark;
pub mod units;

pub use atom::{LifetimeModel, QuantumDefectTable, RydbergState, Series, SpeciesData};
pub use collective::{BasisParams, BasisSet, CollectiveState, Site, StarkMap};
pub use error::{Error, Result};
pub use interaction::{Geometry, HamiltonianModel};
pub use physics::Physics;
