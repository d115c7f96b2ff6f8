//! Mixed-radix qudit simulation of confining string dynamics on a ladder of
//! lattice-gauge plaquettes, plus a compiler from Trotterized evolution to a
//! trapped-ion-style native gate set.
//!
//! The degrees of freedom are per-plaquette "bubble" states: each rung of the
//! ladder carries one qudit whose levels enumerate the gauge-invariant local
//! configurations that survive truncating the link Hilbert spaces. Two
//! truncations are supported:
//!
//! * [`Sector::Half`] — links capped at spin 1/2, four levels per plaquette;
//! * [`Sector::One`] — links capped at spin 1, eight levels per plaquette.
//!
//! The Hamiltonian is a sum of three term families acting on the chain of
//! `N` qudits,
//!
//! ```text
//! H = -x Σ_p U_p  +  (g∥²/2) Σ_p V_loc(p)  +  (g⊥²/2) Σ_<p,q> V_pair(p,q)
//! ```
//!
//! where `U_p` is a real single-site flip (magnetic/plaquette term), `V_loc`
//! is a diagonal electric penalty with distinct boundary weights, and
//! `V_pair` is a nearest-neighbour electric term that is diagonal except —
//! in the spin-1 sector — for a handful of two-site flips between
//! configurations that share the same electric flux through the shared link.
//! All three families are real symmetric, which the solvers exploit.
//!
//! What the crate computes:
//!
//! * exact state-vector evolution via one symmetric eigendecomposition
//!   ([`evolve::ExactEvolver`]);
//! * second-order (symmetric) Trotter evolution with either the original or
//!   a cheaper "simplified" pair term ([`evolve::evolve_trotter`]);
//! * identification of string / broken-string / dressed-pair basis states and
//!   the resonance condition between them ([`model::identify_string_states`],
//!   [`model::resonance_ratio`]);
//! * the dynamically reachable ("physical") subspace and its neighbour-pair
//!   fusion constraints ([`model::PhysicalSubspace`]);
//! * a six-state effective model for the lightest string-fluctuation band in
//!   the spin-1/2 sector, with closed-form populations ([`effective`]);
//! * compilation of one or many Trotter steps to `LOCAL` / `MS_XX` / `MS_ZZ`
//!   native gates with per-gate provenance, exact diagonal synthesis,
//!   physicality-based gate elision and pulse-angle reduction ([`compile`]);
//! * reproducible measurement sampling, post-selection on the physical
//!   subspace, and a depolarizing population model ([`evolve`]);
//! * scenario configs, CSV/metadata output and a small CLI ([`config`],
//!   [`scenario`]).
//!
//! Basis-state labels are digit strings, most-significant site first: in the
//! spin-1 sector `"403"` is the state with plaquette 0 in level 4, plaquette
//! 1 in level 0, plaquette 2 in level 3.

pub mod compile;
pub mod config;
pub mod effective;
pub mod error;
pub mod evolve;
pub mod model;
pub mod qudit;
pub mod scenario;

pub use error::Error;
pub use model::{ModelParams, PairForm, Sector};
pub use qudit::{MixedRadixRegister, StateVector};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
