//! Exact and p-adically truncated arithmetic.
//!
//! Three coefficient domains cover every computation in this crate:
//!
//! * exact rationals ([`num_rational::BigRational`], re-exported as [`Rat`]);
//! * exact cyclotomic numbers: vectors over Q reduced modulo the m-th
//!   cyclotomic polynomial ([`CycloElem`]);
//! * truncated cyclotomic integers: the same vectors with coefficients in
//!   Z/p^N, together with a certified-digit count ([`CycloModElem`] in a
//!   [`ModCycloRing`]).
//!
//! No embedding of roots of unity into an algebraic closure of Q_p is ever
//! chosen; modular evaluation of characters goes through Teichmüller lifts
//! for the prime-to-p part of a value and stays symbolic (a polynomial ring
//! modulo a p-power cyclotomic polynomial) for the p-part.  Quantities that
//! are Galois-stable reduce to honest rationals or to elements of Z_p, the
//! latter modelled by [`PadicNumber`] with explicit precision.

mod cyclotomic;
mod modcyclo;
mod padic;
mod rational;

pub use cyclotomic::{cyclotomic_polynomial, euler_phi, product_promoting, CycloElem};
pub use modcyclo::{CycloModElem, ModCycloRing, ShiftedModElem};
pub use padic::{teichmuller, teichmuller_residue, PadicNumber, PadicRepr};
pub use rational::{int_valuation, parse_rational, pow_rational, rational_valuation, Rat};
