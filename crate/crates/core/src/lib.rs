//! Certified p-adic limits along cyclotomic Z_p-towers over abelian number fields.
//!
//! Given an abelian CM field k (presented by its group of Dirichlet characters)
//! and a prime p, the layers k_n of the cyclotomic Z_p-tower over k have
//! relative class numbers h_n^- that converge p-adically.  This crate computes
//! the limit together with a checkable certificate, and exposes the analytic
//! objects the limit factors through: generalized Bernoulli numbers, Dirichlet
//! and Kubota–Leopoldt L-values, Coleman norm-operator limits of power series,
//! and orders of K_2 of rings of integers of the real layers.  A small
//! finite-group module verifies the underlying fixed-point counting congruences
//! empirically on explicit p-groups.
//!
//! Layering (each module uses only earlier ones):
//!
//! * [`arith`] — exact rationals, cyclotomic integers (exact and mod p^N),
//!   p-adic numbers with precision tracking, Teichmüller lifts.
//! * [`characters`] — Dirichlet characters, abelian fields as character
//!   groups, tower layers, Galois orbits, root-of-unity counts.
//! * [`lvalues`] — generalized Bernoulli numbers, L-values at s = 0 and
//!   s = -1, p-adic L-values, orbit products.
//! * [`classno`] — relative class numbers of CM layers, two independent
//!   evaluation routes, p-adic limit certificates.
//! * [`coleman`] — truncated power series, the multiplicative norm operator,
//!   iterated-norm limits.
//! * [`limits`] — the tower-limit identity web: per-character limits, the
//!   scaled trivial-character constant, K_2 orders and their limits.
//! * [`groupcong`] — finite p-groups, modular representations, fixed-point
//!   congruences.

pub mod arith;
pub mod characters;
pub mod classno;
pub mod coleman;
pub mod error;
pub mod groupcong;
pub mod limits;
pub mod lvalues;

pub use error::{Error, Result};
