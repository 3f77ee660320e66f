//! Exact and numeric verification toolkit for the local machinery of GL(n).
//!
//! The crate is organized as a tower: exact scalars ([`exactnum`]), a
//! symmetric-function and matrix-identity engine ([`symfun`]), Weyl-group
//! double-coset combinatorics ([`weylcoset`]), exact p-local linear algebra
//! ([`padiclinalg`]), unramified Whittaker functions and truncated zeta
//! integrals ([`whittaker`]), old-form bases and their periods ([`oldforms`]),
//! and Plancherel densities with quadrature checks ([`plancherel`]).
//!
//! Every closed-form identity implemented here is cross-checked against an
//! independent brute-force oracle (lattice sums, contour quadrature, coset
//! enumeration, exhaustive search); the named check suites live in
//! [`suites`] and power both the test harness and the CLI.

pub mod exactnum;
pub mod symfun;
pub mod weylcoset;
pub mod padiclinalg;
pub mod whittaker;
pub mod oldforms;
pub mod plancherel;
pub mod report;
pub mod suites;

pub(crate) mod numeric;

/// Default comparison tolerance for the numeric backend.
pub const DEFAULT_TOL: f64 = 1e-9;
