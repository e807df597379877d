//! Numerical tools for the periodic operator `L u = iε(f u')' + i u'` with a
//! degenerate coefficient `f` vanishing at `0` and `±π`.
//!
//! The pipeline runs from the coefficient profile to the spectrum and the
//! resolvent:
//!
//! * [`profiles`] defines `f` and the model `(f, ε)`;
//! * [`singular`] builds the integrating factor `p` and local endpoint series;
//! * [`shooting`] integrates the fundamental solutions `φ` and `ψ`;
//! * [`eigensolve`] locates real eigenvalues;
//! * [`green`] assembles the Green function and applies the resolvent;
//! * [`schatten`] measures singular values and Schatten norms.

pub mod cli;
pub mod config;
pub mod eigensolve;
pub mod error;
pub mod green;
pub mod ode;
pub mod profiles;
pub mod quadrature;
pub mod schatten;
pub mod shooting;
pub mod singular;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/integrating-factor.md")]
    mod integrating_factor {}
    #[doc = include_str!("../../../book/src/fundamental-solutions.md")]
    mod fundamental_solutions {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/resolvent.md")]
    mod resolvent {}
    #[doc = include_str!("../../../book/src/schatten.md")]
    mod schatten {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
