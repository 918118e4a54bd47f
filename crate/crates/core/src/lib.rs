//! Numerical laboratory for stochastic differential equations driven by
//! purely-jump Lévy processes.
//!
//! The crate simulates SDEs of the form
//!
//! ```text
//! dX_t = b(X_t) dt + sigma dL_t
//! dX_t = b(X_t) dt + sigma1(X_t) dW_t + sigma2(X_{t-}) dL_t
//! ```
//!
//! where `L_t` has a radially dominated Lévy measure, and verifies at desk
//! scale the Φ-entropy inequality for the associated semigroup, the
//! exponential entropy decay under the invariant measure, Poisson-space
//! identities (Mecke formula, add-one-point Girsanov density, the Φ-entropy
//! inequality for Poisson functionals), and Lyapunov drift conditions for
//! the existence of invariant probability measures.
//!
//! Module map:
//! - [`levy`]: radially dominated Lévy measures, moment integrals, jump sampling.
//! - [`kernels`]: driving-noise increments (exact stable, compound Poisson,
//!   small-jump Gaussian surrogate, Brownian).
//! - [`sde`]: Euler integration, couplings, invariant ensembles, flow Jacobians.
//! - [`entropy`]: Φ, Ψ_Φ, the jump carré du champ Γ_{Φ,ν}, the generator,
//!   entropy estimators, and the entropy-bound constants and decay rates.
//! - [`poisson`]: finite-intensity Poisson configurations and the identity checks.
//! - [`lyapunov`]: drift-condition brackets and classification reports.

pub mod entropy;
pub mod error;
pub mod kernels;
pub mod levy;
pub mod linalg;
pub mod lyapunov;
pub mod poisson;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod special;
pub mod stats;
#[cfg(test)]
pub(crate) mod test_oracles;

pub use error::{Error, Result};
