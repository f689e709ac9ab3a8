//! Exact polynomials, order-4 jets and the chain-rule rate oracle.

pub mod jet;
pub mod number;
pub mod oracle;
pub mod poly;

pub use jet::{jet_combine, jet_exp, jet_from_poly, jet_power, Combine, Jet, JET_ORDER};
pub use number::{Ext, ExtField, Q};
pub use oracle::{expanded_rate_terms, log_expansion_audit, w11_rate_oracle, RateTerm};
pub use poly::{MultiIndex, Poly};
