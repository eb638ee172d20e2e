//! Fast impulsive two-qubit gates for trapped ions, with the effect of RF
//! micromotion on the state-dependent kicks.

pub mod integrate;
pub mod mathieu;
pub mod quadrature;
pub mod trapmodel;
pub mod gatescheme;
pub mod fidelity;
pub mod odeoracle;
pub mod optimizer;
pub mod robustness;
