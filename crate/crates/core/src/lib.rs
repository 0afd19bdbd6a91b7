//! Two-time-scale gradient descent ascent (GDA), stochastic GDA and
//! extra-gradient on quadratic nonconvex-strongly-concave minimax problems,
//! together with the spectral machinery that certifies when and how fast
//! these dynamics converge.

pub mod linalg;
pub mod problems;
pub mod dynamics;
pub mod spectral;
pub mod exec;
pub mod harness;
