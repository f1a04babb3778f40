//! Numerical laboratory for interface solutions of `ε²□u + f(u) = 0` near
//! timelike minimal surfaces of Minkowski space.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod ansatz;
pub mod energy;
pub mod experiments;
pub mod fermi;
pub mod geometry;
pub mod jacobi;
pub mod nonlinearity;
pub mod numerics;
pub mod profile;
pub mod wave;
