//! Impedance-based model of a link assisted by a reconfigurable intelligent
//! surface, with load optimization that ignores or accounts for mutual
//! coupling between the surface elements.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod config;
pub mod em_model;
pub mod harness;
pub mod numerics;
pub mod optimizer_mc;
pub mod optimizer_nc;
