#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bour;
pub mod cusps;
pub mod deform;
pub mod export;
pub mod expr;
pub mod interp;
pub mod invariants;
pub mod jet;
pub mod natural;
pub mod profile;
pub mod quad;
