#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod counting;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod interferometer;
pub mod qstate;
pub mod tomography;

pub use error::{Error, Result};
