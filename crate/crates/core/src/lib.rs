//! Recovery of lost accelerometer channels in structural monitoring records.
//!
//! The pipeline normalizes a multi-sensor record, cuts it into overlapping
//! square windows with the faulted sensors zeroed, and trains a small
//! convolutional network to predict the missing samples. Recovered records
//! are checked by operational modal analysis: natural frequencies and mode
//! shapes identified by frequency domain decomposition are compared with
//! the intact record through the modal assurance criterion.
//!
//! A synthetic modal-superposition generator supplies records whose true
//! frequencies and shapes are known.

pub mod cli;
pub mod error;
pub mod modal;
pub mod nn;
pub mod recovery;
pub mod seed;
pub mod signal;
pub mod synth;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/records.md")]
    mod records {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/recovery.md")]
    mod recovery {}
    #[doc = include_str!("../../../book/src/modal.md")]
    mod modal {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
