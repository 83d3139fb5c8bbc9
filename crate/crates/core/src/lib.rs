//! Fast simulation of word error rates for linear block codes on the binary
//! symmetric channel.
//!
//! The crate provides GF(2) primitives ([`gf2`]), code construction and file
//! formats ([`codes`]), decoders exposing a decoding-error indicator
//! ([`decoders`]), channel sampling with reproducible streams ([`channel`]),
//! Monte-Carlo and importance-sampling estimators ([`estimators`]), and an
//! exact enumeration oracle with closed-form variance analysis ([`exact`]).

pub mod channel;
pub mod cli;
pub mod codes;
pub mod decoders;
pub mod estimators;
pub mod exact;
pub mod gf2;
mod optimize;
