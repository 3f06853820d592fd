//! Bit-level storage of quantized neural-network weights under raw bit errors.
//!
//! The crate covers the whole path from a trained real-valued network to an
//! accuracy-versus-RBER curve:
//!
//! * [`codec`] maps weights to quantization indices and indices to q-bit words
//!   (binary expansion, reflected Gray code, Hamming-weight ranked order and
//!   IEEE-754 binary16).
//! * [`distortion`] measures how far single and multiple bit flips move the
//!   decoded index under each bijection.
//! * [`channel`] flips stored bits through a seeded binary symmetric channel.
//! * [`nulling`] wraps data words with an even-parity check bit and decodes
//!   detected-erroneous words to zero.
//! * [`model`] holds the NNSB bundle format and a small feedforward engine.
//! * [`harness`] runs RBER sweeps and summarizes them.

pub mod channel;
pub mod codec;
pub mod distortion;
pub mod error;
pub mod harness;
pub mod model;
pub mod nulling;

pub use error::{Error, Result};
