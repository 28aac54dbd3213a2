//! Machines with access to information beyond their program: oracles,
//! inscribed tapes, input channels, error functions, asynchronous timing,
//! random choices and infinite state tables.

mod oracle;

pub use oracle::*;
mod channels;

pub use channels::*;
mod noise;

pub use noise::*;
mod network;

pub use network::*;
mod infinite;

pub use infinite::*;
mod web;

pub use web::*;
