pub mod channel;
pub mod codec;
pub mod error;
pub mod evalx;
pub mod optim;
pub mod probkit;
pub mod rng;
pub mod zeroinfo;
pub mod format;
pub mod regions;
