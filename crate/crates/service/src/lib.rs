//! Network front end for the crowd simulator: the line-delimited JSON
//! control protocol, the TCP server that speaks it, and the cycle-time
//! benchmark.

pub mod bench;
pub mod protocol;
pub mod server;
