pub mod coflow;
pub mod harness;
pub mod dataplane;
pub mod monitors;
pub mod simcore;
pub mod topology;
pub mod transport;
pub mod world;
