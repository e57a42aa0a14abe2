pub mod error;
pub mod model;
pub mod steady_state;
pub mod time_domain;
pub mod demod;
pub mod pump_probe;
pub mod intermodal;
pub mod config;
pub mod export;
pub mod runner;
