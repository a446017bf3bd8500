//! Files, configuration and the policy comparison runner around
//! `evcharge-core`.

pub mod compare;
pub mod config;
pub mod evaluate;
pub mod io;
