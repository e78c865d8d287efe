//! Configuration, orchestration and artifact export behind the
//! `convopt` binary.

pub mod config;
pub mod export;
pub mod manifest;
pub mod tasks;
