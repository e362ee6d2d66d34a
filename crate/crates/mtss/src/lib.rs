//! File formats, parallel evaluation, the chat loop and the `mtss` command
//! line on top of `mtss-core`.

pub mod chat;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod logs;
pub mod manifest;
pub mod multiwoz;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
