//! Files, configuration and command-line driver around [`seirdv_core`].
//!
//! - [`ingest`]: JHU CSSE time series to the canonical `t,I,R_I,D,V` table.
//! - [`config`]: the JSON run configuration.
//! - [`formats`]: CSV/JSON outputs and checksums.
//! - [`parallel`]: rayon versions of the chain and per-draw loops.
//! - [`commands`]: `ingest`, `fit` and `analyze`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod ingest;
pub mod parallel;

pub use error::{Error, Result};
pub use seirdv_core as core;
