//! Command-line driver for caulking experiments: config loading, file formats,
//! CSV tables, SVG plots and run manifests on top of `caulk-core`.

pub use caulk_core as core;

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod manifest;
pub mod plots;
pub mod svg;
pub mod tables;
