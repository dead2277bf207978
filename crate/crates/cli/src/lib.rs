//! Experiment orchestration and report emission for the cylindrical stable
//! process toolkit. The binary in this crate exposes the estimators and
//! checkers as subcommands; the experiment catalog lives in
//! [`experiments`].

pub mod experiments;
pub mod svg;
