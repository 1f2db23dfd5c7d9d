#![allow(clippy::needless_range_loop)]

//! Experiment harness around the `graphtest` library: single test runs on
//! CSV files, power studies, null-normality diagnostics, and a toy
//! implicit-model learning demo.

pub mod dataset;
pub mod diagnostics;
pub mod io;
pub mod learn;
pub mod power;
pub mod report;
pub mod stats_util;
pub mod svg;
