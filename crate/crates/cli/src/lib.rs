//! Batch front-end for the teacher-mixture toolkit: experiment configs,
//! shipped figure recipes, CSV tables and SVG heatmaps.

pub mod config;
pub mod recipes;
pub mod run;
pub mod svg;
pub mod table;
