//! Functionality-guided web navigation: plan a next step, rank and describe
//! the page's actionable elements, pick one on an annotated screenshot, act.

pub mod browser;
pub mod choices;
pub mod decider;
pub mod domain;
pub mod embeddings;
pub mod evalkit;
pub mod fixtures;
pub mod fsutil;
pub mod llm;
pub mod navigator;
pub mod planner;
pub mod raster;
