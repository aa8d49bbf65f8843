//! Command-line tools and the review service.

pub mod cli;
pub mod inputs;
pub mod service;
pub mod session;
