//! The `medsr` command-line tools and the preference-study service.

pub mod cli;
pub mod commands;
pub mod study;
