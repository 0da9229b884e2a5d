//! Model-driven web workflows: textual class, activity, page, and application
//! models, a linker that checks them against each other, and an engine that
//! executes activities over a persistent object store.

pub mod access;
pub mod engine;
pub mod fixture;
pub mod httpapi;
pub mod linker;
pub mod project;
pub mod store;
pub mod syntax;
pub mod value;
