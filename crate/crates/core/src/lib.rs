pub mod allocation;
pub mod deployment;
pub mod drcc;
pub mod error;
pub mod evaluation;
pub mod linkmodel;
pub mod offload_search;
pub mod orchestrator;
pub mod scenario;

pub use error::{Error, Result};
