pub mod certsolver;
pub mod compression;
pub mod cones;
pub mod error;
pub mod expander;
pub mod group;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod metric;
pub mod oracle;
mod sdp;

pub use error::{Error, Result};
