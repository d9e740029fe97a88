pub mod error;
pub mod linalg;
pub mod lmi;
pub mod objectives;
pub mod discrete;
pub mod hybrid;
pub mod sdp;

pub use error::{Error, Result};
