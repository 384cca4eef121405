//! HTTP session service for interactive volume lines.
//!
//! One process holds one dataset. Configuration updates are versioned and
//! recomputed in the background with latest-wins cancellation; see
//! [`session`] for the delivery rules and the README for the endpoints.

pub mod api;
pub mod error;
pub mod session;

pub use api::router;
pub use error::ApiError;
pub use session::{Session, Settings};
