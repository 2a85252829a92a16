//! HTTP and WebSocket front end for teleoperation sessions.

pub mod api;
pub mod error;
pub mod headless;
pub mod protocol;
pub mod state;
pub mod store;
pub mod stream;

pub use api::router;
pub use error::ApiError;
pub use state::AppState;
