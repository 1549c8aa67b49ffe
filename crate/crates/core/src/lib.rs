//! Collaborative audio annotation: projects, users and label schemas,
//! machine ingestion of audio, time-aligned segments with transcriptions
//! and labels, seekable media delivery, deterministic JSON export, and
//! inter-annotator word error rate checks.
//!
//! Everything hangs off [`App`]; [`http::router`] exposes it over REST.

pub mod admin;
pub mod annotation;
pub mod app;
pub mod audio;
pub mod auth;
pub mod blob;
pub mod clock;
pub mod domain;
pub mod error;
pub mod export;
pub mod http;
pub mod faults;
pub mod ingest;
pub mod media;
pub mod qa;
pub mod store;
pub mod text;

pub use app::{App, AppBuilder, Settings};
pub use auth::{LoginToken, PasswordParams, Principal, Requirement};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Error, ErrorCode, Result};
