//! Role-scoped university inventory: assets, users, requests, search, review,
//! error reports and backups behind one [`Uuis`] service value.

pub mod assets;
pub mod auth;
pub mod clock;
pub mod config;
pub mod csvio;
pub mod domain;
pub mod error_reports;
pub mod error;
pub mod gateway;
mod lookup;
pub mod page;
pub mod password;
pub mod render;
pub mod requests;
pub mod review;
pub mod search;
mod service;
pub mod store;
pub mod university;

pub use auth::{Actor, Session, UserProfile};
pub use clock::{Clock, ManualClock, SystemClock};
pub use config::Config;
pub use domain::{
    AffiliationKind, AffiliationScope, AfflnId, Hierarchy, ItemId, PermissionLevel, PermissionSignature, UserId,
    UserRole,
};
pub use error::{Error, Issue, Result};
pub use service::Uuis;
