//! Sock-puppet auditing of misinformation filter bubbles in personalized
//! video platforms.

pub mod annotation;
pub mod classifier;
pub mod domain;
pub mod metrics;
pub mod platform;
pub mod record;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod stats;
pub mod workflow;
