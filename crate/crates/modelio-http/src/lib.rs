//! HTTP transport for the `/v1/classify` and `/v1/generate` protocol: a blocking
//! client with retries and an in-flight limit, and an axum server over the mock backends.

pub mod client;
pub mod server;

pub use client::{HttpClient, HttpConfig};
pub use server::{router, serve, MockServer};

pub const CLASSIFY_PATH: &str = "/v1/classify";
pub const GENERATE_PATH: &str = "/v1/generate";
