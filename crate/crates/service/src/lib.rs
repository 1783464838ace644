//! HTTP API, pipeline stages and CLI for the device search engine.

pub mod api;
pub mod cli;
pub mod live;
pub mod pipeline;
