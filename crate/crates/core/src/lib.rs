pub mod landscape;
pub mod ldp;
pub mod sim;
pub mod graph;
pub mod energy;
pub mod stats;
pub mod config;
pub mod pipeline;
