pub mod controller;
pub mod exec;
pub mod frac;
pub mod geometry;
pub mod graph;
pub mod report;
pub mod scenario;
pub mod sim;
