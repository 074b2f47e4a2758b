pub mod model;
pub mod sim;
pub mod messenger;
pub mod agents;
pub mod controller;
pub mod harness;
