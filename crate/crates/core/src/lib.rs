//! Exact-simulation toolkit for studying how depolarizing-style output noise
//! changes the accuracy of an equivariant quantum graph neural network.

pub mod analysis;
pub mod experiment;
pub mod graph_data;
pub mod model;
pub mod noise;
pub mod seeding;
pub mod simulator;
pub mod stats;
pub mod trainer;
pub mod validation;
