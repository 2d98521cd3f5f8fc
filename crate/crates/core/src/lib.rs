//! Skills-based matching simulation and fairness auditing.
//!
//! The crate ingests an occupation/skills taxonomy, simulates candidate-vacancy
//! matching data from it, vectorizes skill profiles with interchangeable text
//! vectorizers, scores profile pairs with static or learned metrics, and audits
//! each matching model for ranking performance (AUC) and gender segregation
//! risk (GSR). A 2-D PCA projection of occupation vectors is provided for
//! inspecting segregation structure directly.

pub mod evaluate;
pub mod linalg;
pub mod project;
pub mod rng;
pub mod scoring;
pub mod simulation;
pub mod taxonomy;
pub mod vectorize;
