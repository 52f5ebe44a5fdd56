//! Elastic principal graphs: fitting graphs of nodes and springs to point
//! clouds, growing them with graph grammars, and analysing the result.

pub mod analysis;
pub mod data;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod grammar;
pub mod graph;
pub mod init;
pub mod robust;
pub mod strategy;
pub mod synthetic;

pub use data::{NodeEmbedding, PointCloud};
pub use energy::{elastic_energy, total_energy, EnergyBreakdown, EnergyParams};
pub use error::{Error, Result};
pub use fit::{fit_embedding, partition_points, FitConfig, FitResult, Partition};
pub use grammar::{GrammarRule, OpKind};
pub use graph::{ElasticGraph, ElasticMatrix, Violation};
