//! Shape classification of 2D vector polygons with graph message passing.
//!
//! The crate covers the whole pipeline: polygon geometry and augmentation
//! ([`geometry`]), graph encoding ([`graph`]), a small reverse-mode autodiff
//! engine ([`tensor`]), the PolyMP / DeepSet / GCN / VeerCNN classifiers
//! ([`models`]), training and evaluation ([`training`]), and synthetic
//! dataset construction ([`dataset`]).

pub mod dataset;
pub mod geometry;
pub mod gradcheck;
pub mod graph;
pub mod models;
pub mod tensor;
pub mod training;

pub use dataset::{Dataset, DatasetError, Sample};
pub use geometry::{GeometryError, LinearRing, Point2, Polygon, TransformTag};
pub use graph::{GraphBatch, GraphError, PolyGraph};
pub use models::{Arch, Model, ModelConfig, ModelParams};
pub use tensor::{Tape, Tensor, TensorError, Var};
pub use training::{evaluate, fine_tune, train, EvalReport, TrainConfig, TrainError};
