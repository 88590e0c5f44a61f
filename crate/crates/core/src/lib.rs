pub mod cloud;
pub mod cluster;
pub mod config;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod pipeline;
pub mod propagate;
pub mod segment;
pub mod superpoint;
pub mod svg;
pub mod synth;
pub mod tsne;
pub mod voxel;

pub use cloud::{Point3, PointCloud, SemanticClass};
pub use error::{Error, Result};
