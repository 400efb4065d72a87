//! Point-cloud shape completion by latent-space optimization.
//!
//! An autoencoder and a GAN over its 128-d global feature vectors are trained
//! on clean shapes ([`pipeline`]). A corrupted cloud is then completed by
//! searching the generator's latent space for a vector whose decoded cloud
//! fits the observed points while staying on the learned manifold ([`ldo`]).

pub mod autodiff;
pub mod corrupt;
pub mod ldo;
pub mod nets;
pub mod pipeline;
pub mod seeds;
pub mod shapes_io;
pub mod transport;

pub use transport::{Matching, PointCloud};
