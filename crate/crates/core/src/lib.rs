//! Detection of hidden multi-family housing from aerial imagery, and
//! allocation of census canvassing effort.

pub mod allocation;
pub mod apportion;
pub mod dataset;
pub mod discovery;
pub mod eval;
pub mod geodata;
pub mod model;
pub mod records;
mod scalar;

pub use scalar::Scalar;

pub type Tensor64 = model::Tensor<f64>;
pub type Tensor32 = model::Tensor<f32>;
pub type TrainedModel64 = model::TrainedModel<f64>;
pub type TrainedModel32 = model::TrainedModel<f32>;
pub type Tile = geodata::ImageTile<f64>;
pub type Tile32 = geodata::ImageTile<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
