//! Learning-from-observation pipeline: compile demonstration recordings into
//! machine-independent task-model programs and run them on a simulated robot.

pub mod contact;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod grasp;
pub mod laban;
pub mod linalg;
pub mod scalar;
pub mod taskmodel;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3f = linalg::Vec3<f64>;
pub type Vec3f32 = linalg::Vec3<f32>;
pub type Mat3f = linalg::Mat3<f64>;
pub type Posef = linalg::Pose<f64>;
