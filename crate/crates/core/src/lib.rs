//! Map-based visual geo-localization for aerial vehicles.
//!
//! Offline, a pose grid over a textured terrain is rendered into color and
//! depth views whose local features and VLAD global descriptors form a
//! database. Online, a query image is matched against that database and its
//! 6-DOF pose is recovered with depth-lifted PnP and RANSAC, then reported in
//! geographic coordinates.
//!
//! The geometric core ([`geodesy`], [`camera`], [`math`], the PnP solvers in
//! [`localize`]) is generic over [`Real`]; the aliases below fix it to `f64`
//! (and `f32` where single precision is useful).

mod binio;
pub mod camera;
pub mod database;
pub mod error;
pub mod eval;
pub mod features;
pub mod geodesy;
pub mod imageio;
pub mod localize;
pub mod math;
pub mod posegrid;
pub mod scalar;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = math::Vec3<f64>;
pub type Mat3 = math::Mat3<f64>;
pub type GeoPoint = geodesy::GeoPoint<f64>;
pub type LocalPoint = geodesy::LocalPoint<f64>;
pub type LocalFrame = geodesy::LocalFrame<f64>;
pub type Camera = camera::CameraModel<f64>;
pub type Pose = camera::PoseSE3<f64>;
pub type Extrinsics = camera::Extrinsics<f64>;

pub type GeoPoint32 = geodesy::GeoPoint<f32>;
pub type LocalPoint32 = geodesy::LocalPoint<f32>;
pub type Camera32 = camera::CameraModel<f32>;
pub type Pose32 = camera::PoseSE3<f32>;
