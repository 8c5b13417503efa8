//! Reconstruction of a CT object undergoing an unknown affine motion.
//!
//! The hybrid scheme has three stages:
//!
//! 1. a few sweeps of RESESOP-Kaczmarz ([`resesop`]) give coarse images of
//!    the object at the first and the last time point, treating the motion
//!    as a per-ray inexactness of the static model ([`dynamic`]);
//! 2. the corners of a rectangular landmark are located in both images
//!    ([`landmarks`]) and an affine motion is fitted to them ([`motion`]);
//! 3. dynamic filtered backprojection with the fitted motion ([`fbp`])
//!    produces the final high resolution image.
//!
//! All geometry lives on `[-1, 1]²` with the object inside the unit disk.
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dynamic;
mod error;
pub mod fbp;
pub mod geometry;
pub mod landmarks;
mod linalg;
pub mod motion;
pub mod radon;
pub mod resesop;

pub use error::{Error, Result};
pub use geometry::{Image, ImageGrid, RectanglePhantom};
pub use linalg::{Mat2, Vec2};
pub use motion::AffineMotion;
pub use radon::{ScanGeometry, Sinogram};
