//! Rolling-shutter image formation and a classical correction toolkit.
//!
//! The crate synthesizes rolling-shutter and blurred frames from high frame
//! rate global-shutter sequences, estimates dense displacement with a
//! coarse-to-fine variational solver, rectifies rolling-shutter frames by
//! inverting the row timing, and provides the supporting pieces: bilinear
//! warping with analytic adjoints, deformable convolution and channel
//! attention kernels, homography and color calibration, and PSNR/SSIM.

pub mod calib;
pub mod error;
pub mod flowsolve;
pub mod formation;
pub mod imagecore;
pub mod metrics;
pub mod nnkernels;
pub mod rectify;
pub mod sampling;
pub mod scene;
pub mod tensor;
pub mod warp;

pub use error::{Error, Result};
pub use imagecore::{Frame, FrameSequence, ShutterParams};
