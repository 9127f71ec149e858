//! Displacement fields, backward (gather) and forward (splat) warping with
//! analytic derivatives, and image pyramids.

mod backward;
mod field;
mod forward;
mod pyramid;

pub use backward::{backward_warp, backward_warp_grad};
pub use field::{DisplacementField, ValidityMask};
pub use forward::{forward_warp, splat, Splat, DEFAULT_MIN_WEIGHT};
pub use pyramid::{build_pyramid, downsample, upsample_field, Pyramid};
