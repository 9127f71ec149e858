pub mod calib;
pub mod flow;
pub mod formation;
pub mod gradients;
pub mod kernels;
pub mod metrics;
pub mod rectify;
