pub mod calib;
pub mod eval;
pub mod flow;
pub mod oracle;
pub mod rectify;
pub mod synth;
