//! Frame and sequence types, PNG I/O and sRGB conversion.
//!
//! Everything downstream works in linear light; the sRGB transfer is applied
//! only when reading or writing files.

mod color;
mod frame;
mod io;

pub use color::{convert_transfer, linear_to_srgb, srgb_to_linear, Transfer, TransferDirection};
pub use frame::{Frame, FrameSequence, ShutterParams};
pub use io::{encode_png, encode_sample, load_image, load_sequence, save_image, BitDepth, SequenceManifest};
