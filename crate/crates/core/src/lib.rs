//! Interactive volume lines for multi-field AMR data.
//!
//! Cells are ordered along a 3D Hilbert curve and laid out on a 1D plot whose
//! spacing grows with the local spread of the fields' transfer-function alpha
//! and with cell size. The [`pipeline`] module recomputes that layout and the
//! per-pixel plot after every transfer-function or parameter change; [`roi`]
//! links brushed plot ranges back to spatial cells.

pub mod amr;
pub mod bench;
pub mod error;
pub mod hilbert;
pub mod pipeline;
pub mod roi;
pub mod study;
pub mod synth;
pub mod transfer;

pub use amr::{Cell, Dataset, ScalarField, SpatialIndex};
pub use error::{IvlError, Result};
pub use hilbert::HilbertCode;
pub use pipeline::{run_pipeline, ExecMode, PipelineOutput, PipelineParams, PlotMode};
pub use roi::{Axis, Roi, SliceImage};
pub use transfer::TransferFunction;
