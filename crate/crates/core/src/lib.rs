//! Attention-consensus seed selection for frame-conditioned video diffusion,
//! with the surrounding pipeline needed to exercise it end to end on
//! synthetic data: spatiotemporal token grids, entropic optimal transport,
//! affine target-frame compositing, object-level video metrics, pairwise
//! rank alignment, and a deterministic fixture harness.
//!
//! Attention maps enter through the binary archive format in [`archive`];
//! nothing in this crate talks to a model. All operations are pure and
//! deterministic: given the same inputs (including RNG seeds) they produce
//! bitwise-identical outputs.

pub mod archive;
pub mod attention;
pub mod compositor;
pub mod consensus;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod rankeval;
pub mod raster;
pub mod sinkhorn;
