pub mod align;
pub mod induce;
pub mod probe;
pub mod summary;
pub mod synth;
