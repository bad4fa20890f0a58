pub mod benchmark;
pub mod eval;
pub mod gen_data;
pub mod gradcheck;
pub mod saliency;
pub mod train;
