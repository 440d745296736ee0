pub mod composite;
pub mod eval_obj;
pub mod rank_align;
pub mod sample_placements;
pub mod select_seed;
pub mod synth;
