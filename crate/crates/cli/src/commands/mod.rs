pub mod attack;
pub mod dither;
pub mod evaluate;
pub mod gradcheck;
pub mod probe;
pub mod sweep;
pub mod train;
