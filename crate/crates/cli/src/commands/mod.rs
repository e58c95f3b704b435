pub mod analyze;
pub mod report;
pub mod simulate;
pub mod tensor;
pub mod train;
pub mod verify;
