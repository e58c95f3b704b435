//! Signed-zero ternary quantization: a four-word code alphabet in which the
//! dead zone keeps the sign of the latent weight, plus the numerical and
//! Monte Carlo machinery used to study it.

pub mod analysis;
pub mod code;
pub mod dense;
pub mod error;
pub mod grad;
pub mod kernel;
pub mod numerics;
pub mod prior;
pub mod quantizer;
pub mod rng;
pub mod sim;
pub mod tensor;
pub mod train;
pub mod verify;

pub use code::{pack_codes, unpack_codes, TernaryCode};
pub use error::{Result, SztError};
pub use prior::Prior;
pub use rng::RandomSource;
pub use tensor::{Granularity, PackedTernaryTensor};
