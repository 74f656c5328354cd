pub mod clustering;
pub mod cpd;
pub mod decomposition;
pub mod discretize;
pub mod equivalence;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod tensor;
pub mod transforms;

pub use decomposition::{Decomposition, Mode, StackedFactors};
pub use error::{Error, Result};
pub use transforms::InvarianceTransform;
pub use tensor::MatMulTensor;

/// Double-precision aliases; the numerical routines are generic over [`scalar::Real`].
pub type Decomposition64 = Decomposition<f64>;
pub type Decomposition32 = Decomposition<f32>;
pub type Transform64 = InvarianceTransform<f64>;
pub type Transform32 = InvarianceTransform<f32>;
pub type Certificate64 = equivalence::EquivalenceCertificate<f64>;
pub type Certificate32 = equivalence::EquivalenceCertificate<f32>;
