//! Symmetric tensors, tensor norms, polynomial ideal norms and their
//! Aron-Berner extensions, computed numerically at small dimension.

pub mod atomic;
pub mod ball;
pub mod error;
pub mod daviegamelin;
pub mod extensions;
pub mod ideals;
pub mod norms;
mod lmfit;
mod simplex;
pub mod optim;
pub mod suites;
pub mod symtensor;

pub use ball::Ball;
pub use error::{Error, Result};
pub use optim::{maximize_abs, Maximum, OptBudget};
pub use symtensor::{polarize, sym_power, MultiIndex, SymMultilinearForm, SymTensor};
