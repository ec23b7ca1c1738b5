pub mod coleman;
pub mod eigen;
pub mod error;
pub mod explicit;
pub mod gm_bridge;
pub mod interp;
pub mod ext;
mod modint;
pub mod lubin_tate;
pub mod okring;
pub mod profiles;
pub mod pseries;
pub mod ring;
pub mod suite;
pub mod tower;

pub use error::{ForgeError, Result};
pub use ext::Ext;
pub use okring::{OKConfig, OKElem, Ok, OkRing};
pub use ring::{Elem, ElemOps, Ring};
