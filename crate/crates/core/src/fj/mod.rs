//! A Featherweight-Java-style object language in A-normal form.

mod concrete;
mod kcfa;
mod parse;
mod repr;
mod syntax;

pub use concrete::*;
pub use kcfa::*;
pub use parse::{parse_fj, FjParseError};
pub use repr::{render_env, AAddr, CollapsedEnv, CollapsedRepr, MapRepr, Repr};
pub use syntax::*;
