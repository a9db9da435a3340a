//! CPS λ-calculus: syntax, parser and conversion from direct style.

mod convert;
mod parse;
mod syntax;

pub use convert::{cps_convert, cps_convert_to_text, ConvertError};
pub use parse::{parse_cps, CpsParseError};
pub use syntax::*;
