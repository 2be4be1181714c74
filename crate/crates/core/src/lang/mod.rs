//! Text formats: the `.dfm` block-diagram language and the `.stl` property
//! language. Both are UTF-8, line-oriented, and documented in the README.

mod model_text;
mod stl_text;

pub use model_text::{
    block_declaration, line_declaration, parse_model, serialize_model, ModelErrorKind, ModelParseError,
};
pub use stl_text::{parse_stl, parse_stl_for_signals, parse_stl_with, StlParseError};
