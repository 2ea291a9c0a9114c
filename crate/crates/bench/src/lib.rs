pub use morsify_core::*;
