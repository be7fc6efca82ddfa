//! The guide's chapters, compiled as doc modules so every snippet in the
//! book runs under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/bus.md")]
pub mod bus {}
#[doc = include_str!("../../../book/src/plant.md")]
pub mod plant {}
#[doc = include_str!("../../../book/src/localization.md")]
pub mod localization {}
#[doc = include_str!("../../../book/src/control.md")]
pub mod control {}
#[doc = include_str!("../../../book/src/halo.md")]
pub mod halo {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/fmeca.md")]
pub mod fmeca {}
