//! Independent reference implementations used by property and acceptance
//! tests. Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

pub mod layout;
pub mod offsets;
pub mod trees;
