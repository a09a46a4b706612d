pub mod checker;
pub mod document;
pub mod ids;
pub mod markup;
pub mod pretty;
pub mod protocol;
pub mod service;
pub mod session;
pub mod syntax;
pub mod yxml;
