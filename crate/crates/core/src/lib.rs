//! Drafting guided interviews from court forms.

pub mod context;
pub mod digest;
pub mod docx;
pub mod fixtures;
pub mod fsutil;
pub mod interview;
pub mod llm;
pub mod pdf;
pub mod pipeline;
