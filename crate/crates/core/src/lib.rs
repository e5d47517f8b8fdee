//! Analysis toolkit for inter-firm bank-transfer networks.

pub mod bowtie;
pub mod community;
pub mod geonmf;
pub mod hodge;
pub mod ingest;
pub mod network;
pub mod pipeline;
pub mod svg;
pub mod synth;
