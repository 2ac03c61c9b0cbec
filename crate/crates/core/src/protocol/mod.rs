//! Federated exchange between a buyer and remote sellers.
//!
//! Frames are a `u32` little-endian byte length followed by one UTF-8 JSON
//! object tagged by `"type"` (`query`, `report` or `error`). A seller answers
//! each query frame with exactly one reply frame.

mod client;
mod decoy;
mod server;
mod wire;

pub use client::query_seller;
pub use decoy::{
    decoy_ratio, honesty_screen, make_decoys, random_frame, screen_orientation, screen_seller, Decoy, DecoyPlan,
    DecoyStrategy, ReportPair, ScreenOutcome, ScreeningResult,
};
pub use server::{answer, serve_seller, SellerService, ServeConfig};
pub use wire::{
    encode, read_frame, write_frame, Frame, Message, QueryMessage, ReportMessage, DEFAULT_FRAME_LIMIT, DEFAULT_PORT,
};
