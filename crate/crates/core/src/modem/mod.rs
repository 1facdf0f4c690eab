//! QPSK subchannel link: modulation, pulse shaping, the multi-stream
//! transmitter and the beam × stream decode grid.

mod decode;
mod link;
mod pulse;
mod qpsk;

pub use decode::{
    decode_cell, decode_grid, decode_grid_analog, sync_trial_count, DecodeGridResult, GridCell, SyncBudget,
    SyncMode, CONSTELLATION_POINTS, LOCK_THRESHOLD,
};
pub use link::{
    build_subchannel, matched_filter, transmit_scene, zadoff_chu_preamble, SubchannelPlan, TxStreamSpec,
    PREAMBLE_SYMBOLS,
};
pub use pulse::{rrc_taps, ROLLOFF, SPAN_SYMBOLS};
pub use qpsk::{ber, evm_percent, qpsk_demodulate, qpsk_modulate};
