//! Hop plans: per-packet channel and time schedule.

use crate::params::{
    DataRate, BLOCK_GAP_SAMPLES, CHANNELS_PER_GROUP, FRAGMENT_GUARD_SYMBOLS,
    HEADER_SYMBOLS, N_GROUPS, SAMPLES_PER_SYMBOL,
};
use crate::params::{data_coded_bits, fragment_layout};
use crate::types::{Block, BlockKind, HopPlan, PacketConfig};

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;

/// Within-group channel draws (0..35) for `n_blocks` hops of a sequence id.
pub fn hop_draws(hop_sequence_id: u16, n_blocks: usize) -> Vec<usize> {
    let mut x = (hop_sequence_id as u64) ^ 0x5DEE_CE66_D1CE_4E5B;
    let mut draw = || {
        x = x.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
        ((x >> 33) % CHANNELS_PER_GROUP as u64) as usize
    };
    let mut out: Vec<usize> = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let mut d = draw();
        if out.last() == Some(&d) {
            d = draw();
        }
        out.push(d);
    }
    out
}

pub fn channel_for_draw(group: u8, draw: usize) -> usize {
    (group as usize - 1) + N_GROUPS * draw
}

/// Symbol counts of the fragments of a payload.
pub fn fragment_symbol_counts(payload_len: usize, dr: DataRate) -> Vec<usize> {
    fragment_layout(data_coded_bits(payload_len, dr))
        .iter()
        .map(|r| r.len() + FRAGMENT_GUARD_SYMBOLS)
        .collect()
}

/// Plan with the first header at sample 0.
pub fn hop_plan_for(dr: DataRate, payload_len: usize, hop_sequence_id: u16, group: u8) -> HopPlan {
    let frags = fragment_symbol_counts(payload_len, dr);
    let n_hdr = dr.header_replicas();
    let draws = hop_draws(hop_sequence_id, n_hdr + frags.len());
    let sizes = std::iter::repeat_n((BlockKind::Header, HEADER_SYMBOLS), n_hdr)
        .chain(frags.into_iter().map(|n| (BlockKind::Fragment, n)));
    let mut t = 0i64;
    let blocks = sizes
        .zip(draws)
        .map(|((kind, n_symbols), d)| {
            let b = Block {
                kind,
                channel_index: channel_for_draw(group, d),
                start_sample: t,
                n_symbols,
            };
            t += (n_symbols * SAMPLES_PER_SYMBOL + BLOCK_GAP_SAMPLES) as i64;
            b
        })
        .collect();
    HopPlan { blocks }
}

pub fn make_hop_plan(cfg: &PacketConfig) -> HopPlan {
    hop_plan_for(cfg.data_rate, cfg.payload.len(), cfg.hop_sequence_id, cfg.group)
}

/// Samples from the start of header `i` to the start of header `i+1`.
pub const HEADER_PITCH_SAMPLES: usize = HEADER_SYMBOLS * SAMPLES_PER_SYMBOL + BLOCK_GAP_SAMPLES;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{n_fragments, SYMBOL_TIME_S};
    use proptest::prelude::*;

    #[test]
    fn block_counts() {
        let p = hop_plan_for(DataRate::Dr8, 16, 3, 2);
        assert_eq!(p.headers().count(), 3);
        assert_eq!(p.fragments().count(), 10);
        for len in 8..=16 {
            assert!((6..=10).contains(&n_fragments(len, DataRate::Dr8)));
            assert!((3..=5).contains(&n_fragments(len, DataRate::Dr9)));
        }
        assert_eq!(n_fragments(8, DataRate::Dr8), 6);
        assert_eq!(n_fragments(16, DataRate::Dr9), 5);
    }

    #[test]
    fn durations() {
        let dur = |dr, len| {
            let p = hop_plan_for(dr, len, 0, 1);
            let on_air: usize = p.blocks.iter().map(|b| b.n_samples()).sum();
            let span = p.total_samples();
            (on_air as f64 / 500_000.0, span as f64 / 500_000.0)
        };
        // transmitting time stays under the upper bounds, the full span above the lower ones
        assert!(dur(DataRate::Dr8, 16).0 <= 1.67);
        assert!(dur(DataRate::Dr8, 8).1 >= 1.26);
        assert!(dur(DataRate::Dr9, 16).0 <= 0.95);
        assert!(dur(DataRate::Dr9, 8).1 >= 0.75);
        assert!((HEADER_SYMBOLS as f64 * SYMBOL_TIME_S - 0.2335).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn plan_stays_in_group(hop in 0u16..512, group in 1u8..9, len in 8usize..17, dr9 in any::<bool>()) {
            let dr = if dr9 { DataRate::Dr9 } else { DataRate::Dr8 };
            let p = hop_plan_for(dr, len, hop, group);
            prop_assert_eq!(p.blocks.len(), dr.header_replicas() + n_fragments(len, dr));
            for b in &p.blocks {
                prop_assert!(b.channel_index < 280);
                prop_assert_eq!(b.channel_index % 8, (group - 1) as usize);
            }
            for w in p.blocks.windows(2) {
                prop_assert_eq!(w[1].start_sample, w[0].end_sample() + BLOCK_GAP_SAMPLES as i64);
                prop_assert!(!(w[0].kind == BlockKind::Fragment && w[1].kind == BlockKind::Header));
            }
            prop_assert_eq!(p.clone(), hop_plan_for(dr, len, hop, group));
        }
    }
}
