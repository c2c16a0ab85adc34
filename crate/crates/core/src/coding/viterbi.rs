//! Soft-decision Viterbi decoding with a squared-Euclidean branch metric.
//!
//! Soft value +1 stands for coded bit 1 and −1 for 0; erased positions add no metric.

use super::conv::{puncture_mask, DATA_MEMORY, DATA_POLYS, HEADER_MEMORY, HEADER_POLYS};
use crate::params::DataRate;
use crate::types::SoftSymbol;

pub struct Trellis {
    memory: usize,
    n_out: usize,
    /// outputs[state * 2 + u] as ±1 expectations, n_out each
    outputs: Vec<f64>,
}

impl Trellis {
    pub fn new(polys: &[u32], memory: usize) -> Self {
        let n_states = 1usize << memory;
        let mut outputs = Vec::with_capacity(n_states * 2 * polys.len());
        for s in 0..n_states {
            for u in 0..2u32 {
                let reg = (u << memory) | s as u32;
                for &p in polys {
                    outputs.push(if (reg & p).count_ones() & 1 == 1 { 1.0 } else { -1.0 });
                }
            }
        }
        Trellis {
            memory,
            n_out: polys.len(),
            outputs,
        }
    }

    pub fn header() -> Self {
        Self::new(&HEADER_POLYS, HEADER_MEMORY)
    }

    pub fn data() -> Self {
        Self::new(&DATA_POLYS, DATA_MEMORY)
    }

    pub fn n_states(&self) -> usize {
        1 << self.memory
    }

    /// Path cost of a specific input sequence.
    pub fn path_cost(&self, soft: &[SoftSymbol], bits: &[u8], initial_state: usize) -> f64 {
        let mut s = initial_state;
        let mut cost = 0.0;
        for (t, &u) in bits.iter().enumerate() {
            let o = &self.outputs[(s * 2 + u as usize) * self.n_out..][..self.n_out];
            for (k, &x) in o.iter().enumerate() {
                let y = soft[t * self.n_out + k];
                if !y.erased {
                    cost += (y.value - x) * (y.value - x);
                }
            }
            s = ((u as usize) << (self.memory - 1)) | (s >> 1);
        }
        cost
    }

    /// ML input sequence from `initial_state`; ends in `final_state` if given, else the best state.
    /// Ties keep the lower-numbered predecessor and the lower-numbered end state.
    pub fn decode(
        &self,
        soft: &[SoftSymbol],
        initial_state: usize,
        final_state: Option<usize>,
    ) -> (Vec<u8>, f64) {
        let n_states = self.n_states();
        let n_steps = soft.len() / self.n_out;
        let half = n_states / 2;
        let mut metric = vec![f64::INFINITY; n_states];
        metric[initial_state] = 0.0;
        let mut next = vec![0.0; n_states];
        let mut decisions = vec![0u64; n_steps];
        let mut branch = vec![0.0; n_states * 2];
        for (t, dec) in decisions.iter_mut().enumerate() {
            let y = &soft[t * self.n_out..(t + 1) * self.n_out];
            for (b, o) in branch.iter_mut().zip(self.outputs.chunks_exact(self.n_out)) {
                *b = y
                    .iter()
                    .zip(o)
                    .filter(|(s, _)| !s.erased)
                    .map(|(s, &x)| (s.value - x) * (s.value - x))
                    .sum();
            }
            let mut d = 0u64;
            for (ns, nm) in next.iter_mut().enumerate() {
                let u = ns / half;
                let p0 = (ns % half) << 1;
                let p1 = p0 | 1;
                let m0 = metric[p0] + branch[p0 * 2 + u];
                let m1 = metric[p1] + branch[p1 * 2 + u];
                if m1 < m0 {
                    *nm = m1;
                    d |= 1 << ns;
                } else {
                    *nm = m0;
                }
            }
            *dec = d;
            std::mem::swap(&mut metric, &mut next);
        }
        let end = match final_state {
            Some(s) => s,
            None => {
                let mut best = 0;
                for s in 1..n_states {
                    if metric[s] < metric[best] {
                        best = s;
                    }
                }
                best
            }
        };
        let cost = metric[end];
        let mut bits = vec![0u8; n_steps];
        let mut ns = end;
        for t in (0..n_steps).rev() {
            bits[t] = (ns / half) as u8;
            ns = ((ns % half) << 1) | ((decisions[t] >> ns) & 1) as usize;
        }
        (bits, cost)
    }
}

/// Re-inserts punctured positions as erasures so the stream aligns with the mother code.
pub fn depuncture(soft: &[SoftSymbol], n_input: usize, dr: DataRate) -> Vec<SoftSymbol> {
    let mask = puncture_mask(n_input, dr);
    let mut it = soft.iter();
    mask.iter()
        .map(|&keep| {
            if keep {
                *it.next().unwrap_or(&SoftSymbol::erasure())
            } else {
                SoftSymbol::erasure()
            }
        })
        .collect()
}

/// Decodes a data codeword (starts and ends in state 0). Returns all input bits including the tail.
pub fn viterbi_data(soft: &[SoftSymbol], dr: DataRate) -> (Vec<u8>, f64) {
    let n_input = match dr {
        DataRate::Dr8 => soft.len() / 3,
        DataRate::Dr9 => (2 * soft.len()) / 3,
    };
    let mother = depuncture(soft, n_input, dr);
    data_trellis().decode(&mother, 0, Some(0))
}

/// Tries all 16 initial states; returns (bits, initial_state, cost), lowest state on ties.
pub fn viterbi_header(soft: &[SoftSymbol]) -> (Vec<u8>, u8, f64) {
    let tr = header_trellis();
    let mut best: Option<(Vec<u8>, u8, f64)> = None;
    for s in 0..tr.n_states() {
        let (bits, cost) = tr.decode(soft, s, None);
        if best.as_ref().is_none_or(|b| cost < b.2) {
            best = Some((bits, s as u8, cost));
        }
    }
    best.expect("16 states tried")
}

fn header_trellis() -> &'static Trellis {
    static T: std::sync::OnceLock<Trellis> = std::sync::OnceLock::new();
    T.get_or_init(Trellis::header)
}

fn data_trellis() -> &'static Trellis {
    static T: std::sync::OnceLock<Trellis> = std::sync::OnceLock::new();
    T.get_or_init(Trellis::data)
}
