//! Row-write, column-read block interleaver; absent cells of a short last row are skipped.

/// `perm[k]` is the input index emitted at output position k.
pub fn permutation(n: usize, rows: usize) -> Vec<usize> {
    let rows = rows.max(1);
    let cols = n.div_ceil(rows);
    let mut perm = Vec::with_capacity(n);
    for c in 0..cols {
        for r in 0..rows {
            let i = r * cols + c;
            if i < n {
                perm.push(i);
            }
        }
    }
    perm
}

pub fn interleave<T: Copy>(bits: &[T], rows: usize) -> Vec<T> {
    permutation(bits.len(), rows).into_iter().map(|i| bits[i]).collect()
}

pub fn deinterleave<T: Copy + Default>(bits: &[T], rows: usize) -> Vec<T> {
    let mut out = vec![T::default(); bits.len()];
    for (k, i) in permutation(bits.len(), rows).into_iter().enumerate() {
        out[i] = bits[k];
    }
    out
}
