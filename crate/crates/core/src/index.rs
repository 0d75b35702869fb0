//! Binary codes: sign binarization, bit packing, exact Hamming k-NN by
//! linear popcount scan, and mean average precision.
//!
//! Packed layout: each code occupies `⌈L/8⌉` bytes; bit `j` lives in byte
//! `j / 8` at position `j % 8` (LSB first), set when the code value is +1.
//! Trailing pad bits are zero.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Entry-wise sign with `sign(0) = +1`.
pub fn binarize(f: &Matrix) -> Matrix {
    f.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

#[inline]
pub fn bytes_per_code(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// `n` bit-packed codes of `bits` bits each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCodes {
    n: usize,
    bits: usize,
    payload: Vec<u8>,
}

impl PackedCodes {
    /// Wraps a raw payload after checking its length and pad bits.
    pub fn from_payload(n: usize, bits: usize, payload: Vec<u8>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("codes must have at least one bit"));
        }
        let stride = bytes_per_code(bits);
        if payload.len() != n * stride {
            return Err(Error::invalid(format!(
                "payload has {} bytes, expected {n} x {stride}",
                payload.len()
            )));
        }
        if !bits.is_multiple_of(8) {
            let pad_mask = !((1u8 << (bits % 8)) - 1);
            for i in 0..n {
                if payload[(i + 1) * stride - 1] & pad_mask != 0 {
                    return Err(Error::invalid(format!("code {i} has non-zero pad bits")));
                }
            }
        }
        Ok(PackedCodes { n, bits, payload })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn stride(&self) -> usize {
        bytes_per_code(self.bits)
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    #[inline]
    pub fn code(&self, i: usize) -> &[u8] {
        let s = self.stride();
        &self.payload[i * s..(i + 1) * s]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.payload.chunks_exact(self.stride().max(1)).take(self.n)
    }
}

/// Packs `L × n` ±1 codes (one code per column).
pub fn pack(codes: &Matrix) -> Result<PackedCodes> {
    let (bits, n) = codes.shape();
    if bits == 0 {
        return Err(Error::invalid("codes must have at least one bit"));
    }
    let stride = bytes_per_code(bits);
    let mut payload = vec![0u8; n * stride];
    for j in 0..bits {
        for (i, &v) in codes.row(j).iter().enumerate() {
            if v == 1.0 {
                payload[i * stride + j / 8] |= 1 << (j % 8);
            } else if v != -1.0 {
                return Err(Error::invalid(format!(
                    "code entry ({j}, {i}) is {v}, expected ±1"
                )));
            }
        }
    }
    Ok(PackedCodes { n, bits, payload })
}

/// Inverse of [`pack`]: `L × n` matrix of ±1.
pub fn unpack(codes: &PackedCodes) -> Matrix {
    Matrix::from_fn(codes.bits, codes.n, |j, i| {
        if codes.code(i)[j / 8] >> (j % 8) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Number of differing bits, counted a machine word at a time.
#[inline]
pub fn hamming(a: &[u8], b: &[u8]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "code lengths differ: {} vs {} bytes",
            a.len(),
            b.len()
        )));
    }
    Ok(hamming_unchecked(a, b))
}

#[inline]
fn hamming_unchecked(a: &[u8], b: &[u8]) -> u32 {
    let wa = a.chunks_exact(8);
    let wb = b.chunks_exact(8);
    let tail: u32 = wa
        .remainder()
        .iter()
        .zip(wb.remainder())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum();
    wa.zip(wb)
        .map(|(x, y)| {
            let x = u64::from_le_bytes(x.try_into().unwrap());
            let y = u64::from_le_bytes(y.try_into().unwrap());
            (x ^ y).count_ones()
        })
        .sum::<u32>()
        + tail
}

/// Database ids with their Hamming distances, nearest first, ties by
/// ascending id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankedList {
    pub entries: Vec<(u32, u32)>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Exact top-`k` scan. `k` larger than the database returns everything.
pub fn search(db: &PackedCodes, query: &[u8], k: usize) -> Result<RankedList> {
    search_excluding(db, query, k, None)
}

/// Like [`search`], skipping database id `exclude` (leave-one-out).
///
/// Distances are bounded by `L`, so the scan buckets ids by distance; each
/// bucket fills in ascending id order and the tie rule comes for free.
pub fn search_excluding(
    db: &PackedCodes,
    query: &[u8],
    k: usize,
    exclude: Option<usize>,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if db.is_empty() {
        return Err(Error::invalid("cannot search an empty database"));
    }
    if query.len() != db.stride() {
        return Err(Error::invalid(format!(
            "query has {} bytes, database codes have {}",
            query.len(),
            db.stride()
        )));
    }
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); db.bits + 1];
    for (id, code) in db.iter().enumerate() {
        if Some(id) == exclude {
            continue;
        }
        buckets[hamming_unchecked(query, code) as usize].push(id as u32);
    }
    let mut entries = Vec::with_capacity(k.min(db.n));
    'outer: for (dist, ids) in buckets.iter().enumerate() {
        for &id in ids {
            if entries.len() == k {
                break 'outer;
            }
            entries.push((id, dist as u32));
        }
    }
    Ok(RankedList { entries })
}

/// Searches every query in parallel; results keep query order.
///
/// With `leave_one_out`, query `i` never retrieves database id `i`.
pub fn search_all(
    db: &PackedCodes,
    queries: &PackedCodes,
    k: usize,
    leave_one_out: bool,
) -> Result<Vec<RankedList>> {
    if queries.bits != db.bits {
        return Err(Error::invalid(format!(
            "query codes have {} bits, database codes have {}",
            queries.bits, db.bits
        )));
    }
    if leave_one_out && queries.n != db.n {
        return Err(Error::invalid(
            "leave-one-out needs the query set to be the database",
        ));
    }
    (0..queries.n)
        .into_par_iter()
        .map(|i| search_excluding(db, queries.code(i), k, leave_one_out.then_some(i)))
        .collect()
}

/// Average precision of one full ranking.
///
/// `relevant_total` is the number of relevant items in the ranked set.
/// Returns `None` when it is zero.
pub fn average_precision(
    ranking: impl IntoIterator<Item = bool>,
    relevant_total: usize,
) -> Option<f64> {
    if relevant_total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, is_rel) in ranking.into_iter().enumerate() {
        if is_rel {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / relevant_total as f64)
}

/// Mean over queries of the full-ranking average precision.
///
/// Each ranking must list every database item it considers (a leave-one-out
/// ranking omits the query itself). A query's relevant count is the number
/// of ranked items sharing its label; queries without any are skipped.
pub fn mean_average_precision(
    rankings: &[RankedList],
    query_labels: &[u32],
    db_labels: &[u32],
) -> Result<f64> {
    if rankings.len() != query_labels.len() {
        return Err(Error::invalid(format!(
            "{} rankings for {} query labels",
            rankings.len(),
            query_labels.len()
        )));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (q, (ranking, &label)) in rankings.iter().zip(query_labels).enumerate() {
        let mut relevance = Vec::with_capacity(ranking.len());
        for id in ranking.ids() {
            let db_label = db_labels.get(id as usize).ok_or_else(|| {
                Error::invalid(format!("ranking {q} refers to unknown database id {id}"))
            })?;
            relevance.push(*db_label == label);
        }
        let relevant = relevance.iter().filter(|&&r| r).count();
        if let Some(ap) = average_precision(relevance, relevant) {
            total += ap;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(total / counted as f64)
}
