//! Deterministic range coding over fixed-point distributions.
//!
//! The coder is a 32-bit-range, byte-renormalizing, carry-propagating range
//! coder. Every distribution it consumes totals exactly 2^16 with a minimum
//! mass of 1 per symbol, so `range >> 16` never collides with interval
//! precision (range stays >= 2^24 between renormalizations). Output is a
//! pure function of (symbols, CDFs).

use crate::coords::Coord;
use crate::error::{Error, Result};

pub const PROB_BITS: u32 = 16;
pub const PROB_TOTAL: u32 = 1 << PROB_BITS;
const RENORM_LIMIT: u32 = 1 << 24;

/// Cumulative bounds `c_0 = 0 <= ... <= c_n = 2^16` over `n` symbols.
/// Strictly increasing, i.e. every symbol has mass >= 1.
#[derive(Debug, Clone)]
pub struct FixedCdf {
    bounds: Vec<u32>,
}

impl FixedCdf {
    /// Prefix sums over per-symbol masses; rejects masses that do not total
    /// 2^16 or contain a zero.
    pub fn from_masses(masses: &[u32]) -> Result<FixedCdf> {
        let mut bounds = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0u32;
        bounds.push(0);
        for &m in masses {
            if m == 0 {
                return Err(Error::InvalidMass);
            }
            acc = acc.checked_add(m).ok_or(Error::InvalidMass)?;
            bounds.push(acc);
        }
        if acc != PROB_TOTAL {
            return Err(Error::InvalidMass);
        }
        Ok(FixedCdf { bounds })
    }

    #[inline]
    pub fn n_symbols(&self) -> usize {
        self.bounds.len() - 1
    }

    #[inline]
    pub fn lo(&self, idx: usize) -> u32 {
        self.bounds[idx]
    }

    #[inline]
    pub fn hi(&self, idx: usize) -> u32 {
        self.bounds[idx + 1]
    }

    #[inline]
    pub fn mass(&self, idx: usize) -> u32 {
        self.hi(idx) - self.lo(idx)
    }

    /// The unique `idx` with `lo(idx) <= v < hi(idx)`.
    #[inline]
    pub fn lookup(&self, v: u32) -> usize {
        debug_assert!(v < PROB_TOTAL);
        self.bounds.partition_point(|&b| b <= v) - 1
    }
}

/// Exact normalization of non-negative weights to a total of 2^16:
/// largest-remainder rounding, then every zero mass is bumped to 1 with the
/// deficit taken from the single largest mass. Deterministic (ties resolve
/// toward the lower index).
pub fn normalize_to_q16(weights: &[u64]) -> Vec<u32> {
    let n = weights.len();
    assert!(n >= 1 && n <= PROB_TOTAL as usize / 2);
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        // Degenerate input: treat as uniform.
        return normalize_to_q16(&vec![1u64; n]);
    }
    let mut masses = vec![0u32; n];
    let mut rems = vec![0u128; n];
    let mut assigned = 0u64;
    for i in 0..n {
        let num = weights[i] as u128 * PROB_TOTAL as u128;
        masses[i] = (num / sum) as u32;
        rems[i] = num % sum;
        assigned += masses[i] as u64;
    }
    let deficit = (PROB_TOTAL as u64 - assigned) as usize;
    if deficit > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        // Largest remainder first; ties go to the lower index.
        order.select_nth_unstable_by(deficit - 1, |&a, &b| {
            rems[b].cmp(&rems[a]).then(a.cmp(&b))
        });
        for &i in &order[..deficit] {
            masses[i] += 1;
        }
    }
    // Floor of one per symbol, funded by the largest mass.
    let mut bump = 0u32;
    for m in masses.iter_mut() {
        if *m == 0 {
            *m = 1;
            bump += 1;
        }
    }
    if bump > 0 {
        let top = (0..n).max_by(|&a, &b| masses[a].cmp(&masses[b]).then(b.cmp(&a))).unwrap();
        debug_assert!(masses[top] > bump);
        masses[top] -= bump;
    }
    masses
}

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    first: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> RangeEncoder {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 0,
            first: true,
            out: Vec::new(),
        }
    }

    /// Narrows the interval to symbol `idx` of `cdf`.
    pub fn encode(&mut self, cdf: &FixedCdf, idx: usize) {
        let r = (self.range >> PROB_BITS) as u64;
        debug_assert!(r >= 1 << 8);
        self.low += r * cdf.lo(idx) as u64;
        self.range = (r as u32) * cdf.mass(idx);
        while self.range < RENORM_LIMIT {
            self.shift_low();
            self.range <<= 8;
        }
    }

    fn shift_low(&mut self) {
        let carry = (self.low >> 32) as u8; // 0 or 1
        if (self.low as u32) < 0xFF00_0000 || carry == 1 {
            if self.first {
                self.first = false;
            } else {
                self.out.push(self.cache.wrapping_add(carry));
            }
            for _ in 0..self.pending {
                self.out.push(0xFFu8.wrapping_add(carry));
            }
            self.pending = 0;
            self.cache = (self.low >> 24) as u8;
        } else {
            self.pending += 1;
        }
        self.low = (self.low << 8) & 0xFFFF_FFFF;
    }

    /// Flushes the final interval; adds exactly 4 bytes beyond the data.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<RangeDecoder<'a>> {
        if input.len() < 4 {
            return Err(Error::TruncatedStream);
        }
        let code = u32::from_be_bytes(input[0..4].try_into().unwrap());
        Ok(RangeDecoder {
            code,
            range: u32::MAX,
            input,
            pos: 4,
        })
    }

    pub fn decode(&mut self, cdf: &FixedCdf) -> Result<usize> {
        let r = self.range >> PROB_BITS;
        let v = (self.code / r).min(PROB_TOTAL - 1);
        let idx = cdf.lookup(v);
        self.code -= r * cdf.lo(idx);
        self.range = r * cdf.mass(idx);
        while self.range < RENORM_LIMIT {
            let b = *self.input.get(self.pos).ok_or(Error::TruncatedStream)?;
            self.pos += 1;
            self.code = (self.code << 8) | b as u32;
            self.range <<= 8;
        }
        Ok(idx)
    }
}

/// Encodes occupancy symbols (1..=255) under caller-supplied causal CDFs.
/// `cdf_for(i)` is invoked in order, once per symbol.
pub fn range_encode_occupancy<F>(symbols: &[u8], mut cdf_for: F) -> Vec<u8>
where
    F: FnMut(usize) -> FixedCdf,
{
    let mut enc = RangeEncoder::new();
    for (i, &s) in symbols.iter().enumerate() {
        debug_assert!(s >= 1);
        let cdf = cdf_for(i);
        debug_assert_eq!(cdf.n_symbols(), 255);
        enc.encode(&cdf, s as usize - 1);
    }
    enc.finish()
}

/// Mirror of [`range_encode_occupancy`]; the provider sees the prefix of
/// already-decoded symbols, matching autoregressive decoding.
pub fn range_decode_occupancy<F>(bytes: &[u8], n: usize, mut cdf_for: F) -> Result<Vec<u8>>
where
    F: FnMut(&[u8]) -> FixedCdf,
{
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut dec = RangeDecoder::new(bytes)?;
    for _ in 0..n {
        let cdf = cdf_for(&out);
        let idx = dec.decode(&cdf)?;
        out.push(idx as u8 + 1);
    }
    Ok(out)
}

/// Order-0 adaptive frequency model: integer counts starting at 1, halved
/// (rounding up) when the total reaches 2^15.
#[derive(Debug, Clone)]
pub struct AdaptiveFreqModel {
    counts: Vec<u64>,
    total: u64,
}

const RESCALE_THRESHOLD: u64 = 1 << 15;

impl AdaptiveFreqModel {
    pub fn new(n_symbols: usize) -> AdaptiveFreqModel {
        AdaptiveFreqModel {
            counts: vec![1; n_symbols],
            total: n_symbols as u64,
        }
    }

    pub fn cdf(&self) -> FixedCdf {
        FixedCdf::from_masses(&normalize_to_q16(&self.counts)).expect("counts are positive")
    }

    pub fn update(&mut self, symbol: usize) {
        self.counts[symbol] += 1;
        self.total += 1;
        if self.total >= RESCALE_THRESHOLD {
            self.total = 0;
            for c in self.counts.iter_mut() {
                *c = (*c + 1) >> 1;
                self.total += *c;
            }
        }
    }
}

/// Codes raw coordinates as per-axis byte planes under adaptive models.
/// Plane order is fixed: axis-major, most significant plane first.
pub fn encode_raw_coords(coords: &[Coord], bits_per_axis: u8) -> Result<Vec<u8>> {
    let planes = bits_per_axis.div_ceil(8) as usize;
    let limit = 1u64 << bits_per_axis;
    let mut enc = RangeEncoder::new();
    for axis in 0..3 {
        for plane in (0..planes).rev() {
            let mut model = AdaptiveFreqModel::new(256);
            for c in coords {
                let v = c.0[axis] as u64;
                if v >= limit {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {v} exceeds {bits_per_axis} bits"
                    )));
                }
                let byte = (v >> (plane * 8)) as usize & 0xFF;
                enc.encode(&model.cdf(), byte);
                model.update(byte);
            }
        }
    }
    Ok(enc.finish())
}

pub fn decode_raw_coords(bytes: &[u8], n: usize, bits_per_axis: u8) -> Result<Vec<Coord>> {
    let planes = bits_per_axis.div_ceil(8) as usize;
    let mut axes = [const { Vec::new() }; 3];
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut dec = RangeDecoder::new(bytes)?;
    for axis in 0..3 {
        let mut vals = vec![0u32; n];
        for plane in (0..planes).rev() {
            let mut model = AdaptiveFreqModel::new(256);
            for v in vals.iter_mut() {
                let byte = dec.decode(&model.cdf())?;
                model.update(byte);
                *v |= (byte as u32) << (plane * 8);
            }
        }
        axes[axis] = vals;
    }
    Ok((0..n)
        .map(|i| Coord([axes[0][i], axes[1][i], axes[2][i]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_uniform_row() {
        let masses = normalize_to_q16(&[1u64; 255]);
        assert_eq!(masses.iter().sum::<u32>(), PROB_TOTAL);
        let (mn, mx) = (masses.iter().min().unwrap(), masses.iter().max().unwrap());
        assert!(mx - mn <= 1);
    }

    #[test]
    fn normalize_dominant_symbol() {
        // One huge weight, the rest negligible: floor mass 1 everywhere else.
        let mut w = vec![0u64; 255];
        w[7] = 1 << 24;
        let masses = normalize_to_q16(&w);
        assert_eq!(masses[7], PROB_TOTAL - 254);
        assert!(masses.iter().enumerate().all(|(i, &m)| i == 7 || m == 1));
    }

    #[test]
    fn cdf_lookup_exhaustive() {
        let masses = normalize_to_q16(&[3, 1, 70, 9000, 1, 2, 500]);
        let cdf = FixedCdf::from_masses(&masses).unwrap();
        for u in 0..PROB_TOTAL {
            let s = cdf.lookup(u);
            assert!(cdf.lo(s) <= u && u < cdf.hi(s));
        }
    }

    #[test]
    fn cdf_rejects_bad_masses() {
        assert!(FixedCdf::from_masses(&[65535, 0, 1]).is_err());
        assert!(FixedCdf::from_masses(&[1; 255]).is_err());
    }

    #[test]
    fn empty_stream_is_four_bytes() {
        let bytes = range_encode_occupancy(&[], |_| unreachable!());
        assert_eq!(bytes.len(), 4);
        let back = range_decode_occupancy(&bytes, 0, |_| unreachable!()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn decode_zero_symbols_needs_no_bytes() {
        let back = range_decode_occupancy(&[], 0, |_| unreachable!()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn truncated_stream_errors() {
        let uniform = FixedCdf::from_masses(&normalize_to_q16(&[1u64; 255])).unwrap();
        let bytes = range_encode_occupancy(&[1, 2, 3, 200, 255], |_| uniform.clone());
        let cut = &bytes[..bytes.len() - 2];
        let r = range_decode_occupancy(cut, 5, |_| uniform.clone());
        assert!(matches!(r, Err(Error::TruncatedStream)));
    }

    fn arb_masses() -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0u64..1000, 255)
            .prop_map(|w| normalize_to_q16(&w))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roundtrip_random_streams(
            seed_masses in proptest::collection::vec(arb_masses(), 1..6),
            symbols in proptest::collection::vec(1u8..=255, 0..400),
        ) {
            let cdfs: Vec<FixedCdf> = seed_masses
                .iter()
                .map(|m| FixedCdf::from_masses(m).unwrap())
                .collect();
            let pick = |i: usize| cdfs[i % cdfs.len()].clone();
            let bytes = range_encode_occupancy(&symbols, pick);
            let back = range_decode_occupancy(&bytes, symbols.len(), |p| pick(p.len())).unwrap();
            prop_assert_eq!(back, symbols);
        }

        #[test]
        fn raw_coords_roundtrip(
            coords in proptest::collection::vec((0u32..4096, 0u32..4096, 0u32..4096), 0..200),
        ) {
            let coords: Vec<Coord> = coords.into_iter().map(|(x, y, z)| Coord([x, y, z])).collect();
            let bytes = encode_raw_coords(&coords, 12).unwrap();
            let back = decode_raw_coords(&bytes, coords.len(), 12).unwrap();
            prop_assert_eq!(back, coords);
        }
    }

    #[test]
    fn encoder_output_is_reproducible() {
        let masses = normalize_to_q16(&(1..=255u64).collect::<Vec<_>>());
        let cdf = FixedCdf::from_masses(&masses).unwrap();
        let symbols: Vec<u8> = (0..1000).map(|i| (i % 255) as u8 + 1).collect();
        let a = range_encode_occupancy(&symbols, |_| cdf.clone());
        let b = range_encode_occupancy(&symbols, |_| cdf.clone());
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_symbols_near_entropy() {
        // 1000 uniform symbols: |payload| within [ceil(N*log2(255)/8), +8].
        let uniform = FixedCdf::from_masses(&normalize_to_q16(&[1u64; 255])).unwrap();
        let symbols: Vec<u8> = (0..1000u32).map(|i| (i.wrapping_mul(97) % 255) as u8 + 1).collect();
        let bytes = range_encode_occupancy(&symbols, |_| uniform.clone());
        let floor = (1000.0 * 255f64.log2() / 8.0).ceil() as usize;
        assert!(bytes.len() >= floor, "len {} < floor {}", bytes.len(), floor);
        assert!(bytes.len() <= floor + 8, "len {} > {}", bytes.len(), floor + 8);
    }

    #[test]
    fn adaptive_model_converges_on_constant_input() {
        let coords = vec![Coord([77, 191, 3]); 200];
        let bytes = encode_raw_coords(&coords, 8).unwrap();
        assert!(
            (bytes.len() as f64) < 2.0 * coords.len() as f64,
            "{} bytes for {} coords",
            bytes.len(),
            coords.len()
        );
        let back = decode_raw_coords(&bytes, coords.len(), 8).unwrap();
        assert_eq!(back, coords);
    }

    #[test]
    fn single_coordinate_roundtrip() {
        let coords = vec![Coord([123456, 7, 99999])];
        let bytes = encode_raw_coords(&coords, 17).unwrap();
        let back = decode_raw_coords(&bytes, 1, 17).unwrap();
        assert_eq!(back, coords);
    }
}
