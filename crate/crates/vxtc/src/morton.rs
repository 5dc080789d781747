//! 3D Morton (z-order) keys: 21 bits per axis packed into a 63-bit key.
//!
//! Bit layout per 3-bit group is (x, y, z) with x most significant, so the
//! low 3 bits of a key equal the octree child index `c = 4*bx + 2*by + bz`.

pub const MAX_LEVEL: u8 = 21;

/// Spreads the low 21 bits of `v` so that bit i lands at position 3*i.
#[inline]
pub fn split3(v: u32) -> u64 {
    debug_assert!(v < (1 << 21));
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    (x | (x << 2)) & 0x1249249249249249
}

/// Inverse of [`split3`]: gathers every third bit back into the low 21 bits.
#[inline]
pub fn compact3(v: u64) -> u32 {
    let mut x = v & 0x1249249249249249;
    x = (x | (x >> 2)) & 0x10c30c30c30c30c3;
    x = (x | (x >> 4)) & 0x100f00f00f00f00f;
    x = (x | (x >> 8)) & 0x1f0000ff0000ff;
    x = (x | (x >> 16)) & 0x1f00000000ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

#[inline]
pub fn encode(x: u32, y: u32, z: u32) -> u64 {
    (split3(x) << 2) | (split3(y) << 1) | split3(z)
}

#[inline]
pub fn decode(key: u64) -> (u32, u32, u32) {
    (compact3(key >> 2), compact3(key >> 1), compact3(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_exhaustive_small() {
        for x in 0..16 {
            for y in 0..16 {
                for z in 0..16 {
                    assert_eq!(decode(encode(x, y, z)), (x, y, z));
                }
            }
        }
    }

    #[test]
    fn roundtrip_max_coordinate() {
        let m = (1 << 21) - 1;
        assert_eq!(decode(encode(m, m, m)), (m, m, m));
        assert_eq!(encode(m, m, m), (1u64 << 63) - 1);
    }

    #[test]
    fn low_bits_are_child_index() {
        // child index convention: c = 4*bx + 2*by + bz
        for c in 0u32..8 {
            let (bx, by, bz) = (c >> 2 & 1, c >> 1 & 1, c & 1);
            assert_eq!(encode(bx, by, bz), c as u64);
        }
    }

    #[test]
    fn x_is_most_significant_axis() {
        assert!(encode(1, 0, 0) > encode(0, 1, 1));
        assert!(encode(0, 1, 0) > encode(0, 0, 1));
    }
}
