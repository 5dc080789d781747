//! Integer voxel coordinates and Morton-sorted coordinate sets.

use crate::error::{Error, Result};
use crate::morton;

/// Non-negative integer voxel coordinate inside a `[0, 2^l - 1]^3` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord(pub [u32; 3]);

impl Coord {
    #[inline]
    pub fn x(&self) -> u32 {
        self.0[0]
    }
    #[inline]
    pub fn y(&self) -> u32 {
        self.0[1]
    }
    #[inline]
    pub fn z(&self) -> u32 {
        self.0[2]
    }

    #[inline]
    pub fn key(&self) -> u64 {
        morton::encode(self.0[0], self.0[1], self.0[2])
    }

    /// Parent coordinate one octree level up.
    #[inline]
    pub fn parent(&self) -> Coord {
        Coord([self.0[0] >> 1, self.0[1] >> 1, self.0[2] >> 1])
    }

    /// Child coordinate for child index `c = 4*bx + 2*by + bz`.
    #[inline]
    pub fn child(&self, c: u8) -> Coord {
        Coord([
            (self.0[0] << 1) | (c as u32 >> 2 & 1),
            (self.0[1] << 1) | (c as u32 >> 1 & 1),
            (self.0[2] << 1) | (c as u32 & 1),
        ])
    }

    /// Which child of its parent this coordinate is.
    #[inline]
    pub fn child_index(&self) -> u8 {
        ((self.0[0] & 1) << 2 | (self.0[1] & 1) << 1 | (self.0[2] & 1)) as u8
    }

    /// Signed offset; `None` when the result leaves the non-negative lattice.
    #[inline]
    pub fn offset(&self, d: [i32; 3]) -> Option<Coord> {
        let x = self.0[0] as i64 + d[0] as i64;
        let y = self.0[1] as i64 + d[1] as i64;
        let z = self.0[2] as i64 + d[2] as i64;
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        Some(Coord([x as u32, y as u32, z as u32]))
    }
}

/// A strictly Morton-increasing list of coordinates with cached keys.
///
/// The key cache is what makes kernel-map construction and neighbor queries
/// deterministic: membership is a binary search, never a hash walk.
#[derive(Debug, Clone, Default)]
pub struct CoordSet {
    coords: Vec<Coord>,
    keys: Vec<u64>,
}

impl CoordSet {
    /// Sorts by Morton key and removes duplicates.
    pub fn from_unsorted(mut coords: Vec<Coord>) -> CoordSet {
        coords.sort_unstable_by_key(|c| c.key());
        coords.dedup();
        let keys = coords.iter().map(|c| c.key()).collect();
        CoordSet { coords, keys }
    }

    /// Wraps a list that is already strictly Morton-increasing.
    pub fn from_sorted(coords: Vec<Coord>) -> Result<CoordSet> {
        let keys: Vec<u64> = coords.iter().map(|c| c.key()).collect();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedCoords);
        }
        Ok(CoordSet { coords, keys })
    }

    /// `from_sorted` without the monotonicity check, for internal call sites
    /// that construct the order themselves.
    pub(crate) fn from_sorted_unchecked(coords: Vec<Coord>) -> CoordSet {
        let keys = coords.iter().map(|c| c.key()).collect();
        CoordSet { coords, keys }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    #[inline]
    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    #[inline]
    pub fn get(&self, i: usize) -> Coord {
        self.coords[i]
    }

    /// Index of `c` if present.
    #[inline]
    pub fn find(&self, c: Coord) -> Option<usize> {
        self.keys.binary_search(&c.key()).ok()
    }

    #[inline]
    pub fn contains(&self, c: Coord) -> bool {
        self.find(c).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        self.coords.iter().copied()
    }

    pub fn max_component(&self) -> u32 {
        self.coords
            .iter()
            .map(|c| c.0[0].max(c.0[1]).max(c.0[2]))
            .max()
            .unwrap_or(0)
    }
}
