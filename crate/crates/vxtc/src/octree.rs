//! Morton-ordered octree construction and inversion.
//!
//! Level `l` holds the node coordinates `coords^l` in `[0, 2^l - 1]^3`;
//! `codes[l]` holds one occupancy byte per node at level `l - 1` describing
//! which of its eight level-`l` children exist. Bit `c` of a code refers to
//! child `c = 4*bx + 2*by + bz` (x most significant), matching the Morton
//! key layout so expansion preserves sort order for free.

use std::sync::Arc;

use crate::coords::{Coord, CoordSet};
use crate::error::{Error, Result};
use crate::points::{QuantTransform, QuantizedCloud};

#[derive(Debug, Clone)]
pub struct OctreeLevels {
    max_level: u8,
    /// Node coordinates per level, index 0 (root) through `max_level`.
    levels: Vec<Arc<CoordSet>>,
    /// `codes[l]` for l in 1..=max_level; `codes[0]` is empty.
    codes: Vec<Vec<u8>>,
}

impl OctreeLevels {
    #[inline]
    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    #[inline]
    pub fn coords(&self, level: u8) -> &Arc<CoordSet> {
        &self.levels[level as usize]
    }

    #[inline]
    pub fn codes(&self, level: u8) -> &[u8] {
        &self.codes[level as usize]
    }

    #[inline]
    pub fn node_count(&self, level: u8) -> usize {
        self.levels[level as usize].len()
    }
}

#[inline]
pub fn occupancy_mask(code: u8) -> [bool; 8] {
    std::array::from_fn(|c| code >> c & 1 == 1)
}

/// Builds all octree levels bottom-up from a quantized cloud.
pub fn build_octree(cloud: &QuantizedCloud) -> Result<OctreeLevels> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let max_level = cloud.transform.precision_l;
    build_from_leaves(cloud.coords.clone(), max_level)
}

/// Same construction, starting from an arbitrary Morton-sorted leaf set at
/// `max_level`. Used by the decoder to rebuild shallow levels from the
/// raw-coded coordinate set.
pub fn build_from_leaves(leaves: CoordSet, max_level: u8) -> Result<OctreeLevels> {
    if leaves.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut levels = vec![Arc::new(leaves)];
    let mut codes: Vec<Vec<u8>> = Vec::new();
    for _ in (1..=max_level).rev() {
        let child = levels.last().unwrap();
        let mut parents: Vec<Coord> = Vec::with_capacity(child.len() / 2 + 1);
        let mut level_codes: Vec<u8> = Vec::with_capacity(child.len() / 2 + 1);
        for c in child.iter() {
            let p = c.parent();
            let bit = 1u8 << c.child_index();
            match parents.last() {
                Some(&last) if last == p => *level_codes.last_mut().unwrap() |= bit,
                _ => {
                    parents.push(p);
                    level_codes.push(bit);
                }
            }
        }
        levels.push(Arc::new(CoordSet::from_sorted_unchecked(parents)));
        codes.push(level_codes);
    }
    levels.reverse();
    codes.reverse();
    codes.insert(0, Vec::new());
    debug_assert_eq!(levels[0].len(), 1);
    Ok(OctreeLevels {
        max_level,
        levels,
        codes,
    })
}

/// Expands parents one level down: child `2*p + offset(c)` for each set bit
/// `c`, parents in order, children in ascending `c`. The output stays
/// strictly Morton-increasing.
pub fn expand_children(parents: &[Coord], codes: &[u8]) -> Result<Vec<Coord>> {
    if parents.len() != codes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parents vs {} codes",
            parents.len(),
            codes.len()
        )));
    }
    let mut out = Vec::with_capacity(codes.iter().map(|c| c.count_ones() as usize).sum());
    for (&p, &code) in parents.iter().zip(codes) {
        if code == 0 {
            return Err(Error::InvalidOccupancy);
        }
        for c in 0..8u8 {
            if code >> c & 1 == 1 {
                out.push(p.child(c));
            }
        }
    }
    Ok(out)
}

/// Recovers the leaf cloud; checks the popcount bookkeeping on the way down.
pub fn reconstruct_points(tree: &OctreeLevels, transform: QuantTransform) -> Result<QuantizedCloud> {
    let mut coords: Vec<Coord> = tree.levels[0].coords().to_vec();
    for l in 1..=tree.max_level {
        let codes = tree.codes(l);
        if codes.len() != coords.len() {
            return Err(Error::CorruptTree(format!(
                "level {l}: {} codes for {} parents",
                codes.len(),
                coords.len()
            )));
        }
        coords = expand_children(&coords, codes)
            .map_err(|_| Error::CorruptTree(format!("level {l}: zero occupancy code")))?;
        if coords.len() != tree.node_count(l) {
            return Err(Error::CorruptTree(format!(
                "level {l}: popcount sum {} != stored node count {}",
                coords.len(),
                tree.node_count(l)
            )));
        }
    }
    Ok(QuantizedCloud {
        coords: CoordSet::from_sorted(coords)?,
        transform,
    })
}

/// Per-level occupancy statistics over the 26-cell neighborhood.
#[derive(Debug, Clone)]
pub struct HrcsStats {
    /// One entry per level 1..=L: (node count, mean occupied neighbors).
    pub per_level: Vec<(usize, f64)>,
}

/// Exact neighbor counts via binary search on each level's Morton keys.
pub fn hrcs_stats(tree: &OctreeLevels) -> HrcsStats {
    let mut per_level = Vec::with_capacity(tree.max_level as usize);
    for l in 1..=tree.max_level {
        let set = tree.coords(l);
        let side = 1u64 << l;
        let mut total = 0u64;
        for c in set.iter() {
            for dx in -1i32..=1 {
                for dy in -1i32..=1 {
                    for dz in -1i32..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        if let Some(n) = c.offset([dx, dy, dz]) {
                            if (n.x() as u64) < side
                                && (n.y() as u64) < side
                                && (n.z() as u64) < side
                                && set.contains(n)
                            {
                                total += 1;
                            }
                        }
                    }
                }
            }
        }
        per_level.push((set.len(), total as f64 / set.len() as f64));
    }
    HrcsStats { per_level }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::QuantTransform;
    use proptest::prelude::*;

    fn cloud_from(coords: Vec<Coord>, l: u8) -> QuantizedCloud {
        QuantizedCloud {
            coords: CoordSet::from_unsorted(coords),
            transform: QuantTransform::bbox_norm(l),
        }
    }

    #[test]
    fn single_point_follows_child_zero() {
        let tree = build_octree(&cloud_from(vec![Coord([0, 0, 0])], 2)).unwrap();
        for l in 1..=2 {
            assert_eq!(tree.codes(l), &[1]);
            assert_eq!(tree.node_count(l), 1);
        }
    }

    #[test]
    fn opposite_corners_level_one() {
        let tree = build_octree(&cloud_from(vec![Coord([0, 0, 0]), Coord([1, 1, 1])], 1)).unwrap();
        assert_eq!(tree.codes(1), &[0b1000_0001]);
    }

    #[test]
    fn full_cube_level_one() {
        let mut pts = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    pts.push(Coord([x, y, z]));
                }
            }
        }
        let tree = build_octree(&cloud_from(pts, 1)).unwrap();
        assert_eq!(tree.codes(1), &[255]);
    }

    #[test]
    fn expand_bits_zero_and_seven() {
        let out = expand_children(&[Coord([0, 0, 0])], &[129]).unwrap();
        assert_eq!(out, vec![Coord([0, 0, 0]), Coord([1, 1, 1])]);
    }

    #[test]
    fn expand_child_zero_doubles() {
        let out = expand_children(&[Coord([3, 1, 2])], &[1]).unwrap();
        assert_eq!(out, vec![Coord([6, 2, 4])]);
    }

    #[test]
    fn expand_rejects_zero_code() {
        assert!(matches!(
            expand_children(&[Coord([0, 0, 0])], &[0]),
            Err(Error::InvalidOccupancy)
        ));
    }

    #[test]
    fn occupancy_mask_examples() {
        assert_eq!(
            occupancy_mask(129),
            [true, false, false, false, false, false, false, true]
        );
        assert_eq!(occupancy_mask(255), [true; 8]);
        assert_eq!(occupancy_mask(0), [false; 8]);
    }

    #[test]
    fn corrupt_code_detected() {
        let cloud = cloud_from(vec![Coord([0, 0, 0]), Coord([3, 3, 3]), Coord([2, 0, 1])], 2);
        let mut tree = build_octree(&cloud).unwrap();
        // Flip one code's popcount without fixing the deeper level.
        tree.codes[2][0] = 0b11;
        let r = reconstruct_points(&tree, cloud.transform);
        assert!(matches!(r, Err(Error::CorruptTree(_))));
    }

    #[test]
    fn hrcs_single_point_zero_neighbors() {
        let tree = build_octree(&cloud_from(vec![Coord([5, 9, 2])], 4)).unwrap();
        for (_, mean) in hrcs_stats(&tree).per_level {
            assert_eq!(mean, 0.0);
        }
    }

    /// Brute-force oracle: count occupied neighbors by scanning all pairs.
    fn neighbor_mean_oracle(coords: &[Coord]) -> f64 {
        let mut total = 0u64;
        for a in coords {
            for b in coords {
                if a == b {
                    continue;
                }
                let close = a.0.iter().zip(b.0.iter()).all(|(&u, &v)| {
                    (u as i64 - v as i64).abs() <= 1
                });
                if close {
                    total += 1;
                }
            }
        }
        total as f64 / coords.len() as f64
    }

    #[test]
    fn hrcs_full_cube_matches_oracle() {
        // 2x2x2 cube at level 1: every node has the other 7 as neighbors.
        let mut pts = Vec::new();
        for x in 0..2u32 {
            for y in 0..2 {
                for z in 0..2 {
                    pts.push(Coord([x, y, z]));
                }
            }
        }
        let expect = neighbor_mean_oracle(&pts);
        assert_eq!(expect, 7.0);
        let tree = build_octree(&cloud_from(pts, 1)).unwrap();
        assert_eq!(hrcs_stats(&tree).per_level[0], (8, 7.0));

        // 4x4x4 cube at level 2 against the same oracle.
        let mut pts = Vec::new();
        for x in 0..4u32 {
            for y in 0..4 {
                for z in 0..4 {
                    pts.push(Coord([x, y, z]));
                }
            }
        }
        let expect = neighbor_mean_oracle(&pts);
        let tree = build_octree(&cloud_from(pts, 2)).unwrap();
        let (n, mean) = hrcs_stats(&tree).per_level[1];
        assert_eq!(n, 64);
        assert!((mean - expect).abs() < 1e-12);
    }

    fn arb_cloud(max_l: u8) -> impl Strategy<Value = QuantizedCloud> {
        (1u8..=max_l).prop_flat_map(|l| {
            let side = 1u32 << l;
            (
                proptest::collection::vec(
                    (0..side, 0..side, 0..side).prop_map(|(x, y, z)| Coord([x, y, z])),
                    1..120,
                ),
                Just(l),
            )
                .prop_map(|(pts, l)| cloud_from(pts, l))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn build_reconstruct_inverse(cloud in arb_cloud(16)) {
            let tree = build_octree(&cloud).unwrap();
            let back = reconstruct_points(&tree, cloud.transform).unwrap();
            prop_assert_eq!(back.coords.keys(), cloud.coords.keys());
        }

        #[test]
        fn levelwise_expansion_identity(cloud in arb_cloud(12)) {
            let tree = build_octree(&cloud).unwrap();
            for l in 1..=tree.max_level() {
                let expanded = expand_children(
                    tree.coords(l - 1).coords(),
                    tree.codes(l),
                ).unwrap();
                prop_assert_eq!(expanded.as_slice(), tree.coords(l).coords());
                // popcount bookkeeping
                let pops: usize = tree.codes(l).iter().map(|c| c.count_ones() as usize).sum();
                prop_assert_eq!(pops, tree.node_count(l));
                // Morton order is strict at every level
                prop_assert!(tree.coords(l).keys().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
