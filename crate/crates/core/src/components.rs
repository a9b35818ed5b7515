//! 3D connected-component labeling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::volume::{BinaryMask, LabelMap};

/// Voxel adjacency rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Neighbours share a face.
    #[default]
    #[serde(rename = "6")]
    Face6,
    /// Neighbours share a face or an edge.
    #[serde(rename = "18")]
    Edge18,
    /// Neighbours share a face, an edge or a corner.
    #[serde(rename = "26")]
    Vertex26,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [Self::Face6, Self::Edge18, Self::Vertex26];

    /// Maximum L1 distance between adjacent voxels.
    fn max_l1(self) -> i32 {
        match self {
            Connectivity::Face6 => 1,
            Connectivity::Edge18 => 2,
            Connectivity::Vertex26 => 3,
        }
    }

    pub fn neighbour_count(self) -> usize {
        match self {
            Connectivity::Face6 => 6,
            Connectivity::Edge18 => 18,
            Connectivity::Vertex26 => 26,
        }
    }

    /// All neighbour offsets under this rule.
    pub fn offsets(self) -> Vec<[i32; 3]> {
        let mut out = Vec::with_capacity(self.neighbour_count());
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 > 0 && l1 <= self.max_l1() {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Neighbours visited before the current voxel in x-fastest scan order.
    fn backward_offsets(self) -> Vec<[i32; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.neighbour_count())
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "6" | "face" | "face6" => Ok(Connectivity::Face6),
            "18" | "edge" | "edge18" => Ok(Connectivity::Edge18),
            "26" | "vertex" | "vertex26" => Ok(Connectivity::Vertex26),
            other => Err(Error::Domain(format!(
                "connectivity must be 6, 18 or 26, got {other:?}"
            ))),
        }
    }
}

/// Disjoint-set forest over provisional labels. The smaller label always
/// becomes the root, so roots are the earliest label in scan order.
struct Forest {
    parent: Vec<u32>,
}

impl Forest {
    fn new() -> Self {
        // slot 0 is the background sentinel
        Forest { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let l = self.parent.len() as u32;
        self.parent.push(l);
        l
    }

    fn find(&mut self, mut l: u32) -> u32 {
        let mut root = l;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[l as usize] != root {
            let next = self.parent[l as usize];
            self.parent[l as usize] = root;
            l = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let ra = self.find(a);
        let rb = self.find(b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Label the foreground of `mask` into maximal connected components.
///
/// Labels are `1..=n`, numbered in the order in which each component's first
/// voxel appears in x-fastest scan order. Two-pass union-find.
pub fn label_components(mask: &BinaryMask, conn: Connectivity) -> LabelMap {
    let grid = *mask.grid();
    let [nx, ny, nz] = grid.dims;
    let src = mask.data();
    let backward = conn.backward_offsets();

    let mut labels = vec![0u32; grid.len()];
    let mut forest = Forest::new();
    let mut neigh: Vec<u32> = Vec::with_capacity(13);

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if src[i] == 0 {
                    continue;
                }
                neigh.clear();
                for &[dx, dy, dz] in &backward {
                    let (xx, yy, zz) = (x as i64 + dx as i64, y as i64 + dy as i64, z as i64 + dz as i64);
                    if xx < 0 || yy < 0 || zz < 0 || xx >= nx as i64 || yy >= ny as i64 {
                        continue;
                    }
                    let l = labels[grid.index(xx as usize, yy as usize, zz as usize)];
                    if l != 0 {
                        neigh.push(l);
                    }
                }
                labels[i] = match neigh.split_first() {
                    None => forest.make(),
                    Some((&first, rest)) => {
                        let mut root = forest.find(first);
                        for &l in rest {
                            root = forest.union(root, l);
                        }
                        root
                    }
                };
            }
        }
    }

    // second pass: resolve roots and renumber by first appearance
    let mut remap = vec![0u32; forest.parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = forest.find(*l) as usize;
        if remap[root] == 0 {
            next += 1;
            remap[root] = next;
        }
        *l = remap[root];
    }
    LabelMap::from_parts_unchecked(grid, labels, next as usize)
}

/// Voxel count per label; entry `k` is the size of label `k + 1`.
pub fn component_sizes(labels: &LabelMap) -> Vec<usize> {
    let mut counts = vec![0usize; labels.n_components()];
    for &l in labels.data() {
        if l != 0 {
            counts[l as usize - 1] += 1;
        }
    }
    counts
}

/// For each component, whether any of its voxels is foreground in `other`.
/// `other` must have the same number of voxels as `labels`.
pub fn components_touching(labels: &LabelMap, other: &[u8]) -> Vec<bool> {
    debug_assert_eq!(labels.data().len(), other.len());
    let mut hit = vec![false; labels.n_components()];
    for (&l, &o) in labels.data().iter().zip(other) {
        if l != 0 && o != 0 {
            hit[l as usize - 1] = true;
        }
    }
    hit
}
