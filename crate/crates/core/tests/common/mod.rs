//! Independent oracles shared by the integration tests: breadth-first flood
//! fill and brute-force metric evaluation written straight from the
//! definitions, with no code shared with the library.

#![allow(dead_code)]

use std::collections::VecDeque;

use petseg::components::Connectivity;
use petseg::BinaryMask;

/// Neighbour offsets whose squared length is at most `max_sq`
/// (1 → 6, 2 → 18, 3 → 26).
pub fn neighbourhood(conn: Connectivity) -> Vec<[i64; 3]> {
    let max_sq = match conn {
        Connectivity::Face6 => 1,
        Connectivity::Edge18 => 2,
        Connectivity::Vertex26 => 3,
    };
    let mut out = Vec::new();
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let sq = dx * dx + dy * dy + dz * dz;
                if sq > 0 && sq <= max_sq {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Flood-fill labels (1-based, scan order) and component count.
pub fn bfs_labels(mask: &BinaryMask, conn: Connectivity) -> (Vec<u32>, usize) {
    let [nx, ny, nz] = mask.dims();
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let offsets = neighbourhood(conn);
    let data = mask.data();
    let mut labels = vec![0u32; data.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if data[idx(x, y, z)] == 0 || labels[idx(x, y, z)] != 0 {
                    continue;
                }
                next += 1;
                labels[idx(x, y, z)] = next;
                queue.push_back([x, y, z]);
                while let Some([cx, cy, cz]) = queue.pop_front() {
                    for d in &offsets {
                        let p = [cx as i64 + d[0], cy as i64 + d[1], cz as i64 + d[2]];
                        if p[0] < 0
                            || p[1] < 0
                            || p[2] < 0
                            || p[0] >= nx as i64
                            || p[1] >= ny as i64
                            || p[2] >= nz as i64
                        {
                            continue;
                        }
                        let j = idx(p[0] as usize, p[1] as usize, p[2] as usize);
                        if data[j] != 0 && labels[j] == 0 {
                            labels[j] = next;
                            queue.push_back([p[0] as usize, p[1] as usize, p[2] as usize]);
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// True when `a` and `b` describe the same partition up to renaming, with
/// 0 meaning background in both.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.iter().chain(b).copied().max().unwrap_or(0) as usize + 1;
    let mut fwd = vec![u32::MAX; n];
    let mut back = vec![u32::MAX; n];
    for (&x, &y) in a.iter().zip(b) {
        if (x == 0) != (y == 0) {
            return false;
        }
        if x == 0 {
            continue;
        }
        let (x, y) = (x as usize, y as usize);
        if fwd[x] == u32::MAX && back[y] == u32::MAX {
            fwd[x] = y as u32;
            back[y] = x as u32;
        } else if fwd[x] != y as u32 || back[y] != x as u32 {
            return false;
        }
    }
    true
}

/// Volume of components of `mask` that miss `other` entirely, in ml.
fn missed_volume_ml(mask: &BinaryMask, other: &BinaryMask, conn: Connectivity) -> f64 {
    let (labels, n) = bfs_labels(mask, conn);
    let mut size = vec![0usize; n + 1];
    let mut hit = vec![false; n + 1];
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            size[l as usize] += 1;
            hit[l as usize] |= other.data()[i] != 0;
        }
    }
    let voxels: usize = (1..=n).filter(|&l| !hit[l]).map(|l| size[l]).sum();
    let s = mask.grid().spacing;
    voxels as f64 * (s[0] * s[1] * s[2] / 1000.0)
}

/// (DSC, FPV ml, FNV ml) by voxel enumeration; both-empty DSC is 1.
pub fn oracle_metrics(gt: &BinaryMask, pred: &BinaryMask, conn: Connectivity) -> (f64, f64, f64) {
    let g = gt.data().iter().filter(|&&v| v != 0).count();
    let p = pred.data().iter().filter(|&&v| v != 0).count();
    let both = gt
        .data()
        .iter()
        .zip(pred.data())
        .filter(|(&a, &b)| a != 0 && b != 0)
        .count();
    let dsc = if g + p == 0 {
        1.0
    } else {
        2.0 * both as f64 / (g + p) as f64
    };
    (dsc, missed_volume_ml(pred, gt, conn), missed_volume_ml(gt, pred, conn))
}
