//! 26-connected component labelling of a single class.

use serde::Serialize;

use crate::volume::{Dims, LabelVolume};

/// Summary of one connected component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStats {
    /// Dense id, 1 for the largest component.
    pub id: u32,
    pub class_label: u8,
    pub voxel_count: usize,
    /// Unweighted mean voxel coordinate (x, y, z) in voxel units.
    pub centroid: [f64; 3],
    /// Smallest linear voxel index in the component.
    pub min_index: usize,
}

/// Components of one class and the per-voxel id map (0 = not in class).
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub stats: Vec<ComponentStats>,
    pub ids: Vec<u32>,
}

impl Components {
    /// Voxel indices belonging to component `id`.
    pub fn voxels_of(&self, id: u32) -> impl Iterator<Item = usize> + '_ {
        self.ids
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == id)
            .map(|(i, _)| i)
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        DisjointSet { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let next = self.parent[x as usize];
            self.parent[x as usize] = self.parent[next as usize];
            x = next;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the older (smaller) root so roots stay scan-ordered.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Offsets of the 13 neighbours that precede a voxel in scan order.
fn backward_offsets() -> Vec<[isize; 3]> {
    let mut out = Vec::with_capacity(13);
    for dz in -1isize..=0 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)) {
                    continue;
                }
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

fn shifted(dims: Dims, [x, y, z]: [usize; 3], [dx, dy, dz]: [isize; 3]) -> Option<usize> {
    let nx = x.checked_add_signed(dx).filter(|&v| v < dims.nx)?;
    let ny = y.checked_add_signed(dy).filter(|&v| v < dims.ny)?;
    let nz = z.checked_add_signed(dz).filter(|&v| v < dims.nz)?;
    Some(dims.index(nx, ny, nz))
}

/// Labels the 26-connected components of `class_label`.
///
/// Stats are sorted by voxel count descending, ties by smallest linear index,
/// and ids are assigned densely from 1 in that order.
pub fn connected_components(mask: &LabelVolume, class_label: u8) -> Components {
    let dims = mask.dims();
    let data = mask.data();
    let offsets = backward_offsets();
    const NONE: u32 = u32::MAX;
    let mut prov = vec![NONE; data.len()];
    let mut sets = DisjointSet::new();

    for (i, &c) in data.iter().enumerate() {
        if c != class_label {
            continue;
        }
        let xyz = dims.coords(i);
        let mut mine = NONE;
        for &off in &offsets {
            let Some(j) = shifted(dims, xyz, off) else {
                continue;
            };
            let other = prov[j];
            if other == NONE {
                continue;
            }
            if mine == NONE {
                mine = other;
            } else {
                sets.union(mine, other);
            }
        }
        prov[i] = if mine == NONE { sets.make() } else { mine };
    }

    // Gather per-root statistics; roots are met in order of their first voxel.
    let mut root_slot = vec![NONE; sets.parent.len()];
    let mut acc: Vec<(usize, [u64; 3], usize)> = Vec::new();
    for i in 0..data.len() {
        if prov[i] == NONE {
            continue;
        }
        let root = sets.find(prov[i]);
        let slot = if root_slot[root as usize] == NONE {
            root_slot[root as usize] = acc.len() as u32;
            acc.push((0, [0; 3], i));
            acc.len() - 1
        } else {
            root_slot[root as usize] as usize
        };
        let [x, y, z] = dims.coords(i);
        let a = &mut acc[slot];
        a.0 += 1;
        a.1[0] += x as u64;
        a.1[1] += y as u64;
        a.1[2] += z as u64;
        prov[i] = slot as u32;
    }

    let mut order: Vec<usize> = (0..acc.len()).collect();
    order.sort_by(|&a, &b| acc[b].0.cmp(&acc[a].0).then(acc[a].2.cmp(&acc[b].2)));
    let mut id_of_slot = vec![0u32; acc.len()];
    let stats = order
        .iter()
        .enumerate()
        .map(|(rank, &slot)| {
            id_of_slot[slot] = rank as u32 + 1;
            let (count, sums, min_index) = acc[slot];
            let n = count as f64;
            ComponentStats {
                id: rank as u32 + 1,
                class_label,
                voxel_count: count,
                centroid: [sums[0] as f64 / n, sums[1] as f64 / n, sums[2] as f64 / n],
                min_index,
            }
        })
        .collect();
    let ids = prov
        .iter()
        .map(|&p| if p == NONE { 0 } else { id_of_slot[p as usize] })
        .collect();
    Components { stats, ids }
}
