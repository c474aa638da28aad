//! Region placement on the 2-D chiplet mesh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HardwareConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    pub rows: usize,
    pub cols: usize,
}

impl Mesh {
    pub fn new(rows: usize, cols: usize) -> Self {
        Mesh { rows, cols }
    }

    pub fn of(hw: &HardwareConfig) -> Self {
        Mesh::new(hw.mesh_rows, hw.mesh_cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    /// Row-major index of a coordinate.
    pub fn index(&self, c: Coord) -> usize {
        c.row * self.cols + c.col
    }

    /// Boustrophedon walk: even rows left to right, odd rows right to left.
    pub fn zigzag(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |i| {
                let col = if r % 2 == 0 { i } else { self.cols - 1 - i };
                Coord::new(r, col)
            })
        })
    }
}

pub type RegionPlacement = Vec<Coord>;

/// Assigns consecutive stretches of the zigzag walk to consecutive regions.
pub fn zigzag_place(region_sizes: &[usize], mesh: Mesh) -> Result<Vec<RegionPlacement>> {
    let total: usize = region_sizes.iter().sum();
    if total != mesh.len() || region_sizes.contains(&0) {
        return Err(Error::SizeMismatch {
            expected: mesh.len(),
            got: total,
        });
    }
    let mut walk = mesh.zigzag();
    Ok(region_sizes
        .iter()
        .map(|&n| walk.by_ref().take(n).collect())
        .collect())
}

/// Number of mesh links joining a chiplet of `a` to a chiplet of `b`.
pub fn boundary_width(a: &[Coord], b: &[Coord]) -> Result<usize> {
    let mut sorted = b.to_vec();
    sorted.sort_unstable();
    if a.iter().any(|c| sorted.binary_search(c).is_ok()) {
        return Err(Error::Invariant("boundary_width needs disjoint regions".into()));
    }
    Ok(links_into_sorted(a, &sorted))
}

pub(crate) fn links_into_sorted(a: &[Coord], sorted_b: &[Coord]) -> usize {
    let hit = |r: Option<usize>, c: Option<usize>| match (r, c) {
        (Some(row), Some(col)) => sorted_b.binary_search(&Coord::new(row, col)).is_ok() as usize,
        _ => 0,
    };
    a.iter()
        .map(|x| {
            hit(x.row.checked_sub(1), Some(x.col))
                + hit(Some(x.row + 1), Some(x.col))
                + hit(Some(x.row), x.col.checked_sub(1))
                + hit(Some(x.row), Some(x.col + 1))
        })
        .sum()
}
