//! Uniform cell-list neighbor search over an unbounded domain.
//!
//! Cells are keyed by integer coordinates in a hash map, so no bounding box
//! is needed. The cell edge is sized to the largest possible detection
//! distance, which makes the 27-cell stencil sufficient.

use crate::kinematics::ParticleSet;
use std::collections::HashMap;

pub struct CellList {
    cell_edge: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl CellList {
    /// Build from particle centers with the given cell edge (must be at
    /// least the largest center-distance the caller wants to detect).
    pub fn build(particles: &ParticleSet, cell_edge: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in particles.particles.iter().enumerate() {
            cells
                .entry(Self::key(p.center, cell_edge))
                .or_default()
                .push(i);
        }
        CellList { cell_edge, cells }
    }

    fn key(c: [f64; 3], edge: f64) -> (i64, i64, i64) {
        (
            (c[0] / edge).floor() as i64,
            (c[1] / edge).floor() as i64,
            (c[2] / edge).floor() as i64,
        )
    }

    /// Visit every unordered candidate pair `(i, j)` whose centers lie within
    /// one cell edge of each other (plus diagonal slack from the stencil).
    /// Pairs may be visited in any order; each pair is seen exactly once.
    pub fn for_each_candidate_pair(&self, mut f: impl FnMut(usize, usize)) {
        for (&(cx, cy, cz), members) in &self.cells {
            // pairs within the home cell
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    f(i.min(j), i.max(j));
                }
            }
            // pairs against forward half of the stencil, so each neighboring
            // cell pair is processed from exactly one side
            for &(dx, dy, dz) in FORWARD_STENCIL {
                let other = (cx + dx, cy + dy, cz + dz);
                if let Some(on) = self.cells.get(&other) {
                    for &i in members {
                        for &j in on {
                            f(i.min(j), i.max(j));
                        }
                    }
                }
            }
        }
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }
}

/// Half of the 26 neighbor offsets: lexicographically positive ones.
const FORWARD_STENCIL: &[(i64, i64, i64)] = &[
    (1, -1, -1),
    (1, -1, 0),
    (1, -1, 1),
    (1, 0, -1),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, -1),
    (1, 1, 0),
    (1, 1, 1),
    (0, 1, -1),
    (0, 1, 0),
    (0, 1, 1),
    (0, 0, 1),
];
