//! Measured left/right-hand sides of an inequality.

use alloc::vec::Vec;

use crate::geometry::Region;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    /// A doubled cube left the grid domain and averages were clipped.
    Clipped,
    /// The dyadic lattice was truncated above the grid resolution.
    Truncated,
    /// The pointwise decay term was dropped (farthest-point evaluation).
    DecayTermDropped,
    /// The discrete sub-grid of a cube differs from the geometric cube.
    SubgridMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs_components: Vec<(&'static str, f64)>,
    /// `lhs / sum(rhs_components)`; zero when both vanish.
    pub empirical_constant: f64,
    pub cube: Region,
    pub resolution: Vec<usize>,
    pub flags: Vec<Flag>,
    /// Auxiliary measured quantities that are not part of the right-hand side.
    pub extras: Vec<(&'static str, f64)>,
}

impl EstimateRecord {
    pub fn new(
        name: &'static str,
        lhs: f64,
        rhs_components: Vec<(&'static str, f64)>,
        cube: Region,
        grid: &Grid,
    ) -> Self {
        let mut rec = EstimateRecord {
            name,
            lhs,
            rhs_components,
            empirical_constant: 0.0,
            cube,
            resolution: grid.cells_per_axis().to_vec(),
            flags: Vec::new(),
            extras: Vec::new(),
        };
        rec.refresh_constant();
        rec
    }

    pub fn rhs_sum(&self) -> f64 {
        self.rhs_components.iter().map(|(_, v)| v).sum()
    }

    pub(crate) fn refresh_constant(&mut self) {
        let rhs = self.rhs_sum();
        self.empirical_constant = if rhs > 0.0 {
            self.lhs / rhs
        } else if self.lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }

    pub fn flag(&mut self, flag: Flag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn rhs(&self, name: &str) -> Option<f64> {
        self.rhs_components
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}
