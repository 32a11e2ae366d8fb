//! Points and axis-parallel boxes.


#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point in R^n stored in a fixed array; coordinates beyond `dim` are zero.
pub type Point = [f64; MAX_DIM];

/// Relative slack used for closed-set membership of cell centers and nodes.
pub(crate) const GEOM_EPS: f64 = 1e-12;

pub fn norm(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &Point, b: &Point, dim: usize) -> f64 {
    (0..dim)
        .map(|k| (a[k] - b[k]) * (a[k] - b[k]))
        .sum::<f64>()
        .sqrt()
}

pub fn point(coords: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..coords.len()].copy_from_slice(coords);
    p
}

/// An axis-parallel box `[lo, hi]` (open or closed as the caller needs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    dim: usize,
    lo: Point,
    hi: Point,
}

impl Region {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        if hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: hi.len(),
            });
        }
        for k in 0..dim {
            if !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::NonPositiveExtent { axis: k });
            }
        }
        Ok(Region {
            dim,
            lo: point(lo),
            hi: point(hi),
        })
    }

    /// Cube with the given center and side length.
    pub fn cube(center: &[f64], side: f64) -> Result<Self> {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for (k, c) in center.iter().enumerate().take(MAX_DIM) {
            lo[k] = c - side / 2.0;
            hi[k] = c + side / 2.0;
        }
        let dim = center.len();
        Region::new(&lo[..dim.min(MAX_DIM)], &hi[..dim.min(MAX_DIM)])
    }

    pub(crate) fn from_points(dim: usize, lo: Point, hi: Point) -> Self {
        Region { dim, lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Largest side length; equals the side length `R` for cubes.
    pub fn side_length(&self) -> f64 {
        (0..self.dim).map(|k| self.side(k)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.side(k)).product()
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; MAX_DIM];
        for k in 0..self.dim {
            c[k] = 0.5 * (self.lo[k] + self.hi[k]);
        }
        c
    }

    /// The box scaled by `factor` about its own center (`γQ`).
    pub fn scaled(&self, factor: f64) -> Region {
        let c = self.center();
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for k in 0..self.dim {
            let half = 0.5 * factor * self.side(k);
            lo[k] = c[k] - half;
            hi[k] = c[k] + half;
        }
        Region {
            dim: self.dim,
            lo,
            hi,
        }
    }

    pub fn intersection(&self, other: &Region) -> Option<Region> {
        if self.dim != other.dim {
            return None;
        }
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for k in 0..self.dim {
            lo[k] = self.lo[k].max(other.lo[k]);
            hi[k] = self.hi[k].min(other.hi[k]);
            if !(hi[k] > lo[k]) {
                return None;
            }
        }
        Some(Region {
            dim: self.dim,
            lo,
            hi,
        })
    }

    fn slack(&self) -> f64 {
        GEOM_EPS * (1.0 + self.side_length() + norm(&self.center(), self.dim))
    }

    /// Closed membership with a small relative slack.
    pub fn contains_point(&self, p: &Point) -> bool {
        let eps = self.slack();
        (0..self.dim).all(|k| p[k] >= self.lo[k] - eps && p[k] <= self.hi[k] + eps)
    }

    /// Whether `other` lies inside the closed box (with slack).
    pub fn contains_region(&self, other: &Region) -> bool {
        let eps = self.slack();
        self.dim == other.dim
            && (0..self.dim).all(|k| other.lo[k] >= self.lo[k] - eps && other.hi[k] <= self.hi[k] + eps)
    }

    /// `sup_{y in Q} |y|`, attained at a corner.
    pub fn max_norm(&self) -> f64 {
        (0..self.dim)
            .map(|k| {
                let m = self.lo[k].abs().max(self.hi[k].abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Whether two boxes are disjoint up to a null set, or one contains the other.
    pub fn disjoint_or_nested(&self, other: &Region) -> bool {
        self.intersection(other).is_none()
            || self.contains_region(other)
            || other.contains_region(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_keeps_center() {
        let q = Region::new(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        let d = q.scaled(2.0);
        assert_eq!(d.lo(), &[-0.5, -1.0]);
        assert_eq!(d.hi(), &[1.5, 3.0]);
        assert_eq!(d.center(), q.center());
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(Region::new(&[0.0], &[0.0]).is_err());
        assert!(Region::new(&[0.0, 0.0], &[1.0]).is_err());
        assert!(Region::new(&[], &[]).is_err());
    }

    #[test]
    fn max_norm_is_farthest_corner() {
        let q = Region::new(&[-3.0, 1.0], &[2.0, 4.0]).unwrap();
        assert!((q.max_norm() - 5.0).abs() < 1e-15);
    }
}
