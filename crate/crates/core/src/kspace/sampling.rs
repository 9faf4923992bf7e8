use std::fmt;

use crate::error::{Error, Result};

use super::GridShape;

/// A k-space grid position `(ky, kz, t)`. Ordering is lexicographic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KPoint {
    pub ky: usize,
    pub kz: usize,
    pub t: usize,
}

impl KPoint {
    pub fn new(ky: usize, kz: usize, t: usize) -> Self {
        Self { ky, kz, t }
    }
}

impl fmt::Display for KPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.ky, self.kz, self.t)
    }
}

/// The sampled subset `Omega` of the Cartesian grid, with a protected
/// calibration region that is always part of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPattern {
    ny: usize,
    nz: usize,
    nt: usize,
    mask: Vec<bool>,
    calibration: Vec<bool>,
    len: usize,
    calibration_len: usize,
}

impl SamplingPattern {
    /// A pattern that holds exactly the given calibration points.
    pub fn with_calibration(
        ny: usize,
        nz: usize,
        nt: usize,
        calibration: impl IntoIterator<Item = KPoint>,
    ) -> Result<Self> {
        if ny == 0 || nz == 0 || nt == 0 {
            return Err(Error::invalid("sampling grid must be non-empty"));
        }
        let n = ny * nz * nt;
        let mut sp = Self {
            ny,
            nz,
            nt,
            mask: vec![false; n],
            calibration: vec![false; n],
            len: 0,
            calibration_len: 0,
        };
        for p in calibration {
            let i = sp.index_of(p)?;
            if sp.calibration[i] {
                return Err(Error::invalid(format!("duplicate calibration point {p}")));
            }
            sp.calibration[i] = true;
            sp.mask[i] = true;
            sp.len += 1;
            sp.calibration_len += 1;
        }
        Ok(sp)
    }

    /// Builds a pattern from sampled points plus calibration points.
    ///
    /// A point listed in both sets is an error, as is any repeated point.
    pub fn from_points(
        ny: usize,
        nz: usize,
        nt: usize,
        points: impl IntoIterator<Item = KPoint>,
        calibration: impl IntoIterator<Item = KPoint>,
    ) -> Result<Self> {
        let mut sp = Self::with_calibration(ny, nz, nt, calibration)?;
        for p in points {
            if !sp.insert(p)? {
                return Err(Error::invalid(format!("duplicate point {p}")));
            }
        }
        Ok(sp)
    }

    /// Every cell of the grid sampled; calibration as given.
    pub fn full(
        ny: usize,
        nz: usize,
        nt: usize,
        calibration: impl IntoIterator<Item = KPoint>,
    ) -> Result<Self> {
        let mut sp = Self::with_calibration(ny, nz, nt, calibration)?;
        sp.mask.iter_mut().for_each(|m| *m = true);
        sp.len = sp.mask.len();
        Ok(sp)
    }

    pub fn grid(&self) -> (usize, usize, usize) {
        (self.ny, self.nz, self.nt)
    }

    pub fn matches(&self, shape: &GridShape) -> bool {
        self.ny == shape.ny && self.nz == shape.nz && self.nt == shape.nt
    }

    /// Number of grid cells `N`.
    pub fn cells(&self) -> usize {
        self.mask.len()
    }

    /// Number of sampled points `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn calibration_len(&self) -> usize {
        self.calibration_len
    }

    /// `N / M`.
    pub fn acceleration(&self) -> f64 {
        self.cells() as f64 / self.len as f64
    }

    /// Boolean mask in `(t, ky, kz)` layout.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn calibration_mask(&self) -> &[bool] {
        &self.calibration
    }

    pub fn index_of(&self, p: KPoint) -> Result<usize> {
        if p.ky >= self.ny || p.kz >= self.nz || p.t >= self.nt {
            return Err(Error::invalid(format!(
                "point {p} outside {}x{}x{} grid",
                self.ny, self.nz, self.nt
            )));
        }
        Ok((p.t * self.ny + p.ky) * self.nz + p.kz)
    }

    pub fn point_at(&self, index: usize) -> KPoint {
        let kz = index % self.nz;
        let rest = index / self.nz;
        KPoint::new(rest % self.ny, kz, rest / self.ny)
    }

    pub fn contains(&self, p: KPoint) -> bool {
        self.index_of(p).map(|i| self.mask[i]).unwrap_or(false)
    }

    pub fn is_calibration(&self, p: KPoint) -> bool {
        self.index_of(p).map(|i| self.calibration[i]).unwrap_or(false)
    }

    /// Sampled points in lexicographic `(ky, kz, t)` order.
    pub fn points(&self) -> impl Iterator<Item = KPoint> + '_ {
        self.lex_cells().filter(move |&p| self.mask[self.raw_index(p)])
    }

    pub fn calibration_points(&self) -> impl Iterator<Item = KPoint> + '_ {
        self.lex_cells()
            .filter(move |&p| self.calibration[self.raw_index(p)])
    }

    /// Every grid cell in lexicographic order.
    pub fn lex_cells(&self) -> impl Iterator<Item = KPoint> {
        let (ny, nz, nt) = (self.ny, self.nz, self.nt);
        (0..ny).flat_map(move |ky| {
            (0..nz).flat_map(move |kz| (0..nt).map(move |t| KPoint::new(ky, kz, t)))
        })
    }

    fn raw_index(&self, p: KPoint) -> usize {
        (p.t * self.ny + p.ky) * self.nz + p.kz
    }

    /// Adds a point; returns whether it was newly inserted.
    pub fn insert(&mut self, p: KPoint) -> Result<bool> {
        let i = self.index_of(p)?;
        if self.mask[i] {
            return Ok(false);
        }
        self.mask[i] = true;
        self.len += 1;
        Ok(true)
    }

    /// Removes a point; calibration points cannot be removed.
    pub fn remove(&mut self, p: KPoint) -> Result<bool> {
        let i = self.index_of(p)?;
        if self.calibration[i] {
            return Err(Error::invalid(format!("cannot remove calibration point {p}")));
        }
        if !self.mask[i] {
            return Ok(false);
        }
        self.mask[i] = false;
        self.len -= 1;
        Ok(true)
    }

    /// `(self \ remove) ∪ add`.
    pub fn with_changes(&self, remove: &[KPoint], add: &[KPoint]) -> Result<Self> {
        let mut next = self.clone();
        for &p in remove {
            next.remove(p)?;
        }
        for &p in add {
            next.insert(p)?;
        }
        Ok(next)
    }

    /// Checks the structural invariants; used by tests and file readers.
    pub fn check_invariants(&self) -> Result<()> {
        let count = self.mask.iter().filter(|&&m| m).count();
        let cal = self.calibration.iter().filter(|&&c| c).count();
        if count != self.len || cal != self.calibration_len {
            return Err(Error::invalid("cached point counts are stale"));
        }
        if self
            .mask
            .iter()
            .zip(&self.calibration)
            .any(|(&m, &c)| c && !m)
        {
            return Err(Error::invalid("calibration point missing from pattern"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_points() {
        let pts = [KPoint::new(1, 0, 1), KPoint::new(0, 2, 0), KPoint::new(1, 0, 0)];
        let sp = SamplingPattern::from_points(2, 3, 2, pts, []).unwrap();
        let got: Vec<_> = sp.points().collect();
        assert_eq!(
            got,
            vec![KPoint::new(0, 2, 0), KPoint::new(1, 0, 0), KPoint::new(1, 0, 1)]
        );
        for p in got {
            assert_eq!(sp.point_at(sp.index_of(p).unwrap()), p);
        }
    }

    #[test]
    fn calibration_is_protected() {
        let c = KPoint::new(1, 1, 0);
        let mut sp = SamplingPattern::with_calibration(3, 3, 1, [c]).unwrap();
        assert!(sp.contains(c));
        assert!(sp.remove(c).is_err());
        assert_eq!(sp.len(), 1);
    }

    #[test]
    fn duplicates_and_out_of_grid_rejected() {
        let p = KPoint::new(0, 0, 0);
        assert!(SamplingPattern::from_points(2, 2, 1, [p, p], []).is_err());
        assert!(SamplingPattern::from_points(2, 2, 1, [p], [p]).is_err());
        assert!(SamplingPattern::from_points(2, 2, 1, [KPoint::new(2, 0, 0)], []).is_err());
    }

    #[test]
    fn with_changes_keeps_counts() {
        let sp = SamplingPattern::from_points(
            4,
            4,
            1,
            [KPoint::new(0, 0, 0), KPoint::new(3, 3, 0)],
            [KPoint::new(2, 2, 0)],
        )
        .unwrap();
        let next = sp
            .with_changes(&[KPoint::new(0, 0, 0)], &[KPoint::new(1, 1, 0)])
            .unwrap();
        assert_eq!(next.len(), 3);
        next.check_invariants().unwrap();
        assert!(next.contains(KPoint::new(1, 1, 0)));
        assert!(!next.contains(KPoint::new(0, 0, 0)));
    }
}
