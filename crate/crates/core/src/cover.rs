//! Overlapping hyperrectangle cover of the unit lens box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lenses::LensValues;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub k: usize,
    pub r: usize,
    pub epsilon: f64,
}

impl CoverSpec {
    pub fn new(k: usize, r: usize, epsilon: f64) -> Result<Self> {
        let spec = CoverSpec { k, r, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter(
                "lens dimension must be at least 1".into(),
            ));
        }
        if self.r == 0 {
            return Err(Error::InvalidParameter(
                "resolution must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "overlap must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if (self.r as f64).powi(self.k as i32) > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "{}^{} bins is too many",
                self.r, self.k
            )));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        self.r.pow(self.k as u32)
    }

    /// Half of the added width, applied on each side of a base interval.
    pub fn pad(&self) -> f64 {
        self.epsilon / (2.0 * self.r as f64)
    }

    /// Interval `i` of a single dimension, expanded and unclipped.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let r = self.r as f64;
        let pad = self.pad();
        (i as f64 / r - pad, (i + 1) as f64 / r + pad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// Row-major flat index into the `r^k` grid.
    pub flat: usize,
    /// Interval index per dimension.
    pub index: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bin {
    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// Product of side lengths.
    pub fn measure(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    spec: CoverSpec,
    bins: Vec<Bin>,
}

/// All `r^k` bins in row-major order (last dimension varies fastest).
pub fn build_cover(spec: CoverSpec) -> Result<Cover> {
    spec.validate()?;
    let mut bins = Vec::with_capacity(spec.bin_count());
    for flat in 0..spec.bin_count() {
        let index = unflatten(flat, spec.r, spec.k);
        let (lower, upper) = index.iter().map(|&i| spec.interval(i)).unzip();
        bins.push(Bin {
            flat,
            index,
            lower,
            upper,
        });
    }
    Ok(Cover { spec, bins })
}

fn unflatten(mut flat: usize, r: usize, k: usize) -> Vec<usize> {
    let mut index = vec![0; k];
    for slot in index.iter_mut().rev() {
        *slot = flat % r;
        flat /= r;
    }
    index
}

impl Cover {
    pub fn spec(&self) -> &CoverSpec {
        &self.spec
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Sum of expanded bin measures.
    pub fn total_measure(&self) -> f64 {
        self.bins.iter().map(Bin::measure).sum()
    }

    /// Interval indices along one dimension whose expanded interval holds `x`.
    fn hits_1d(&self, x: f64) -> impl Iterator<Item = usize> + '_ {
        let r = self.spec.r;
        // Expanded width is below 2/r, so only neighbours of the base cell can match.
        let base = (x * r as f64).floor() as i64;
        (base - 2..=base + 2)
            .filter(move |&i| i >= 0 && (i as usize) < r)
            .map(|i| i as usize)
            .filter(move |&i| {
                let (lo, hi) = self.spec.interval(i);
                lo <= x && x <= hi
            })
    }

    /// Sorted flat indices of every bin containing `v`.
    pub fn bins_containing(&self, v: &[f64]) -> Vec<usize> {
        let r = self.spec.r;
        let mut flats = vec![0usize];
        for &x in v {
            let hits: Vec<usize> = self.hits_1d(x).collect();
            flats = flats
                .iter()
                .flat_map(|&f| hits.iter().map(move |&h| f * r + h))
                .collect();
        }
        flats.sort_unstable();
        flats
    }
}

/// Per-instance sorted lists of bins containing its lens value.
pub fn assign_bins(values: &LensValues, cover: &Cover) -> Result<Vec<Vec<usize>>> {
    if values.dims() != cover.spec.k {
        return Err(Error::DimensionMismatch {
            expected: cover.spec.k,
            found: values.dims(),
        });
    }
    Ok((0..values.len())
        .map(|i| cover.bins_containing(values.row(i)))
        .collect())
}

/// Inverts an assignment: for every bin, the ascending list of its members.
pub fn bin_members(assignments: &[Vec<usize>], bin_count: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); bin_count];
    for (i, bins) in assignments.iter().enumerate() {
        for &b in bins {
            members[b].push(i);
        }
    }
    members
}
