use serde::{Deserialize, Serialize};

use super::types::{Permutation, StateSpace, TrapGrid};
use crate::error::{Error, Result};

/// Which of the two collocated detectors produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    One,
    Two,
}

/// Sorted `(trap, occasion)` cells in which one detector recorded a row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RowCaptures {
    cells: Vec<(u32, u32)>,
}

impl RowCaptures {
    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

/// Raw survey outcome: two zero-augmented binary arrays of shape M x J x K,
/// plus optional sex labels attached to the rows of either detector.
///
/// Rows `0..n_full` of both arrays hold the fully identified individuals in
/// the same order. Simulated data lists captured rows first, but nothing
/// downstream depends on that ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureDataset {
    m: usize,
    k: usize,
    n_full: usize,
    traps: TrapGrid,
    statespace: StateSpace,
    y1: Vec<u8>,
    y2: Vec<u8>,
    sex1: Vec<Option<bool>>,
    sex2: Vec<Option<bool>>,
    rows1: Vec<RowCaptures>,
    rows2: Vec<RowCaptures>,
}

/// Builder input for [`CaptureDataset::new`].
#[derive(Debug, Clone)]
pub struct DatasetParts {
    pub m: usize,
    pub k: usize,
    pub n_full: usize,
    pub traps: TrapGrid,
    pub statespace: StateSpace,
    /// Sparse `(row, trap, occasion, detector)` capture records.
    pub captures: Vec<(usize, usize, usize, Detector)>,
    /// Sparse `(detector, row, male)` sex records.
    pub sex: Vec<(Detector, usize, bool)>,
}

impl CaptureDataset {
    pub fn new(parts: DatasetParts) -> Result<Self> {
        let DatasetParts {
            m,
            k,
            n_full,
            traps,
            statespace,
            captures,
            sex,
        } = parts;
        let j = traps.len();
        if m == 0 {
            return Err(Error::arg("augmentation bound M must be positive"));
        }
        if k == 0 {
            return Err(Error::arg("number of occasions K must be positive"));
        }
        statespace.validate()?;
        let cells = m * j * k;
        let mut y1 = vec![0u8; cells];
        let mut y2 = vec![0u8; cells];
        for &(i, jj, kk, det) in &captures {
            if i >= m || jj >= j || kk >= k {
                return Err(Error::arg(format!(
                    "capture ({i}, {jj}, {kk}) outside array bounds ({m}, {j}, {k})"
                )));
            }
            let idx = (i * j + jj) * k + kk;
            match det {
                Detector::One => y1[idx] = 1,
                Detector::Two => y2[idx] = 1,
            }
        }
        let mut sex1 = vec![None; m];
        let mut sex2 = vec![None; m];
        for &(det, row, male) in &sex {
            if row >= m {
                return Err(Error::arg(format!("sex record for row {row} beyond M={m}")));
            }
            match det {
                Detector::One => sex1[row] = Some(male),
                Detector::Two => sex2[row] = Some(male),
            }
        }
        Self::from_arrays(m, k, n_full, traps, statespace, y1, y2, sex1, sex2)
    }

    /// Builds a dataset from dense arrays, validating every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_arrays(
        m: usize,
        k: usize,
        n_full: usize,
        traps: TrapGrid,
        statespace: StateSpace,
        y1: Vec<u8>,
        y2: Vec<u8>,
        sex1: Vec<Option<bool>>,
        sex2: Vec<Option<bool>>,
    ) -> Result<Self> {
        let j = traps.len();
        let cells = m * j * k;
        if y1.len() != cells || y2.len() != cells {
            return Err(Error::arg("capture arrays do not have shape M x J x K"));
        }
        if sex1.len() != m || sex2.len() != m {
            return Err(Error::arg("sex label vectors must have length M"));
        }
        if y1.iter().chain(&y2).any(|&v| v > 1) {
            return Err(Error::arg("capture arrays must be binary"));
        }
        let index = |y: &[u8]| -> Vec<RowCaptures> {
            (0..m)
                .map(|i| {
                    let row = &y[i * j * k..(i + 1) * j * k];
                    let cells = row
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v == 1)
                        .map(|(c, _)| ((c / k) as u32, (c % k) as u32))
                        .collect();
                    RowCaptures { cells }
                })
                .collect()
        };
        let rows1 = index(&y1);
        let rows2 = index(&y2);
        let data = CaptureDataset {
            m,
            k,
            n_full,
            traps,
            statespace,
            y1,
            y2,
            sex1,
            sex2,
            rows1,
            rows2,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        for (name, rows) in [("detector 1", &self.rows1), ("detector 2", &self.rows2)] {
            let captured = rows.iter().filter(|r| !r.is_empty()).count();
            if self.n_full > captured {
                return Err(Error::arg(format!(
                    "n_full = {} exceeds the {captured} captured {name} rows",
                    self.n_full
                )));
            }
        }
        for r in 0..self.n_full {
            if coincident_cells(&self.rows1[r], &self.rows2[r]) == 0 {
                return Err(Error::arg(format!(
                    "fully identified row {r} has no simultaneous capture"
                )));
            }
        }
        for (i, (a, b)) in self.sex1.iter().zip(&self.sex2).enumerate().take(self.n_full) {
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    return Err(Error::arg(format!(
                        "fully identified row {i} carries conflicting sex labels"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn j(&self) -> usize {
        self.traps.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn traps(&self) -> &TrapGrid {
        &self.traps
    }

    pub fn statespace(&self) -> &StateSpace {
        &self.statespace
    }

    pub fn y1(&self) -> &[u8] {
        &self.y1
    }

    pub fn y2(&self) -> &[u8] {
        &self.y2
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.j() + j) * self.k + k
    }

    pub fn rows1(&self) -> &[RowCaptures] {
        &self.rows1
    }

    pub fn rows2(&self) -> &[RowCaptures] {
        &self.rows2
    }

    /// Number of non-empty detector-1 rows.
    pub fn n_captured1(&self) -> usize {
        self.rows1.iter().filter(|r| !r.is_empty()).count()
    }

    /// Number of non-empty detector-2 rows.
    pub fn n_captured2(&self) -> usize {
        self.rows2.iter().filter(|r| !r.is_empty()).count()
    }

    /// Copy with detector-2 rows (and their sex labels) moved to their true
    /// indices under `l`, so that the identity permutation links them.
    pub fn reordered_by(&self, l: &Permutation) -> Result<CaptureDataset> {
        if l.len() != self.m {
            return Err(Error::invariant("permutation length differs from M"));
        }
        let y2 = reorder_rows(&self.y2, self.j() * self.k, l);
        let mut sex2 = vec![None; self.m];
        for (r, s) in self.sex2.iter().enumerate() {
            sex2[l.image(r)] = *s;
        }
        CaptureDataset::from_arrays(
            self.m,
            self.k,
            self.n_full,
            self.traps.clone(),
            self.statespace,
            self.y1.clone(),
            y2,
            self.sex1.clone(),
            sex2,
        )
    }

    pub fn sex1(&self) -> &[Option<bool>] {
        &self.sex1
    }

    pub fn sex2(&self) -> &[Option<bool>] {
        &self.sex2
    }

    pub fn has_sex_labels(&self) -> bool {
        self.sex1.iter().chain(&self.sex2).any(Option::is_some)
    }

    /// Total number of detections across both arrays.
    pub fn total_captures(&self) -> usize {
        self.rows1.iter().chain(&self.rows2).map(RowCaptures::len).sum()
    }

    /// Sparse capture records in `(row, trap, occasion, detector)` order.
    pub fn capture_records(&self) -> Vec<(usize, usize, usize, Detector)> {
        let mut out = Vec::with_capacity(self.total_captures());
        for (det, rows) in [(Detector::One, &self.rows1), (Detector::Two, &self.rows2)] {
            for (i, row) in rows.iter().enumerate() {
                for &(j, k) in row.cells() {
                    out.push((i, j as usize, k as usize, det));
                }
            }
        }
        out
    }

    /// Sparse sex records in `(detector, row, male)` order.
    pub fn sex_records(&self) -> Vec<(Detector, usize, bool)> {
        let mut out = Vec::new();
        for (det, labels) in [(Detector::One, &self.sex1), (Detector::Two, &self.sex2)] {
            for (row, s) in labels.iter().enumerate() {
                if let Some(male) = s {
                    out.push((det, row, *male));
                }
            }
        }
        out
    }

    /// Copy of the dataset with every sex label removed.
    pub fn without_sex(&self) -> CaptureDataset {
        let mut out = self.clone();
        out.sex1 = vec![None; self.m];
        out.sex2 = vec![None; self.m];
        out
    }
}

/// Number of `(trap, occasion)` cells recorded in both rows.
pub fn coincident_cells(a: &RowCaptures, b: &RowCaptures) -> usize {
    let (mut p, mut q, mut n) = (0, 0, 0);
    let (a, b) = (a.cells(), b.cells());
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                p += 1;
                q += 1;
            }
        }
    }
    n
}

/// Moves row `r` of a row-major array to row `l.image(r)`.
pub(crate) fn reorder_rows<T: Copy + Default>(rows: &[T], row_len: usize, l: &Permutation) -> Vec<T> {
    let mut out = vec![T::default(); rows.len()];
    for r in 0..l.len() {
        let i = l.image(r);
        out[i * row_len..(i + 1) * row_len].copy_from_slice(&rows[r * row_len..(r + 1) * row_len]);
    }
    out
}

/// Reorders the rows of a binary array (row length `row_len`) so that row `i`
/// of the output is the input row whose true index is `i` under `l`.
///
/// `l[r]` is the true index of input row `r`; it has to be a bijection.
pub fn reorder_by_permutation(y2: &[u8], row_len: usize, l: &[u32]) -> Result<Vec<u8>> {
    let perm = Permutation::from_vec(l.to_vec())?;
    if row_len == 0 || y2.len() != row_len * perm.len() {
        return Err(Error::invariant(format!(
            "array of {} cells does not hold {} rows of length {row_len}",
            y2.len(),
            perm.len()
        )));
    }
    Ok(reorder_rows(y2, row_len, &perm))
}
