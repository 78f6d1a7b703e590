//! Starting values for the sampler.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::likelihood::{observed_sex, SexEvidence};
use crate::model::{coincident_cells, CaptureDataset, Permutation, Point, RowCaptures};

/// Mean distance from each trap to its nearest neighbour.
pub(crate) fn mean_trap_spacing(data: &CaptureDataset) -> f64 {
    let locs = data.traps().locations();
    if locs.len() < 2 {
        return data.statespace().width().min(data.statespace().height());
    }
    let total: f64 = locs
        .iter()
        .enumerate()
        .map(|(a, p)| {
            locs.iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, q)| p.dist2(q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    total / locs.len() as f64
}

fn centroid(data: &CaptureDataset, rows: &[&RowCaptures]) -> Option<Point> {
    let locs = data.traps().locations();
    let (mut x, mut y, mut n) = (0.0, 0.0, 0usize);
    for row in rows {
        for &(j, _) in row.cells() {
            x += locs[j as usize].x;
            y += locs[j as usize].y;
            n += 1;
        }
    }
    (n > 0).then(|| Point::new(x / n as f64, y / n as f64))
}

/// Greedy spatial matching of partial detector-2 rows to partial
/// detector-1 rows: nearest centroids first, within twice the mean trap
/// spacing, never across a shared cell or conflicting sex labels.
pub(crate) fn greedy_linkage(data: &CaptureDataset) -> Result<Permutation> {
    let m = data.m();
    let nf = data.n_full();
    let threshold = 2.0 * mean_trap_spacing(data);
    let rows1 = data.rows1();
    let rows2 = data.rows2();
    let partial1: Vec<usize> = (nf..m).filter(|&i| !rows1[i].is_empty()).collect();
    let partial2: Vec<usize> = (nf..m).filter(|&r| !rows2[r].is_empty()).collect();
    let c1: Vec<Option<Point>> = (0..m)
        .map(|i| if rows1[i].is_empty() { None } else { centroid(data, &[&rows1[i]]) })
        .collect();

    let mut candidates = Vec::new();
    for &r in &partial2 {
        let c2 = centroid(data, &[&rows2[r]]).expect("captured row");
        for &i in &partial1 {
            if coincident_cells(&rows1[i], &rows2[r]) > 0 {
                continue;
            }
            if let (Some(a), Some(b)) = (data.sex1()[i], data.sex2()[r]) {
                if a != b {
                    continue;
                }
            }
            let d = c1[i].expect("captured row").dist2(&c2).sqrt();
            if d < threshold {
                candidates.push((d, r, i));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut forward = vec![u32::MAX; m];
    let mut taken = vec![false; m];
    for r in 0..nf {
        forward[r] = r as u32;
        taken[r] = true;
    }
    for (_, r, i) in candidates {
        if forward[r] == u32::MAX && !taken[i] {
            forward[r] = i as u32;
            taken[i] = true;
        }
    }
    // Unmatched captured rows go to indices without a detector-1 record.
    let mut empty1 = (nf..m).filter(|&i| rows1[i].is_empty());
    for &r in &partial2 {
        if forward[r] == u32::MAX {
            let i = empty1
                .by_ref()
                .find(|&i| !taken[i])
                .ok_or_else(|| Error::arg("augmentation bound M is smaller than the number of distinct captured rows"))?;
            forward[r] = i as u32;
            taken[i] = true;
        }
    }
    let mut free = (0..m).filter(|&i| !taken[i]);
    for slot in forward.iter_mut().filter(|v| **v == u32::MAX) {
        *slot = free.next().expect("counts match") as u32;
    }
    Permutation::from_vec(forward)
}

/// Centroid of the traps where the linked pair was recorded, or a uniform
/// point when it was never recorded.
pub(crate) fn initial_centre<R: Rng>(
    data: &CaptureDataset,
    i: usize,
    r: usize,
    grid: Option<&[Point]>,
    rng: &mut R,
) -> Point {
    let c = centroid(data, &[&data.rows1()[i], &data.rows2()[r]]);
    match (grid, c) {
        (Some(g), Some(c)) => *g
            .iter()
            .min_by(|a, b| a.dist2(&c).total_cmp(&b.dist2(&c)))
            .expect("non-empty grid"),
        (Some(g), None) => g[rng.random_range(0..g.len())],
        (None, Some(c)) => c,
        (None, None) => {
            let ss = data.statespace();
            Point::new(
                rng.random_range(ss.x_min..ss.x_max),
                rng.random_range(ss.y_min..ss.y_max),
            )
        }
    }
}

/// Observed label for index `i` under `l`, if any.
pub(crate) fn fixed_sex(data: &CaptureDataset, i: usize, r: usize) -> Option<bool> {
    match observed_sex(data, i, r) {
        SexEvidence::Known(v) => Some(v),
        _ => None,
    }
}
