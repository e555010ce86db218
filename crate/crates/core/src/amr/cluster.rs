//! Flag masks and Berger-Rigoutsos clustering of flagged cells into
//! rectangles.

use crate::grid::IndexBox;

/// Dense boolean mask over an index box.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub bx: IndexBox,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(bx: IndexBox) -> Self {
        Self { bx, data: vec![false; bx.cells() as usize] }
    }

    fn offset(&self, i: i64, j: i64) -> Option<usize> {
        self.bx
            .contains(i, j)
            .then(|| ((j - self.bx.jlo) * self.bx.nx + (i - self.bx.ilo)) as usize)
    }

    pub fn get(&self, i: i64, j: i64) -> bool {
        self.offset(i, j).is_some_and(|k| self.data[k])
    }

    pub fn set(&mut self, i: i64, j: i64, v: bool) {
        if let Some(k) = self.offset(i, j) {
            self.data[k] = v;
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Smallest box holding every set cell.
    pub fn bounding_box(&self) -> Option<IndexBox> {
        bounding_box_within(self, &self.bx)
    }

    /// Grow every set cell by `buffer` cells in each direction, clipped to
    /// `clip`. The result covers the grown bounding box.
    pub fn dilate(&self, buffer: i64, clip: &IndexBox) -> Mask {
        let Some(grown) = self.bx.grow(buffer).intersect(clip) else {
            return Mask::new(IndexBox::new(clip.ilo, clip.jlo, 0, 0));
        };
        let mut out = Mask::new(grown);
        // separable dilation: rows then columns
        let mut rows = Mask::new(grown);
        for j in grown.jlo..grown.jhi() {
            for i in grown.ilo..grown.ihi() {
                if (i - buffer..=i + buffer).any(|ii| self.get(ii, j)) {
                    rows.set(i, j, true);
                }
            }
        }
        for j in grown.jlo..grown.jhi() {
            for i in grown.ilo..grown.ihi() {
                if (j - buffer..=j + buffer).any(|jj| rows.get(i, jj)) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn cells_in(&self, bx: &IndexBox) -> usize {
        let Some(b) = bx.intersect(&self.bx) else { return 0 };
        (b.jlo..b.jhi()).map(|j| (b.ilo..b.ihi()).filter(|&i| self.get(i, j)).count()).sum()
    }
}

fn bounding_box_within(mask: &Mask, bx: &IndexBox) -> Option<IndexBox> {
    let b = bx.intersect(&mask.bx)?;
    let (mut ilo, mut jlo, mut ihi, mut jhi) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for j in b.jlo..b.jhi() {
        for i in b.ilo..b.ihi() {
            if mask.get(i, j) {
                ilo = ilo.min(i);
                ihi = ihi.max(i + 1);
                jlo = jlo.min(j);
                jhi = jhi.max(j + 1);
            }
        }
    }
    (ilo <= ihi && ilo != i64::MAX).then(|| IndexBox::new(ilo, jlo, ihi - ilo, jhi - jlo))
}

/// Rectangles covering every set cell, each with a fill fraction of at
/// least `min_fill` unless it could not be split further.
pub fn cluster_flags(mask: &Mask, min_fill: f64) -> Vec<IndexBox> {
    let mut out = Vec::new();
    if let Some(bx) = mask.bounding_box() {
        split(mask, bx, min_fill, &mut out);
    }
    out
}

fn signatures(mask: &Mask, bx: &IndexBox) -> (Vec<usize>, Vec<usize>) {
    let mut sx = vec![0; bx.nx as usize];
    let mut sy = vec![0; bx.ny as usize];
    for j in bx.jlo..bx.jhi() {
        for i in bx.ilo..bx.ihi() {
            if mask.get(i, j) {
                sx[(i - bx.ilo) as usize] += 1;
                sy[(j - bx.jlo) as usize] += 1;
            }
        }
    }
    (sx, sy)
}

/// Zero entry closest to the middle, as a cut position `k` (split before k).
fn hole(sig: &[usize]) -> Option<usize> {
    let mid = sig.len() as f64 / 2.0;
    (1..sig.len().saturating_sub(1))
        .filter(|&k| sig[k] == 0)
        .min_by(|&a, &b| (a as f64 - mid).abs().total_cmp(&(b as f64 - mid).abs()))
}

/// Strongest zero crossing of the signature's second difference; returns
/// the cut position and its strength.
fn inflection(sig: &[usize]) -> Option<(usize, i64)> {
    if sig.len() < 4 {
        return None;
    }
    let lap: Vec<i64> = (1..sig.len() - 1)
        .map(|k| sig[k - 1] as i64 - 2 * sig[k] as i64 + sig[k + 1] as i64)
        .collect();
    let mut best: Option<(usize, i64)> = None;
    for k in 0..lap.len() - 1 {
        if lap[k].signum() * lap[k + 1].signum() < 0 {
            let strength = (lap[k] - lap[k + 1]).abs();
            // lap[k] belongs to cell k + 1; cut between cells k + 1 and k + 2
            let cut = k + 2;
            if best.is_none_or(|(_, s)| strength > s) {
                best = Some((cut, strength));
            }
        }
    }
    best
}

fn split(mask: &Mask, bx: IndexBox, min_fill: f64, out: &mut Vec<IndexBox>) {
    let Some(bx) = bounding_box_within(mask, &bx) else { return };
    let flagged = mask.cells_in(&bx);
    if flagged as f64 >= min_fill * bx.cells() as f64 || (bx.nx == 1 && bx.ny == 1) {
        out.push(bx);
        return;
    }
    let (sx, sy) = signatures(mask, &bx);
    let cut_x = |k: usize| {
        let k = k as i64;
        (IndexBox::new(bx.ilo, bx.jlo, k, bx.ny), IndexBox::new(bx.ilo + k, bx.jlo, bx.nx - k, bx.ny))
    };
    let cut_y = |k: usize| {
        let k = k as i64;
        (IndexBox::new(bx.ilo, bx.jlo, bx.nx, k), IndexBox::new(bx.ilo, bx.jlo + k, bx.nx, bx.ny - k))
    };
    let halves = if let Some(k) = hole(&sx).filter(|_| bx.nx >= bx.ny) {
        cut_x(k)
    } else if let Some(k) = hole(&sy) {
        cut_y(k)
    } else if let Some(k) = hole(&sx) {
        cut_x(k)
    } else {
        match (inflection(&sx), inflection(&sy)) {
            (Some((kx, a)), Some((ky, b))) => {
                if a >= b {
                    cut_x(kx)
                } else {
                    cut_y(ky)
                }
            }
            (Some((kx, _)), None) => cut_x(kx),
            (None, Some((ky, _))) => cut_y(ky),
            (None, None) => {
                if bx.nx >= bx.ny {
                    cut_x((bx.nx / 2) as usize)
                } else {
                    cut_y((bx.ny / 2) as usize)
                }
            }
        }
    };
    split(mask, halves.0, min_fill, out);
    split(mask, halves.1, min_fill, out);
}

/// Split a box into pieces no longer than `max_size` along either axis.
pub fn chop(bx: &IndexBox, max_size: i64) -> Vec<IndexBox> {
    let pieces = |n: i64| ((n + max_size - 1) / max_size).max(1);
    let (px, py) = (pieces(bx.nx), pieces(bx.ny));
    let mut out = Vec::new();
    for b in 0..py {
        let (j0, j1) = (bx.jlo + bx.ny * b / py, bx.jlo + bx.ny * (b + 1) / py);
        for a in 0..px {
            let (i0, i1) = (bx.ilo + bx.nx * a / px, bx.ilo + bx.nx * (a + 1) / px);
            out.push(IndexBox::new(i0, j0, i1 - i0, j1 - j0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covered(boxes: &[IndexBox], i: i64, j: i64) -> usize {
        boxes.iter().filter(|b| b.contains(i, j)).count()
    }

    #[test]
    fn empty_mask() {
        let m = Mask::new(IndexBox::new(0, 0, 10, 10));
        assert!(cluster_flags(&m, 0.7).is_empty());
    }

    #[test]
    fn single_cell_with_buffer() {
        let dom = IndexBox::new(0, 0, 40, 40);
        let mut m = Mask::new(dom);
        m.set(20, 20, true);
        let d = m.dilate(3, &dom);
        assert_eq!(cluster_flags(&d, 0.7), vec![IndexBox::new(17, 17, 7, 7)]);
        let mut m = Mask::new(dom);
        m.set(1, 0, true);
        let d = m.dilate(3, &dom);
        assert_eq!(cluster_flags(&d, 0.7), vec![IndexBox::new(0, 0, 5, 4)]);
    }

    #[test]
    fn distant_blobs_split() {
        let dom = IndexBox::new(0, 0, 80, 20);
        let mut m = Mask::new(dom);
        for j in 5..10 {
            for i in 5..10 {
                m.set(i, j, true);
                m.set(i + 50, j + 3, true);
            }
        }
        let boxes = cluster_flags(&m, 0.7);
        assert_eq!(boxes.len(), 2);
        assert!(boxes.contains(&IndexBox::new(5, 5, 5, 5)));
        assert!(boxes.contains(&IndexBox::new(55, 8, 5, 5)));
    }

    #[test]
    fn l_shape_is_covered_disjointly_with_good_fill() {
        let dom = IndexBox::new(0, 0, 30, 30);
        let mut m = Mask::new(dom);
        for j in 0..20 {
            for i in 0..4 {
                m.set(i, j, true);
            }
        }
        for j in 0..4 {
            for i in 0..25 {
                m.set(i, j, true);
            }
        }
        let boxes = cluster_flags(&m, 0.7);
        for j in 0..30 {
            for i in 0..30 {
                let c = covered(&boxes, i, j);
                assert!(c <= 1);
                if m.get(i, j) {
                    assert_eq!(c, 1);
                }
            }
        }
        for b in &boxes {
            assert!(m.cells_in(b) as f64 >= 0.7 * b.cells() as f64);
        }
    }

    #[test]
    fn chop_limits_size() {
        let pieces = chop(&IndexBox::new(3, 4, 130, 20), 64);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces.iter().map(|b| b.cells()).sum::<i64>(), 130 * 20);
        assert!(pieces.iter().all(|b| b.nx <= 64 && b.ny <= 64));
    }
}
