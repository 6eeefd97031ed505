//! Cell decomposition of a domain: site columns cut at every link time.

use std::collections::VecDeque;

use crate::geometry::Domain;
use crate::loops::LoopDecomposition;

/// Marker for an unowned cell.
pub const NONE: u32 = u32::MAX;

/// Cell `(site, k)` is the site column over slab `k`, the time interval
/// between consecutive cut times. On the torus the last slab wraps.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    domain: Domain,
    cuts: Vec<f64>,
    slabs: usize,
}

impl CellGrid {
    pub fn new(decomp: &LoopDecomposition) -> CellGrid {
        CellGrid::from_times(decomp.domain, decomp.links.iter().map(|l| l.t))
    }

    pub fn from_times(domain: Domain, times: impl IntoIterator<Item = f64>) -> CellGrid {
        let mut cuts: Vec<f64> = times.into_iter().map(|t| domain.wrap_time(t)).collect();
        if !domain.is_periodic() {
            cuts.push(domain.t_min());
            cuts.push(domain.t_max());
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        if cuts.is_empty() {
            cuts.push(0.0);
        }
        let slabs = if domain.is_periodic() { cuts.len() } else { cuts.len() - 1 };
        CellGrid { domain, cuts, slabs }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn num_sites(&self) -> usize {
        self.domain.num_sites()
    }

    pub fn num_slabs(&self) -> usize {
        self.slabs
    }

    pub fn len(&self) -> usize {
        self.num_sites() * self.slabs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, site_idx: usize, slab: usize) -> usize {
        site_idx * self.slabs + slab
    }

    pub fn site_slab(&self, cell: usize) -> (usize, usize) {
        (cell / self.slabs, cell % self.slabs)
    }

    /// Bounds of slab `k`; on the torus the upper bound of the last slab
    /// exceeds β.
    pub fn slab_bounds(&self, k: usize) -> (f64, f64) {
        let lo = self.cuts[k];
        let hi = if k + 1 < self.cuts.len() { self.cuts[k + 1] } else { self.cuts[0] + self.domain.beta() };
        (lo, hi)
    }

    pub fn slab_len(&self, k: usize) -> f64 {
        let (a, b) = self.slab_bounds(k);
        b - a
    }

    /// Index of a cut time, matched exactly.
    pub fn cut_index(&self, t: f64) -> Option<usize> {
        let t = self.domain.wrap_time(t);
        let i = self.cuts.partition_point(|&c| c < t);
        (i < self.cuts.len() && self.cuts[i] == t).then_some(i)
    }

    /// Slab containing time `t`.
    pub fn slab_at(&self, t: f64) -> usize {
        let t = self.domain.wrap_time(t);
        let i = self.cuts.partition_point(|&c| c <= t);
        if self.domain.is_periodic() {
            if i == 0 {
                self.slabs - 1
            } else {
                i - 1
            }
        } else {
            i.clamp(1, self.slabs) - 1
        }
    }

    pub fn above_cut(&self, cut: usize) -> Option<usize> {
        (cut < self.slabs).then_some(cut)
    }

    pub fn below_cut(&self, cut: usize) -> Option<usize> {
        if cut > 0 {
            Some(cut - 1)
        } else if self.domain.is_periodic() {
            Some(self.slabs - 1)
        } else {
            None
        }
    }

    pub fn up(&self, k: usize) -> Option<usize> {
        if k + 1 < self.slabs {
            Some(k + 1)
        } else if self.domain.is_periodic() {
            Some(0)
        } else {
            None
        }
    }

    pub fn down(&self, k: usize) -> Option<usize> {
        self.below_cut(k)
    }

    /// Slabs met going up from cut `lo` to cut `hi`.
    pub fn slabs_between(&self, lo: usize, hi: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut k = lo;
        loop {
            out.push(k);
            k = if k + 1 == self.cuts.len() && self.domain.is_periodic() { 0 } else { k + 1 };
            if k == hi || out.len() > self.slabs {
                break;
            }
        }
        out
    }

    /// The up to four cells touching the point `(x+1/2, cut)`, in the order
    /// left-above, left-below, right-above, right-below.
    pub fn corner_cells(&self, x_left_idx: usize, cut: usize) -> [Option<usize>; 4] {
        let above = self.above_cut(cut);
        let below = self.below_cut(cut);
        let c = |s: usize, k: Option<usize>| k.map(|k| self.cell(s, k));
        [c(x_left_idx, above), c(x_left_idx, below), c(x_left_idx + 1, above), c(x_left_idx + 1, below)]
    }

    /// Neighbouring cells, with the winding change when the time seam is
    /// crossed.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = (usize, i32)> + '_ {
        let (s, k) = self.site_slab(cell);
        let left = (s > 0).then(|| (self.cell(s - 1, k), 0));
        let right = (s + 1 < self.num_sites()).then(|| (self.cell(s + 1, k), 0));
        let up = self.up(k).map(|k2| (self.cell(s, k2), if k2 <= k { 1 } else { 0 }));
        let down = self.down(k).map(|k2| (self.cell(s, k2), if k2 >= k { -1 } else { 0 }));
        [left, right, up, down].into_iter().flatten()
    }

    /// Whether the cell lies in the outermost site columns or, on a
    /// rectangle, in the top or bottom slab.
    pub fn touches_boundary(&self, cell: usize) -> bool {
        let (s, k) = self.site_slab(cell);
        s == 0 || s + 1 == self.num_sites() || (!self.domain.is_periodic() && (k == 0 || k + 1 == self.slabs))
    }

    /// Whether a connected set of cells winds around the time circle.
    pub fn winds(&self, cells: &[usize], member: &[bool]) -> bool {
        if !self.domain.is_periodic() || cells.is_empty() {
            return false;
        }
        let mut lift: std::collections::HashMap<usize, i32> = std::collections::HashMap::new();
        let mut queue = VecDeque::new();
        lift.insert(cells[0], 0);
        queue.push_back(cells[0]);
        while let Some(c) = queue.pop_front() {
            let l = lift[&c];
            for (nb, dw) in self.neighbors(c) {
                if !member[nb] {
                    continue;
                }
                match lift.get(&nb) {
                    Some(&l2) if l2 != l + dw => return true,
                    Some(_) => {}
                    None => {
                        lift.insert(nb, l + dw);
                        queue.push_back(nb);
                    }
                }
            }
        }
        false
    }

    /// `set` together with every complementary region it encloses: regions
    /// that reach neither the outer site columns, the top or bottom of a
    /// rectangle, nor wind around the time circle. `scratch` must be all
    /// false on entry and is restored.
    pub fn fill(&self, set: &[usize], scratch: &mut [bool]) -> Vec<usize> {
        if set.is_empty() {
            return Vec::new();
        }
        for &c in set {
            scratch[c] = true;
        }
        let m = self.slabs;
        let (mut s_lo, mut s_hi) = (usize::MAX, 0);
        let mut proj = vec![false; m];
        for &c in set {
            let (s, k) = self.site_slab(c);
            s_lo = s_lo.min(s);
            s_hi = s_hi.max(s);
            proj[k] = true;
        }
        let periodic = self.domain.is_periodic();
        // Local rows map to slabs; margin rows and columns are outside.
        let rows: Vec<Option<usize>> = if periodic && proj.iter().all(|&p| p) {
            (0..m).map(Some).collect()
        } else if periodic {
            let g = (0..m).find(|&k| !proj[k]).expect("projection has a gap");
            let rho = |k: usize| (k + m - g - 1) % m;
            let lo = (0..m).filter(|&k| proj[k]).map(rho).min().unwrap();
            let hi = (0..m).filter(|&k| proj[k]).map(rho).max().unwrap();
            let mut r = vec![None];
            r.extend((lo..=hi).map(|p| Some((p + g + 1) % m)));
            r.push(None);
            r
        } else {
            let lo = (0..m).find(|&k| proj[k]).unwrap();
            let hi = (0..m).rev().find(|&k| proj[k]).unwrap();
            let mut r = vec![None];
            r.extend((lo..=hi).map(Some));
            r.push(None);
            r
        };
        let wrap = periodic && rows.iter().all(Option::is_some);
        let h = rows.len();
        let w = s_hi - s_lo + 3;
        let global = |i: usize, r: usize| -> Option<usize> {
            if i == 0 || i == w - 1 {
                return None;
            }
            rows[r].map(|k| self.cell(s_lo + i - 1, k))
        };
        let in_set = |i: usize, r: usize, scratch: &[bool]| global(i, r).is_some_and(|c| scratch[c]);
        let mut state = vec![0u8; w * h]; // 0 unseen, 1 outside, 2 hole
        let mut lift = vec![0i32; w * h];
        let mut out: Vec<usize> = set.to_vec();
        let nbrs = |i: usize, r: usize| -> Vec<(usize, usize, i32)> {
            let mut v = Vec::with_capacity(4);
            if i > 0 {
                v.push((i - 1, r, 0));
            }
            if i + 1 < w {
                v.push((i + 1, r, 0));
            }
            if r + 1 < h {
                v.push((i, r + 1, 0));
            } else if wrap {
                v.push((i, 0, 1));
            }
            if r > 0 {
                v.push((i, r - 1, 0));
            } else if wrap {
                v.push((i, h - 1, -1));
            }
            v
        };
        for start in 0..w * h {
            let (i0, r0) = (start % w, start / w);
            if state[start] != 0 || in_set(i0, r0, scratch) {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            state[start] = 3;
            lift[start] = 0;
            let mut outside = false;
            while let Some(p) = queue.pop_front() {
                let (i, r) = (p % w, p / w);
                if global(i, r).is_none() {
                    outside = true;
                }
                for (ni, nr, dw) in nbrs(i, r) {
                    if in_set(ni, nr, scratch) {
                        continue;
                    }
                    let q = nr * w + ni;
                    if state[q] == 0 {
                        state[q] = 3;
                        lift[q] = lift[p] + dw;
                        comp.push(q);
                        queue.push_back(q);
                    } else if lift[q] != lift[p] + dw {
                        outside = true;
                    }
                }
            }
            let tag = if outside { 1 } else { 2 };
            for &p in &comp {
                state[p] = tag;
                if tag == 2 {
                    out.push(global(p % w, p / w).expect("hole cells are interior"));
                }
            }
        }
        for &c in set {
            scratch[c] = false;
        }
        out
    }
}
