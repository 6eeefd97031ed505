//! Trivial loops, gardens and clusters, the outside `𝒪` and the repair map.
//!
//! Regions are unions of cells of a [`CellGrid`]: every loop support, filled
//! garden and cluster is a union of (site, slab) cells, so areas and
//! adjacency are exact.

mod boundary;
mod grid;
mod repair;

use serde::Serialize;

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::geometry::{Edge, Parity};
use crate::linkconfig::{LinkConfig, LinkKind, SimParams};
use crate::loops::{trace_loops, LoopDecomposition};

pub use boundary::{block_outside, boundary_component, BlockOutside, BoundaryComponent};
pub use grid::{CellGrid, NONE};
pub use repair::{
    count_preimages, count_preimages_naive, free_links, reconstruct, repair, repair_map, PreimageCount, RepairChecks,
    RepairOutput, PREIMAGE_GUARD,
};

/// A loop made of exactly two bars on one edge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrivialLoop {
    pub loop_id: usize,
    pub edge: Edge,
    pub parity: Parity,
    pub t_lo: f64,
    /// Upper bar time; on the torus it may be below `t_lo`.
    pub t_hi: f64,
    pub height: f64,
    pub small: bool,
    /// Lower and upper bar, as decomposition link indices.
    pub bars: [usize; 2],
}

impl TrivialLoop {
    /// Whether time `t` lies strictly between the bars.
    pub fn spans(&self, t: f64, beta: f64) -> bool {
        let dt = if t > self.t_lo { t - self.t_lo } else { t - self.t_lo + beta };
        dt > 0.0 && dt < self.height
    }
}

/// Trivial loops of a decomposition. Fixed boundary bars count as bars.
pub fn classify_trivial(decomp: &LoopDecomposition, params: &SimParams) -> Vec<TrivialLoop> {
    let mut out = Vec::new();
    for (loop_id, lp) in decomp.loops.iter().enumerate() {
        if lp.traversals.len() != 2 {
            continue;
        }
        let (a, b) = (lp.traversals[0].link, lp.traversals[1].link);
        let (la, lb) = (&decomp.links[a], &decomp.links[b]);
        if a == b || la.kind != LinkKind::Bar || lb.kind != LinkKind::Bar || la.edge != lb.edge {
            continue;
        }
        let Some(iv) = lp.steps.iter().map(|&(i, _)| &decomp.intervals[i]).find(|iv| iv.site == la.edge.x_left)
        else {
            continue;
        };
        let (Some((lo, _)), Some((hi, _))) = (iv.lower, iv.upper) else { continue };
        let t_lo = decomp.links[lo].t;
        let t_hi = decomp.links[hi].t;
        let height = if t_hi > t_lo { t_hi - t_lo } else { t_hi - t_lo + decomp.domain.beta() };
        out.push(TrivialLoop {
            loop_id,
            edge: la.edge,
            parity: la.edge.parity(),
            t_lo,
            t_hi,
            height,
            small: params.is_small(height),
            bars: [lo, hi],
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub parity: Parity,
    /// Small trivial loops whose supports generate the cluster, as indices
    /// into [`ClusterReport::trivial`].
    pub generators: Vec<usize>,
    pub cells: Vec<usize>,
    pub volume: f64,
}

/// Where a link sits relative to the clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Placement {
    Inside(usize),
    /// Touches cluster `c` and some cell not owned by `c`.
    Boundary(usize),
    Outside,
}

#[derive(Clone, Debug)]
pub struct ClusterReport {
    pub decomp: LoopDecomposition,
    pub params: SimParams,
    pub grid: CellGrid,
    pub trivial: Vec<TrivialLoop>,
    pub trivial_of_loop: Vec<Option<usize>>,
    /// Adjacency components of small trivial loops of equal parity.
    pub components: Vec<Vec<usize>>,
    pub clusters: Vec<Cluster>,
    /// Cluster owning each cell, or [`NONE`] for the outside.
    pub owner: Vec<u32>,
    /// Cluster containing each loop, `None` for loops in the outside.
    pub loop_region: Vec<Option<usize>>,
    /// Placement of every decomposition link, boundary bars included.
    pub placement: Vec<Placement>,
    /// Links of `ω^out`: real links not inside a cluster, and boundary bars
    /// facing the outside.
    pub out_links: Vec<usize>,
    pub covered: Vec<usize>,
    pub exposed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub ell: usize,
    pub num_links: usize,
    pub num_trivial: usize,
    pub num_small: usize,
    pub num_clusters: usize,
    pub vol_outside: f64,
    pub num_out: usize,
    pub num_covered: usize,
    pub num_exposed: usize,
    pub tall_outside: usize,
}

pub fn build_clusters(cfg: &LinkConfig, params: &SimParams) -> Result<ClusterReport> {
    analyze(trace_loops(cfg), params)
}

/// Cells of the support of a trivial loop: both sites over its bar range.
pub(crate) fn support_cells(grid: &CellGrid, tl: &TrivialLoop) -> Result<Vec<usize>> {
    let d = grid.domain();
    let s = d.site_index(tl.edge.x_left).ok_or_else(|| Error::Invariant("loop edge outside domain".into()))?;
    let lo = grid.cut_index(tl.t_lo).ok_or_else(|| Error::Invariant("bar time is not a cut".into()))?;
    let hi = grid.cut_index(tl.t_hi).ok_or_else(|| Error::Invariant("bar time is not a cut".into()))?;
    let slabs = grid.slabs_between(lo, hi);
    Ok(slabs.iter().flat_map(|&k| [grid.cell(s, k), grid.cell(s + 1, k)]).collect())
}

pub fn analyze(decomp: LoopDecomposition, params: &SimParams) -> Result<ClusterReport> {
    let grid = CellGrid::new(&decomp);
    let trivial = classify_trivial(&decomp, params);

    // Supports of small loops; supports never overlap.
    let mut support_owner = vec![NONE; grid.len()];
    let mut supports: Vec<Vec<usize>> = vec![Vec::new(); trivial.len()];
    for (i, tl) in trivial.iter().enumerate() {
        if !tl.small {
            continue;
        }
        let cells = support_cells(&grid, tl)?;
        for &c in &cells {
            if support_owner[c] != NONE {
                return Err(Error::Invariant("small loop supports overlap".into()));
            }
            support_owner[c] = i as u32;
        }
        supports[i] = cells;
    }

    let mut dsu = Dsu::new(trivial.len());
    for c in 0..grid.len() {
        let a = support_owner[c];
        if a == NONE {
            continue;
        }
        for (nb, _) in grid.neighbors(c) {
            let b = support_owner[nb];
            if b != NONE && b != a && trivial[a as usize].parity == trivial[b as usize].parity {
                dsu.union(a as usize, b as usize);
            }
        }
    }
    let labels = dsu.labels();
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); dsu.components()];
    for (i, tl) in trivial.iter().enumerate() {
        if tl.small {
            by_label[labels[i]].push(i);
        }
    }
    let components: Vec<Vec<usize>> = by_label.into_iter().filter(|v| !v.is_empty()).collect();

    let mut scratch = vec![false; grid.len()];
    let mut fills: Vec<(usize, Vec<usize>)> = components
        .iter()
        .enumerate()
        .map(|(ci, comp)| {
            let set: Vec<usize> = comp.iter().flat_map(|&i| supports[i].iter().copied()).collect();
            (ci, grid.fill(&set, &mut scratch))
        })
        .collect();
    fills.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut owner = vec![NONE; grid.len()];
    let mut clusters: Vec<Cluster> = Vec::new();
    for (ci, cells) in fills {
        let first = cells[0];
        if owner[first] != NONE {
            let o = owner[first];
            if cells.iter().any(|&c| owner[c] != o) {
                return Err(Error::Invariant("nested garden leaves its cluster".into()));
            }
            continue;
        }
        if cells.iter().any(|&c| owner[c] != NONE) {
            return Err(Error::Invariant("gardens overlap partially".into()));
        }
        let id = clusters.len() as u32;
        for &c in &cells {
            owner[c] = id;
        }
        let volume = cells.iter().map(|&c| grid.slab_len(grid.site_slab(c).1)).sum();
        clusters.push(Cluster { parity: trivial[components[ci][0]].parity, generators: components[ci].clone(), cells, volume });
    }

    let report = finish(decomp, params, grid, trivial, components, clusters, owner)?;
    for tl in report.trivial.iter().filter(|t| t.small) {
        if report.loop_region[tl.loop_id].is_none() {
            return Err(Error::Invariant("small trivial loop outside every cluster".into()));
        }
    }
    if report.covered.len() > 2 * report.tall_outside() {
        return Err(Error::Invariant("more covered links than bars of tall outside loops".into()));
    }
    Ok(report)
}

/// Complete a report from a cell ownership map.
pub(crate) fn finish(
    decomp: LoopDecomposition,
    params: &SimParams,
    grid: CellGrid,
    trivial: Vec<TrivialLoop>,
    components: Vec<Vec<usize>>,
    clusters: Vec<Cluster>,
    owner: Vec<u32>,
) -> Result<ClusterReport> {
    let mut trivial_of_loop = vec![None; decomp.loops.len()];
    for (i, tl) in trivial.iter().enumerate() {
        trivial_of_loop[tl.loop_id] = Some(i);
    }
    let loop_region: Vec<Option<usize>> = decomp
        .loops
        .iter()
        .map(|lp| {
            let iv = &decomp.intervals[lp.steps[0].0];
            let s = grid.domain().site_index(iv.site).expect("interval site inside domain");
            let o = owner[grid.cell(s, grid.slab_at(iv.midpoint(grid.domain())))];
            (o != NONE).then_some(o as usize)
        })
        .collect();
    let placement = place_links(&decomp, &grid, &owner)?;
    let out_links: Vec<usize> =
        (0..decomp.links.len()).filter(|&i| !matches!(placement[i], Placement::Inside(_))).collect();

    let mut report = ClusterReport {
        decomp,
        params: *params,
        grid,
        trivial,
        trivial_of_loop,
        components,
        clusters,
        owner,
        loop_region,
        placement,
        out_links,
        covered: Vec::new(),
        exposed: Vec::new(),
    };
    let (covered, exposed) = report.split_out_links()?;
    report.covered = covered;
    report.exposed = exposed;
    Ok(report)
}

pub(crate) fn corner_cells(decomp: &LoopDecomposition, grid: &CellGrid, link: usize) -> Result<[Option<usize>; 4]> {
    let l = &decomp.links[link];
    let s = grid.domain().site_index(l.edge.x_left).ok_or_else(|| Error::Invariant("link edge outside domain".into()))?;
    let cut = grid.cut_index(l.t).ok_or_else(|| Error::Invariant("link time is not a cut".into()))?;
    Ok(grid.corner_cells(s, cut))
}

pub(crate) fn place_links(decomp: &LoopDecomposition, grid: &CellGrid, owner: &[u32]) -> Result<Vec<Placement>> {
    (0..decomp.links.len())
        .map(|i| {
            let corners = corner_cells(decomp, grid, i)?;
            let present: Vec<u32> = corners.iter().flatten().map(|&c| owner[c]).collect();
            let first = present.iter().copied().find(|&o| o != NONE);
            Ok(match first {
                None => Placement::Outside,
                Some(c) if present.iter().all(|&o| o == c) => Placement::Inside(c as usize),
                Some(c) => Placement::Boundary(c as usize),
            })
        })
        .collect()
}

impl ClusterReport {
    pub fn num_cells(&self) -> usize {
        self.grid.len()
    }

    /// `vol(𝒪)`.
    pub fn vol_outside(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&c| self.owner[c] == NONE)
            .map(|c| self.grid.slab_len(self.grid.site_slab(c).1))
            .sum()
    }

    /// Total support area of trivial loops of `parity` lying in the outside.
    pub fn trivial_outside_volume(&self, parity: Parity) -> f64 {
        self.trivial
            .iter()
            .filter(|t| t.parity == parity && self.loop_region[t.loop_id].is_none())
            .map(|t| 2.0 * t.height)
            .sum()
    }

    pub fn is_tall(&self, loop_id: usize) -> bool {
        self.trivial_of_loop[loop_id].is_some_and(|i| !self.trivial[i].small)
    }

    /// Tall trivial loops in the outside.
    pub fn tall_outside(&self) -> usize {
        self.trivial.iter().filter(|t| !t.small && self.loop_region[t.loop_id].is_none()).count()
    }

    /// Real links in `ω^out`.
    pub fn out_real(&self) -> impl Iterator<Item = usize> + '_ {
        self.out_links.iter().copied().filter(|&i| i < self.decomp.num_real)
    }

    /// Loops that lie in the outside.
    pub fn outside_loops(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.decomp.loops.len()).filter(|&l| self.loop_region[l].is_none())
    }

    fn split_out_links(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut covered = Vec::new();
        let mut exposed = Vec::new();
        for &i in &self.out_links {
            if self.decomp.links[i].kind != LinkKind::Bar {
                exposed.push(i);
                continue;
            }
            let corners = corner_cells(&self.decomp, &self.grid, i)?;
            let (up, down) = self.decomp.strands(i);
            let halves = [([corners[0], corners[2]], up), ([corners[1], corners[3]], down)];
            let facing_out = |cells: &[Option<usize>; 2]| cells.iter().all(|c| c.is_some_and(|c| self.owner[c] == NONE));
            let tall_out = |h: &([Option<usize>; 2], Option<usize>)| facing_out(&h.0) && h.1.is_some_and(|l| self.is_tall(l));
            let [u, d] = &halves;
            let is_covered =
                (tall_out(u) && (tall_out(d) || !facing_out(&d.0))) || (tall_out(d) && !facing_out(&u.0));
            if is_covered {
                covered.push(i);
            } else {
                exposed.push(i);
            }
        }
        Ok((covered, exposed))
    }

    pub fn summary(&self) -> ClusterSummary {
        ClusterSummary {
            ell: self.decomp.ell(),
            num_links: self.decomp.num_real,
            num_trivial: self.trivial.len(),
            num_small: self.trivial.iter().filter(|t| t.small).count(),
            num_clusters: self.clusters.len(),
            vol_outside: self.vol_outside(),
            num_out: self.out_links.len(),
            num_covered: self.covered.len(),
            num_exposed: self.exposed.len(),
            tall_outside: self.tall_outside(),
        }
    }
}

#[cfg(test)]
mod tests;
