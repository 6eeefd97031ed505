//! The repair map `R(ω) = (ω̄, η̄)` on primal rectangles, its inverse on
//! known bits, and preimage counting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, Edge, Parity};
use crate::linkconfig::{Link, LinkConfig, LinkKind, SimParams};
use crate::loops::trace_loops;

use super::{block_outside, build_clusters, finish, CellGrid, Cluster, ClusterReport, Placement, NONE};

/// Observed quantities behind the repair postconditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepairChecks {
    pub delta_ell: i64,
    pub exposed: usize,
    pub exposed_bar: usize,
    /// `ℓ(ω̄) - ℓ(ω) ≥ |ω^ex|/4 ≥ |ω̄^ex|/4`.
    pub loop_gain: bool,
    pub vol_outside: f64,
    pub vol_outside_bar: f64,
    pub vol_trivial_primal_bar: f64,
    /// `vol(𝒪¹(ω̄)) ≥ vol(𝒪(ω̄))/2 ≥ vol(𝒪(ω))/2`.
    pub volume: bool,
    /// Every loop of `ω̄` in the outside is a trivial primal loop.
    pub outside_trivial_primal: bool,
    /// Decoding `(ω̄, η̄)` with the true bits gives back `ω`.
    pub reconstructs: bool,
    /// `η̄` is exactly the set of links on the boundary of the image clusters.
    pub eta_matches_boundary: bool,
    pub out_bar_real: usize,
    pub n_h: usize,
    /// `|ω̄^out| ≤ N_h`, counting real links.
    pub out_within_blocks: bool,
}

impl RepairChecks {
    pub fn all_hold(&self) -> bool {
        self.loop_gain
            && self.volume
            && self.outside_trivial_primal
            && self.reconstructs
            && self.eta_matches_boundary
            && self.out_within_blocks
    }
}

#[derive(Clone, Debug)]
pub struct RepairOutput {
    pub omega_bar: LinkConfig,
    /// Indices into `omega_bar` of the images of links on cluster boundaries.
    pub eta_bar: Vec<usize>,
    /// Per `omega_bar` link: moved one edge left, and changed kind.
    pub shifted: Vec<bool>,
    pub flipped: Vec<bool>,
    /// `ω̄` analysed against the image clusters `𝔠(ω̄, η̄)`.
    pub image: ClusterReport,
    /// Per image cluster: whether it is the image of a dual cluster.
    pub region_dual: Vec<bool>,
    pub checks: RepairChecks,
}

struct Mapped {
    omega_bar: LinkConfig,
    eta_bar: Vec<usize>,
    shifted: Vec<bool>,
    flipped: Vec<bool>,
}

fn map_links(cfg: &LinkConfig, report: &ClusterReport) -> Result<Mapped> {
    let d = *cfg.domain();
    if d.kind() != DomainKind::PrimalRect {
        return Err(Error::Unsupported("repair is defined on primal rectangles".into()));
    }
    let mut mapped: Vec<(Link, bool, bool, bool)> = Vec::with_capacity(cfg.len());
    for (i, link) in cfg.links().enumerate() {
        let corners = super::corner_cells(&report.decomp, &report.grid, i)?;
        let mut primal = false;
        let mut dual = false;
        for c in corners.into_iter().flatten() {
            let o = report.owner[c];
            if o != NONE {
                match report.clusters[o as usize].parity {
                    Parity::Primal => primal = true,
                    Parity::Dual => dual = true,
                }
            }
        }
        if primal && dual {
            return Err(Error::Invariant("link touches a primal and a dual cluster".into()));
        }
        let boundary = matches!(report.placement[i], Placement::Boundary(_));
        let outside = report.placement[i] == Placement::Outside;
        let shift = dual || (outside && link.edge.parity() == Parity::Dual);
        let flip = outside && link.kind == LinkKind::Cross;
        let edge = if shift { Edge::new(link.edge.x_left - 1) } else { link.edge };
        if d.edge_index(edge).is_none() {
            return Err(Error::Invariant("shifted link leaves the domain".into()));
        }
        let kind = if flip { LinkKind::Bar } else { link.kind };
        mapped.push((Link { edge, t: link.t, kind }, shift, flip, boundary));
    }
    mapped.sort_by(|a, b| a.0.edge.x_left.cmp(&b.0.edge.x_left).then(a.0.t.total_cmp(&b.0.t)));
    let omega_bar = LinkConfig::from_links(d, mapped.iter().map(|m| m.0))?;
    if omega_bar.len() != mapped.len() || omega_bar.links().zip(&mapped).any(|(a, b)| a != b.0) {
        return Err(Error::Invariant("repaired links out of canonical order".into()));
    }
    Ok(Mapped {
        omega_bar,
        eta_bar: (0..mapped.len()).filter(|&i| mapped[i].3).collect(),
        shifted: mapped.iter().map(|m| m.1).collect(),
        flipped: mapped.iter().map(|m| m.2).collect(),
    })
}

/// `R(ω)` without the postcondition analysis.
pub fn repair_map(cfg: &LinkConfig, params: &SimParams) -> Result<(LinkConfig, Vec<usize>)> {
    let report = build_clusters(cfg, params)?;
    let m = map_links(cfg, &report)?;
    Ok((m.omega_bar, m.eta_bar))
}

/// Image clusters: primal clusters stay, dual clusters move one site left.
fn image_owner(report: &ClusterReport) -> Result<(Vec<u32>, Vec<Cluster>)> {
    let grid = &report.grid;
    let mut owner = vec![NONE; grid.len()];
    let mut clusters = Vec::with_capacity(report.clusters.len());
    for (id, cl) in report.clusters.iter().enumerate() {
        let mut cells = Vec::with_capacity(cl.cells.len());
        for &c in &cl.cells {
            let (s, k) = grid.site_slab(c);
            let s2 = match cl.parity {
                Parity::Primal => s,
                Parity::Dual => s.checked_sub(1).ok_or_else(|| Error::Invariant("dual cluster at left edge".into()))?,
            };
            let c2 = grid.cell(s2, k);
            if owner[c2] != NONE {
                return Err(Error::Invariant("image clusters overlap".into()));
            }
            owner[c2] = id as u32;
            cells.push(c2);
        }
        clusters.push(Cluster { parity: Parity::Primal, generators: Vec::new(), cells, volume: cl.volume });
    }
    Ok((owner, clusters))
}

/// Apply `R` to a primal-rectangle configuration and check its
/// postconditions.
pub fn repair(cfg: &LinkConfig, params: &SimParams) -> Result<RepairOutput> {
    let report = build_clusters(cfg, params)?;
    let m = map_links(cfg, &report)?;
    let (owner, clusters) = image_owner(&report)?;
    let decomp_bar = trace_loops(&m.omega_bar);
    let grid_bar = CellGrid::new(&decomp_bar);
    if grid_bar != report.grid {
        return Err(Error::Invariant("repair changed the cut times".into()));
    }
    let trivial_bar = super::classify_trivial(&decomp_bar, params);
    let image = finish(decomp_bar, params, grid_bar, trivial_bar, Vec::new(), clusters, owner)?;
    let region_dual: Vec<bool> = report.clusters.iter().map(|c| c.parity == Parity::Dual).collect();

    let delta_ell = image.decomp.ell() as i64 - report.decomp.ell() as i64;
    let exposed = report.exposed.len();
    let exposed_bar = image.exposed.len();
    let vol_outside = report.vol_outside();
    let vol_outside_bar = image.vol_outside();
    let vol_trivial_primal_bar = image.trivial_outside_volume(Parity::Primal);
    let tol = 1e-9 * cfg.domain().beta() * cfg.domain().num_sites() as f64;
    let outside_trivial_primal = image
        .outside_loops()
        .all(|l| image.trivial_of_loop[l].is_some_and(|i| image.trivial[i].parity == Parity::Primal));

    let num_real = image.decomp.num_real;
    let boundary_bar: Vec<usize> =
        (0..num_real).filter(|&i| matches!(image.placement[i], Placement::Boundary(_))).collect();
    let out_bar_real = image.out_real().count();
    let n_h = block_outside(&report)?.num_links;

    let mut out = RepairOutput {
        omega_bar: m.omega_bar,
        eta_bar: m.eta_bar,
        shifted: m.shifted,
        flipped: m.flipped,
        image,
        region_dual,
        checks: RepairChecks {
            delta_ell,
            exposed,
            exposed_bar,
            loop_gain: 4 * delta_ell >= exposed as i64 && exposed >= exposed_bar,
            vol_outside,
            vol_outside_bar,
            vol_trivial_primal_bar,
            volume: 2.0 * vol_trivial_primal_bar >= vol_outside_bar - tol && vol_outside_bar >= vol_outside - tol,
            outside_trivial_primal,
            reconstructs: false,
            eta_matches_boundary: false,
            out_bar_real,
            n_h,
            out_within_blocks: out_bar_real <= n_h,
        },
    };
    out.checks.eta_matches_boundary = out.eta_bar == boundary_bar;
    let bits = true_bits(&out);
    out.checks.reconstructs = reconstruct(&out, &out.region_dual, &bits).is_ok_and(|c| &c == cfg);
    Ok(out)
}

/// Per `ω̄` link: the image cluster fixing its shift, or `None` for a link
/// outside every image cluster.
fn link_regions(out: &RepairOutput) -> Vec<Option<usize>> {
    (0..out.omega_bar.len())
        .map(|i| match out.image.placement[i] {
            Placement::Inside(c) | Placement::Boundary(c) => Some(c),
            Placement::Outside => None,
        })
        .collect()
}

/// Links of `ω̄` outside every image cluster, in index order.
pub fn free_links(out: &RepairOutput) -> Vec<usize> {
    (0..out.omega_bar.len()).filter(|&i| out.image.placement[i] == Placement::Outside).collect()
}

fn true_bits(out: &RepairOutput) -> Vec<(bool, bool)> {
    free_links(out).into_iter().map(|i| (out.shifted[i], out.flipped[i])).collect()
}

/// Decode a candidate preimage: links in image cluster `c` move one edge
/// right when `region_shift[c]`; the `k`-th free link moves right and
/// changes kind according to `free_bits[k]`.
pub fn reconstruct(out: &RepairOutput, region_shift: &[bool], free_bits: &[(bool, bool)]) -> Result<LinkConfig> {
    let regions = link_regions(out);
    let d = *out.omega_bar.domain();
    let mut next_free = 0;
    let mut links = Vec::with_capacity(out.omega_bar.len());
    for (i, link) in out.omega_bar.links().enumerate() {
        let (shift, flip) = match regions[i] {
            Some(c) => (region_shift[c], false),
            None => {
                let b = *free_bits
                    .get(next_free)
                    .ok_or_else(|| Error::InvalidParameter("too few free-link bits".into()))?;
                next_free += 1;
                b
            }
        };
        let edge = if shift { Edge::new(link.edge.x_left + 1) } else { link.edge };
        if d.edge_index(edge).is_none() {
            return Err(Error::OutOfDomain { x_left: edge.x_left, t: link.t });
        }
        let kind = if flip { link.kind.flipped() } else { link.kind };
        links.push(Link { edge, t: link.t, kind });
    }
    LinkConfig::from_links(d, links)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreimageCount {
    /// `|ω̄^out|` over real links.
    pub out_size: usize,
    /// `4^{|ω̄^out|}`.
    pub bound: f64,
    /// Candidates passed through `R`.
    pub evaluated: u64,
    pub preimages: u64,
    pub contains_target: bool,
}

/// Largest `|ω̄^out|` the enumerators accept.
pub const PREIMAGE_GUARD: usize = 12;

fn is_preimage(cand: &LinkConfig, out: &RepairOutput, params: &SimParams) -> bool {
    match repair_map(cand, params) {
        Ok((bar, eta)) => bar == out.omega_bar && eta == out.eta_bar,
        Err(_) => false,
    }
}

fn guard(out: &RepairOutput) -> Result<usize> {
    let k = out.image.out_real().count();
    if k > PREIMAGE_GUARD {
        return Err(Error::Budget(format!("|ω̄^out| = {k} exceeds {PREIMAGE_GUARD}")));
    }
    Ok(k)
}

/// Count configurations `ω'` with `R(ω') = (ω̄, η̄)`. Links on image
/// cluster boundaries share their cluster's shift bit and keep their kind;
/// all other choices are enumerated.
pub fn count_preimages(out: &RepairOutput, params: &SimParams, target: Option<&LinkConfig>) -> Result<PreimageCount> {
    let k = guard(out)?;
    let regions = link_regions(out);
    let eta_regions: Vec<usize> = {
        let mut v: Vec<usize> = out.eta_bar.iter().filter_map(|&i| regions[i]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let free = free_links(out).len();
    let total_bits = eta_regions.len() + 2 * free;
    let mut result =
        PreimageCount { out_size: k, bound: 4f64.powi(k as i32), evaluated: 0, preimages: 0, contains_target: false };
    for mask in 0u64..(1u64 << total_bits) {
        let mut region_shift = vec![false; out.image.clusters.len()];
        for (b, &c) in eta_regions.iter().enumerate() {
            region_shift[c] = mask >> b & 1 == 1;
        }
        let bits: Vec<(bool, bool)> = (0..free)
            .map(|j| {
                let o = eta_regions.len() + 2 * j;
                (mask >> o & 1 == 1, mask >> (o + 1) & 1 == 1)
            })
            .collect();
        let Ok(cand) = reconstruct(out, &region_shift, &bits) else { continue };
        result.evaluated += 1;
        if is_preimage(&cand, out, params) {
            result.preimages += 1;
            if target.is_some_and(|t| *t == cand) {
                result.contains_target = true;
            }
        }
    }
    Ok(result)
}

/// Reference count: every `(shift, flip)` choice on every link of `ω̄^out`,
/// interior links following the shift of their cluster's boundary links.
pub fn count_preimages_naive(out: &RepairOutput, params: &SimParams) -> Result<PreimageCount> {
    let k = guard(out)?;
    let d = *out.omega_bar.domain();
    let regions = link_regions(out);
    let out_idx: Vec<usize> = out.image.out_real().collect();
    let all: Vec<Link> = out.omega_bar.links().collect();
    let mut result =
        PreimageCount { out_size: k, bound: 4f64.powi(k as i32), evaluated: 0, preimages: 0, contains_target: false };
    'masks: for mask in 0u64..(1u64 << (2 * k)) {
        let mut choice = vec![None; all.len()];
        let mut region_shift: Vec<Option<bool>> = vec![None; out.image.clusters.len()];
        for (j, &i) in out_idx.iter().enumerate() {
            let (s, f) = (mask >> (2 * j) & 1 == 1, mask >> (2 * j + 1) & 1 == 1);
            choice[i] = Some((s, f));
            if out.eta_bar.contains(&i) {
                let c = regions[i].expect("boundary link has a region");
                match region_shift[c] {
                    Some(prev) if prev != s => continue 'masks,
                    _ => region_shift[c] = Some(s),
                }
            }
        }
        let mut links = Vec::with_capacity(all.len());
        for (i, link) in all.iter().enumerate() {
            let (shift, flip) = match choice[i] {
                Some(b) => b,
                None => (regions[i].and_then(|c| region_shift[c]).unwrap_or(false), false),
            };
            let edge = if shift { Edge::new(link.edge.x_left + 1) } else { link.edge };
            if d.edge_index(edge).is_none() {
                continue 'masks;
            }
            links.push(Link { edge, t: link.t, kind: if flip { link.kind.flipped() } else { link.kind } });
        }
        let Ok(cand) = LinkConfig::from_links(d, links) else { continue };
        result.evaluated += 1;
        if is_preimage(&cand, out, params) {
            result.preimages += 1;
        }
    }
    Ok(result)
}
