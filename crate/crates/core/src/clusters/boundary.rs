//! The region `𝒞(x₀)` cut out by boundary-connected small loops, and the
//! block-outside `b𝒪`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{enumerate_blocks, BlockGrid, Span};

use super::{support_cells, ClusterReport, NONE};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryComponent {
    /// Empty when `x₀` lies on a boundary-connected loop support.
    pub cells: Vec<usize>,
    pub area: f64,
    pub perimeter: f64,
    pub vertical_length: f64,
    pub horizontal_length: f64,
    /// Number of horizontal boundary pieces divided by two.
    pub crossings: usize,
    /// Unit boundary pieces of the region, unordered.
    pub spans: Vec<Span>,
}

/// Component of `x₀ = (site, time)` in the complement of the supports of
/// favoured-parity small loops whose adjacency component reaches the
/// boundary (on the torus: the outer sites, or winds around time).
pub fn boundary_component(report: &ClusterReport, x0: (i64, f64)) -> Result<BoundaryComponent> {
    let grid = &report.grid;
    let d = *grid.domain();
    let s0 = d
        .site_index(x0.0)
        .ok_or_else(|| Error::BadPoint { site: x0.0, t: x0.1, reason: "site outside domain".into() })?;
    if !d.contains_time(x0.1) {
        return Err(Error::BadPoint { site: x0.0, t: x0.1, reason: "time outside domain".into() });
    }
    let favoured = d.favoured_parity();
    let mut blocked = vec![false; grid.len()];
    let mut member = vec![false; grid.len()];
    for comp in &report.components {
        if report.trivial[comp[0]].parity != favoured {
            continue;
        }
        let mut cells = Vec::new();
        for &i in comp {
            cells.extend(support_cells(grid, &report.trivial[i])?);
        }
        for &c in &cells {
            member[c] = true;
        }
        let reaches = cells.iter().any(|&c| grid.touches_boundary(c)) || grid.winds(&cells, &member);
        for &c in &cells {
            member[c] = false;
            if reaches {
                blocked[c] = true;
            }
        }
    }

    let start = grid.cell(s0, grid.slab_at(x0.1));
    if blocked[start] {
        return Ok(BoundaryComponent {
            cells: Vec::new(),
            area: 0.0,
            perimeter: 0.0,
            vertical_length: 0.0,
            horizontal_length: 0.0,
            crossings: 0,
            spans: Vec::new(),
        });
    }
    let mut inside = vec![false; grid.len()];
    inside[start] = true;
    let mut cells = vec![start];
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for (nb, _) in grid.neighbors(c) {
            if !blocked[nb] && !inside[nb] {
                inside[nb] = true;
                cells.push(nb);
                queue.push_back(nb);
            }
        }
    }

    let mut spans = Vec::new();
    let (mut area, mut vertical, mut horizontal) = (0.0, 0.0, 0usize);
    for &c in &cells {
        let (s, k) = grid.site_slab(c);
        let (lo, hi) = grid.slab_bounds(k);
        let x = (d.site_min() + s as i64) as f64;
        area += hi - lo;
        let open = |nb: Option<usize>| nb.is_none_or(|nb| !inside[nb]);
        let left = (s > 0).then(|| grid.cell(s - 1, k));
        let right = (s + 1 < grid.num_sites()).then(|| grid.cell(s + 1, k));
        let up = grid.up(k).map(|k2| grid.cell(s, k2));
        let down = grid.down(k).map(|k2| grid.cell(s, k2));
        if open(left) {
            vertical += hi - lo;
            spans.push(Span::Vertical { x: x - 0.5, t_from: lo, t_to: hi });
        }
        if open(right) {
            vertical += hi - lo;
            spans.push(Span::Vertical { x: x + 0.5, t_from: lo, t_to: hi });
        }
        if open(up) {
            horizontal += 1;
            spans.push(Span::Horizontal { t: hi, x_from: x - 0.5, x_to: x + 0.5 });
        }
        if open(down) {
            horizontal += 1;
            spans.push(Span::Horizontal { t: lo, x_from: x - 0.5, x_to: x + 0.5 });
        }
    }
    if horizontal % 2 != 0 {
        return Err(Error::Invariant("odd number of horizontal boundary pieces".into()));
    }
    Ok(BoundaryComponent {
        cells,
        area,
        perimeter: vertical + horizontal as f64,
        vertical_length: vertical,
        horizontal_length: horizontal as f64,
        crossings: horizontal / 2,
        spans,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockOutside {
    /// Indices into [`enumerate_blocks`] order.
    pub blocks: Vec<usize>,
    /// `N_h`: real links whose block lies in `b𝒪`.
    pub num_links: usize,
    pub block_components: usize,
    pub outside_components: usize,
}

fn components(n: usize, member: &[bool], mut nbrs: impl FnMut(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if !member[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(c) = stack.pop() {
            for nb in nbrs(c) {
                if member[nb] && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    count
}

/// Blocks meeting the outside in positive length, with `h` and `n` taken
/// from the report's parameters.
pub fn block_outside(report: &ClusterReport) -> Result<BlockOutside> {
    let grid = &report.grid;
    let d = *grid.domain();
    let bg = BlockGrid::new(&d, report.params.h, report.params.n)?;
    let blocks = enumerate_blocks(&d, report.params.h, report.params.n)?;
    let mut in_bo = vec![false; bg.len()];
    for c in 0..grid.len() {
        if report.owner[c] != NONE {
            continue;
        }
        let (s, k) = grid.site_slab(c);
        let x = d.site_min() + s as i64;
        let col = bg.column_of_site(x);
        let (a, b) = grid.slab_bounds(k);
        let pieces = if b > d.t_max() { vec![(a, d.t_max()), (d.t_min(), b - d.beta())] } else { vec![(a, b)] };
        for (p, q) in pieces {
            for j in bg.row_of(p)..=bg.row_of(q) {
                let (lo, hi) = bg.row_bounds(j);
                if q.min(hi) - p.max(lo) > 0.0 {
                    in_bo[bg.index(col, j)] = true;
                }
            }
        }
    }
    let num_links = report.decomp.links[..report.decomp.num_real]
        .iter()
        .filter(|l| in_bo[bg.block_of_link(l.edge, l.t)])
        .count();
    let outside: Vec<bool> = report.owner.iter().map(|&o| o == NONE).collect();
    Ok(BlockOutside {
        blocks: (0..bg.len()).filter(|&b| in_bo[b]).collect(),
        num_links,
        block_components: components(bg.len(), &in_bo, |b| blocks[b].neighbors.clone()),
        outside_components: components(grid.len(), &outside, |c| grid.neighbors(c).map(|(nb, _)| nb).collect()),
    })
}
