//! Lattice, domains, blocks and rectilinear circuits.
//!
//! Sites are the integers `-L+1..=L`. The edge with left endpoint `x` sits at
//! `x + 1/2`; it is primal when `x` is even.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Primal,
    Dual,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Primal => Parity::Dual,
            Parity::Dual => Parity::Primal,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Primal => 1.0,
            Parity::Dual => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub x_left: i64,
}

impl Edge {
    pub fn new(x_left: i64) -> Edge {
        Edge { x_left }
    }

    pub fn right(self) -> i64 {
        self.x_left + 1
    }

    pub fn parity(self) -> Parity {
        if self.x_left.rem_euclid(2) == 0 {
            Parity::Primal
        } else {
            Parity::Dual
        }
    }

    pub fn center(self) -> f64 {
        self.x_left as f64 + 0.5
    }
}

/// Site columns are labelled by the parity of the edge they are the right
/// endpoint of, so odd sites are primal columns.
pub fn site_parity(x: i64) -> Parity {
    Edge::new(x - 1).parity()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    Torus,
    PrimalRect,
    DualRect,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Torus => "torus",
            DomainKind::PrimalRect => "primal",
            DomainKind::DualRect => "dual",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "torus" => Ok(DomainKind::Torus),
            "primal" | "primal-rect" | "primal_rect" => Ok(DomainKind::PrimalRect),
            "dual" | "dual-rect" | "dual_rect" => Ok(DomainKind::DualRect),
            other => Err(Error::InvalidDomain(format!("unknown domain kind '{other}'"))),
        }
    }
}

/// A space-time domain `Λ_L × time`.
///
/// The torus is periodic in time with times in `[0, β)`. Rectangles use the
/// open interval `(-β/2, β/2)` and carry fixed boundary double-bars at the
/// top and bottom of every boundary-parity edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    kind: DomainKind,
    l: i64,
    beta: f64,
}

impl Domain {
    pub fn new(kind: DomainKind, l: i64, beta: f64) -> Result<Domain> {
        if l < 1 {
            return Err(Error::InvalidDomain(format!("L must be >= 1, got {l}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidDomain(format!("beta must be positive and finite, got {beta}")));
        }
        match kind {
            DomainKind::PrimalRect if l % 2 == 0 => {
                return Err(Error::InvalidDomain(format!("primal rectangle needs odd L, got {l}")))
            }
            DomainKind::DualRect if l % 2 != 0 => {
                return Err(Error::InvalidDomain(format!("dual rectangle needs even L, got {l}")))
            }
            _ => {}
        }
        Ok(Domain { kind, l, beta })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn l(&self) -> i64 {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == DomainKind::Torus
    }

    pub fn site_min(&self) -> i64 {
        -self.l + 1
    }

    pub fn site_max(&self) -> i64 {
        self.l
    }

    pub fn num_sites(&self) -> usize {
        (2 * self.l) as usize
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<i64> {
        self.site_min()..=self.site_max()
    }

    pub fn site_index(&self, x: i64) -> Option<usize> {
        if x < self.site_min() || x > self.site_max() {
            None
        } else {
            Some((x - self.site_min()) as usize)
        }
    }

    pub fn num_edges(&self) -> usize {
        (2 * self.l - 1) as usize
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> {
        (self.site_min()..self.site_max()).map(Edge::new)
    }

    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        if e.x_left < self.site_min() || e.x_left >= self.site_max() {
            None
        } else {
            Some((e.x_left - self.site_min()) as usize)
        }
    }

    pub fn edge_at(&self, idx: usize) -> Edge {
        Edge::new(self.site_min() + idx as i64)
    }

    pub fn t_min(&self) -> f64 {
        match self.kind {
            DomainKind::Torus => 0.0,
            _ => -self.beta / 2.0,
        }
    }

    pub fn t_max(&self) -> f64 {
        match self.kind {
            DomainKind::Torus => self.beta,
            _ => self.beta / 2.0,
        }
    }

    /// Whether `t` is an admissible link or cut time.
    pub fn contains_time(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        match self.kind {
            DomainKind::Torus => (0.0..self.beta).contains(&t),
            _ => t > self.t_min() && t < self.t_max(),
        }
    }

    pub fn wrap_time(&self, t: f64) -> f64 {
        if self.is_periodic() {
            let w = t.rem_euclid(self.beta);
            if w >= self.beta {
                0.0
            } else {
                w
            }
        } else {
            t
        }
    }

    pub fn boundary_parity(&self) -> Option<Parity> {
        match self.kind {
            DomainKind::Torus => None,
            DomainKind::PrimalRect => Some(Parity::Primal),
            DomainKind::DualRect => Some(Parity::Dual),
        }
    }

    pub fn is_boundary_edge(&self, e: Edge) -> bool {
        self.boundary_parity() == Some(e.parity()) && self.edge_index(e).is_some()
    }

    /// The boundary edge that carries the fixed bars seen by site `x`.
    pub fn boundary_edge_of_site(&self, x: i64) -> Option<Edge> {
        let p = self.boundary_parity()?;
        let left = Edge::new(x - 1);
        if left.parity() == p && self.edge_index(left).is_some() {
            Some(left)
        } else {
            Some(Edge::new(x))
        }
    }

    /// Total link intensity `ν = #edges · β` of the base process.
    pub fn total_intensity(&self) -> f64 {
        self.num_edges() as f64 * self.beta
    }

    /// Total length of all site columns.
    pub fn column_length(&self) -> f64 {
        self.num_sites() as f64 * self.beta
    }

    /// Length of the domain boundary in the plane, counting the two
    /// vertical sides and, for rectangles, the top and bottom.
    pub fn perimeter(&self) -> f64 {
        let width = self.num_sites() as f64;
        match self.kind {
            DomainKind::Torus => 2.0 * self.beta,
            _ => 2.0 * width + 2.0 * self.beta,
        }
    }

    /// Left and right x-coordinates of the domain in the plane.
    pub fn x_extent(&self) -> (f64, f64) {
        (self.site_min() as f64 - 0.5, self.site_max() as f64 + 0.5)
    }

    /// Parity favoured by the boundary: the rectangle's own parity, or for
    /// the torus the parity whose pairs tile the chain (primal when L is odd).
    pub fn favoured_parity(&self) -> Parity {
        match self.boundary_parity() {
            Some(p) => p,
            None => {
                if Edge::new(self.site_min()).parity() == Parity::Primal {
                    Parity::Primal
                } else {
                    Parity::Dual
                }
            }
        }
    }
}

/// Block `b_{i,j}`: the sites `{2i+1, 2i+2}` over one row of height `h/n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub i: i64,
    pub j: i64,
    pub primal_edge: Edge,
    pub dual_edge: Edge,
    pub t_lo: f64,
    pub t_hi: f64,
    pub sites: Vec<i64>,
    pub neighbors: Vec<usize>,
}

impl Block {
    pub fn area(&self) -> f64 {
        self.sites.len() as f64 * (self.t_hi - self.t_lo)
    }
}

/// Row layout of the block grid: rows start at the bottom of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockGrid {
    pub height: f64,
    pub rows: usize,
    pub i_min: i64,
    pub i_max: i64,
    t_min: f64,
    t_max: f64,
}

impl BlockGrid {
    pub fn new(domain: &Domain, h: f64, n: f64) -> Result<BlockGrid> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("block parameter h must be positive, got {h}")));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!("n must be positive, got {n}")));
        }
        let height = h / n;
        let rows = ((domain.beta() / height) - 1e-9).ceil().max(1.0) as usize;
        Ok(BlockGrid {
            height,
            rows,
            i_min: (domain.site_min() - 1).div_euclid(2),
            i_max: (domain.site_max() - 1).div_euclid(2),
            t_min: domain.t_min(),
            t_max: domain.t_max(),
        })
    }

    pub fn num_columns(&self) -> usize {
        (self.i_max - self.i_min + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.num_columns() * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_bounds(&self, j: usize) -> (f64, f64) {
        let lo = self.t_min + j as f64 * self.height;
        let hi = if j + 1 == self.rows {
            self.t_max
        } else {
            (self.t_min + (j + 1) as f64 * self.height).min(self.t_max)
        };
        (lo, hi)
    }

    pub fn row_of(&self, t: f64) -> usize {
        let j = ((t - self.t_min) / self.height).floor();
        (j.max(0.0) as usize).min(self.rows - 1)
    }

    pub fn column_of_site(&self, x: i64) -> usize {
        ((x - 1).div_euclid(2) - self.i_min) as usize
    }

    pub fn index(&self, column: usize, row: usize) -> usize {
        column * self.rows + row
    }

    /// Block holding site `x` at time `t`.
    pub fn block_of(&self, x: i64, t: f64) -> usize {
        self.index(self.column_of_site(x), self.row_of(t))
    }

    /// Block owning a link on edge `e`: the one containing its right endpoint.
    pub fn block_of_link(&self, e: Edge, t: f64) -> usize {
        self.block_of(e.right(), t)
    }
}

/// Tile the domain with blocks of height `h/n`, aligned to the bottom of the
/// domain, and compute edge adjacency (time-periodic on the torus).
pub fn enumerate_blocks(domain: &Domain, h: f64, n: f64) -> Result<Vec<Block>> {
    let grid = BlockGrid::new(domain, h, n)?;
    let mut out = Vec::with_capacity(grid.len());
    for c in 0..grid.num_columns() {
        let i = grid.i_min + c as i64;
        let sites: Vec<i64> = [2 * i + 1, 2 * i + 2]
            .into_iter()
            .filter(|x| domain.site_index(*x).is_some())
            .collect();
        for j in 0..grid.rows {
            let (t_lo, t_hi) = grid.row_bounds(j);
            let mut neighbors = Vec::new();
            let mut push = |idx: usize| {
                let me = grid.index(c, j);
                if idx != me && !neighbors.contains(&idx) {
                    neighbors.push(idx);
                }
            };
            if c > 0 {
                push(grid.index(c - 1, j));
            }
            if c + 1 < grid.num_columns() {
                push(grid.index(c + 1, j));
            }
            if j > 0 {
                push(grid.index(c, j - 1));
            } else if domain.is_periodic() {
                push(grid.index(c, grid.rows - 1));
            }
            if j + 1 < grid.rows {
                push(grid.index(c, j + 1));
            } else if domain.is_periodic() {
                push(grid.index(c, 0));
            }
            out.push(Block {
                i,
                j: j as i64,
                primal_edge: Edge::new(2 * i),
                dual_edge: Edge::new(2 * i + 1),
                t_lo,
                t_hi,
                sites: sites.clone(),
                neighbors,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Span {
    Horizontal { t: f64, x_from: f64, x_to: f64 },
    Vertical { x: f64, t_from: f64, t_to: f64 },
}

impl Span {
    pub fn length(&self) -> f64 {
        match *self {
            Span::Horizontal { x_from, x_to, .. } => (x_to - x_from).abs(),
            Span::Vertical { t_from, t_to, .. } => (t_to - t_from).abs(),
        }
    }
}

/// A closed rectilinear curve given as consecutive maximal spans.
///
/// On the torus a span may wrap through the time seam, in which case its
/// unwrapped length is stored via `t_to` outside `[0, β)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RectilinearCircuit {
    pub spans: Vec<Span>,
}

impl RectilinearCircuit {
    pub fn length(&self) -> f64 {
        self.spans.iter().map(Span::length).sum()
    }

    pub fn vertical_length(&self) -> f64 {
        self.spans
            .iter()
            .filter(|s| matches!(s, Span::Vertical { .. }))
            .map(Span::length)
            .sum()
    }

    pub fn horizontal_length(&self) -> f64 {
        self.length() - self.vertical_length()
    }

    /// The outer boundary Γ of a rectangular domain.
    pub fn domain_boundary(domain: &Domain) -> Option<RectilinearCircuit> {
        if domain.is_periodic() {
            return None;
        }
        let (xl, xr) = domain.x_extent();
        let (b, t) = (domain.t_min(), domain.t_max());
        Some(RectilinearCircuit {
            spans: vec![
                Span::Horizontal { t: b, x_from: xl, x_to: xr },
                Span::Vertical { x: xr, t_from: b, t_to: t },
                Span::Horizontal { t, x_from: xr, x_to: xl },
                Span::Vertical { x: xl, t_from: t, t_to: b },
            ],
        })
    }
}
