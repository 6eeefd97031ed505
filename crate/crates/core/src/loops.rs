//! Loop decomposition of a link configuration.
//!
//! Each link at `(x+1/2, t)` has four ends: left/right site, just above or
//! just below `t`. A cross joins left-above with right-below and left-below
//! with right-above; a double-bar joins the two above ends and the two below
//! ends.

use serde::Serialize;

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Edge};
use crate::linkconfig::{LinkConfig, LinkKind, Move};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Vert {
    Above,
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct End {
    pub side: Side,
    pub vert: Vert,
}

impl End {
    pub const ALL: [End; 4] = [
        End { side: Side::Left, vert: Vert::Above },
        End { side: Side::Left, vert: Vert::Below },
        End { side: Side::Right, vert: Vert::Above },
        End { side: Side::Right, vert: Vert::Below },
    ];

    pub fn index(self) -> usize {
        (self.side as usize) * 2 + self.vert as usize
    }

    pub fn partner(self, kind: LinkKind) -> End {
        let side = match self.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        let vert = match (kind, self.vert) {
            (LinkKind::Bar, v) => v,
            (LinkKind::Cross, Vert::Above) => Vert::Below,
            (LinkKind::Cross, Vert::Below) => Vert::Above,
        };
        End { side, vert }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BoundaryBar {
    Top,
    Bottom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracedLink {
    pub edge: Edge,
    pub t: f64,
    pub kind: LinkKind,
    pub boundary: Option<BoundaryBar>,
}

/// A maximal link-free piece of a site column. On the torus `t_hi` may
/// exceed β when the piece wraps through the seam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub site: i64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub lower: Option<(usize, Side)>,
    pub upper: Option<(usize, Side)>,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    pub fn midpoint(&self, domain: &Domain) -> f64 {
        domain.wrap_time(0.5 * (self.t_lo + self.t_hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Traversal {
    pub link: usize,
    pub from: End,
    pub to: End,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Loop {
    /// Intervals in traversal order, with `true` for upward motion.
    pub steps: Vec<(usize, bool)>,
    pub traversals: Vec<Traversal>,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct LoopDecomposition {
    pub domain: Domain,
    /// Real links in canonical order followed by the fixed boundary bars.
    pub links: Vec<TracedLink>,
    pub num_real: usize,
    pub intervals: Vec<Interval>,
    pub interval_loop: Vec<usize>,
    pub loops: Vec<Loop>,
    end_interval: Vec<[usize; 4]>,
}

impl LoopDecomposition {
    pub fn ell(&self) -> usize {
        self.loops.len()
    }

    pub fn interval_at_end(&self, link: usize, end: End) -> Option<usize> {
        let i = self.end_interval[link][end.index()];
        (i != usize::MAX).then_some(i)
    }

    pub fn loop_at_end(&self, link: usize, end: End) -> Option<usize> {
        self.interval_at_end(link, end).map(|i| self.interval_loop[i])
    }

    /// Loops through the two strands of a link: for a bar the upper and
    /// lower halves, for a cross the strands leaving left-above and
    /// left-below. `None` marks a half outside the domain.
    pub fn strands(&self, link: usize) -> (Option<usize>, Option<usize>) {
        (
            self.loop_at_end(link, End { side: Side::Left, vert: Vert::Above }),
            self.loop_at_end(link, End { side: Side::Left, vert: Vert::Below }),
        )
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }
}

/// Full decomposition of a configuration into loops.
pub fn trace_loops(cfg: &LinkConfig) -> LoopDecomposition {
    let d = *cfg.domain();
    let beta = d.beta();
    let periodic = d.is_periodic();
    let mut links: Vec<TracedLink> = cfg
        .links()
        .map(|l| TracedLink { edge: l.edge, t: l.t, kind: l.kind, boundary: None })
        .collect();
    let num_real = links.len();
    if !periodic {
        for e in d.edges().filter(|e| d.is_boundary_edge(*e)) {
            links.push(TracedLink { edge: e, t: d.t_min(), kind: LinkKind::Bar, boundary: Some(BoundaryBar::Bottom) });
            links.push(TracedLink { edge: e, t: d.t_max(), kind: LinkKind::Bar, boundary: Some(BoundaryBar::Top) });
        }
    }

    let mut events: Vec<Vec<(f64, usize, Side)>> = vec![Vec::new(); d.num_sites()];
    for (id, l) in links.iter().enumerate() {
        let si = d.site_index(l.edge.x_left).expect("link edge inside domain");
        events[si].push((l.t, id, Side::Left));
        events[si + 1].push((l.t, id, Side::Right));
    }
    for ev in &mut events {
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut intervals = Vec::new();
    let mut end_interval = vec![[usize::MAX; 4]; links.len()];
    for (si, ev) in events.iter().enumerate() {
        let x = d.site_min() + si as i64;
        if ev.is_empty() {
            intervals.push(Interval { site: x, t_lo: 0.0, t_hi: beta, lower: None, upper: None });
            continue;
        }
        let m = ev.len();
        let count = if periodic { m } else { m - 1 };
        for k in 0..count {
            let (t0, a, sa) = ev[k];
            let (t1, b, sb) = ev[(k + 1) % m];
            let t_hi = if k + 1 == m { t1 + beta } else { t1 };
            let id = intervals.len();
            intervals.push(Interval { site: x, t_lo: t0, t_hi, lower: Some((a, sa)), upper: Some((b, sb)) });
            end_interval[a][End { side: sa, vert: Vert::Above }.index()] = id;
            end_interval[b][End { side: sb, vert: Vert::Below }.index()] = id;
        }
    }

    let mut interval_loop = vec![usize::MAX; intervals.len()];
    let mut loops = Vec::new();
    for start in 0..intervals.len() {
        if interval_loop[start] != usize::MAX {
            continue;
        }
        let lid = loops.len();
        let mut lp = Loop { steps: Vec::new(), traversals: Vec::new(), length: 0.0 };
        let (mut cur, mut up) = (start, true);
        loop {
            assert!(interval_loop[cur] == usize::MAX, "interval visited twice while tracing a loop");
            interval_loop[cur] = lid;
            lp.steps.push((cur, up));
            lp.length += intervals[cur].length();
            let exit = if up { intervals[cur].upper } else { intervals[cur].lower };
            let Some((link, side)) = exit else { break };
            let from = End { side, vert: if up { Vert::Below } else { Vert::Above } };
            let to = from.partner(links[link].kind);
            lp.traversals.push(Traversal { link, from, to });
            let next = end_interval[link][to.index()];
            let next_up = to.vert == Vert::Above;
            if next == start && next_up {
                break;
            }
            cur = next;
            up = next_up;
        }
        loops.push(lp);
    }

    LoopDecomposition { domain: d, links, num_real, intervals, interval_loop, loops, end_interval }
}

/// External pairing of the endpoints `x_i^-` (index `2i`) and `x_i^+`
/// (index `2i+1`) of a finite set of cut points.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    pub points: Vec<(i64, f64)>,
    pub partner: Vec<usize>,
}

impl Pairing {
    /// Number of loops meeting the cut points, `ℓ(π)`.
    pub fn ell(&self) -> usize {
        let k = self.points.len();
        count_cycles(&self.partner, &(0..k).map(|i| (2 * i, 2 * i + 1)).collect::<Vec<_>>())
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.partner.len()).filter(|&a| a < self.partner[a]).map(|a| (a, self.partner[a])).collect()
    }
}

/// Number of connected components of the graph on `partner.len()` nodes
/// whose edges are the pairing plus the extra `closure` edges.
pub fn count_cycles(partner: &[usize], closure: &[(usize, usize)]) -> usize {
    let mut dsu = Dsu::new(partner.len());
    for (a, &b) in partner.iter().enumerate() {
        dsu.union(a, b);
    }
    for &(a, b) in closure {
        dsu.union(a, b);
    }
    dsu.components()
}

/// Closure edges joining the four ends of a link placed at a two-point cut
/// `[(x,t), (x+1,t)]`: node 0 is left-below, 1 left-above, 2 right-below,
/// 3 right-above.
fn link_closure(kind: Option<LinkKind>) -> [(usize, usize); 2] {
    match kind {
        None => [(0, 1), (2, 3)],
        Some(LinkKind::Bar) => [(1, 3), (0, 2)],
        Some(LinkKind::Cross) => [(1, 2), (0, 3)],
    }
}

pub fn pairing_at(cfg: &LinkConfig, points: &[(i64, f64)]) -> Result<Pairing> {
    let partner = trace_pairing(cfg, points, None)?;
    Ok(Pairing { points: points.to_vec(), partner })
}

/// Change in loop count caused by a move, computed by local tracing.
pub fn delta_loops(cfg: &LinkConfig, mv: &Move) -> Result<i64> {
    let (link, skip, before, after) = match *mv {
        Move::Insert(l) => {
            cfg.check_insertable(&l)?;
            (l, None, None, Some(l.kind))
        }
        Move::Delete(i) | Move::Flip(i) => {
            let l = cfg.link(i).ok_or(Error::IndexOutOfRange { index: i, len: cfg.len() })?;
            let skip = cfg.locate(i);
            let after = match mv {
                Move::Flip(_) => Some(l.kind.flipped()),
                _ => None,
            };
            (l, skip, Some(l.kind), after)
        }
    };
    let x = link.edge.x_left;
    let partner = trace_pairing(cfg, &[(x, link.t), (x + 1, link.t)], skip)?;
    let b = count_cycles(&partner, &link_closure(before)) as i64;
    let a = count_cycles(&partner, &link_closure(after)) as i64;
    Ok(a - b)
}

struct Tracer<'a> {
    cfg: &'a LinkConfig,
    domain: Domain,
    points: &'a [(i64, f64)],
    skip: Option<(usize, usize)>,
}

enum Hit {
    Link { edge_idx: usize, t: f64, side: Side, kind: LinkKind },
    Cut(usize),
}

impl Tracer<'_> {
    fn next_hit(&self, site: i64, s: f64, up: bool) -> Hit {
        let d = &self.domain;
        let beta = d.beta();
        let periodic = d.is_periodic();
        let si = d.site_index(site).expect("site in domain");
        let mut best: Option<(f64, Hit)> = None;
        let offer = |dist: f64, hit: Hit, best: &mut Option<(f64, Hit)>| {
            if best.as_ref().is_none_or(|(b, _)| dist < *b) {
                *best = Some((dist, hit));
            }
        };

        let incident = [
            (si.checked_sub(1), Side::Right),
            ((si < d.num_edges()).then_some(si), Side::Left),
        ];
        for (ei, side) in incident {
            let Some(ei) = ei else { continue };
            let arr = self.cfg.edge_entries(ei);
            let skip = match self.skip {
                Some((se, sp)) if se == ei => Some(sp),
                _ => None,
            };
            let len = arr.len();
            if up {
                let mut i = arr.partition_point(|e| e.t <= s);
                if skip == Some(i) {
                    i += 1;
                }
                if i < len {
                    offer(arr[i].t - s, Hit::Link { edge_idx: ei, t: arr[i].t, side, kind: arr[i].kind }, &mut best);
                } else if periodic {
                    let j = if skip == Some(0) { 1 } else { 0 };
                    if j < len {
                        offer(arr[j].t + beta - s, Hit::Link { edge_idx: ei, t: arr[j].t, side, kind: arr[j].kind }, &mut best);
                    }
                }
            } else {
                let mut i = arr.partition_point(|e| e.t < s) as isize - 1;
                if skip.map(|p| p as isize) == Some(i) {
                    i -= 1;
                }
                if i >= 0 {
                    let e = arr[i as usize];
                    offer(s - e.t, Hit::Link { edge_idx: ei, t: e.t, side, kind: e.kind }, &mut best);
                } else if periodic && len > 0 {
                    let mut j = len as isize - 1;
                    if skip.map(|p| p as isize) == Some(j) {
                        j -= 1;
                    }
                    if j >= 0 {
                        let e = arr[j as usize];
                        offer(s - e.t + beta, Hit::Link { edge_idx: ei, t: e.t, side, kind: e.kind }, &mut best);
                    }
                }
            }
        }

        if !periodic {
            let be = d.boundary_edge_of_site(site).expect("rectangle has boundary edges");
            let ei = d.edge_index(be).expect("boundary edge in domain");
            let side = if be.x_left == site { Side::Left } else { Side::Right };
            let (dist, t) = if up { (d.t_max() - s, d.t_max()) } else { (s - d.t_min(), d.t_min()) };
            offer(dist, Hit::Link { edge_idx: ei, t, side, kind: LinkKind::Bar }, &mut best);
        }

        for (k, &(x, tc)) in self.points.iter().enumerate() {
            if x != site {
                continue;
            }
            let mut dist = if up { tc - s } else { s - tc };
            if dist <= 0.0 {
                if periodic {
                    dist += beta;
                } else {
                    continue;
                }
            }
            offer(dist, Hit::Cut(k), &mut best);
        }

        best.expect("a rectangle always offers a boundary bar and a torus cut returns to itself").1
    }
}

fn validate_points(cfg: &LinkConfig, points: &[(i64, f64)], skip: Option<(usize, usize)>) -> Result<()> {
    let d = cfg.domain();
    let skip_link = skip.map(|(ei, p)| (d.edge_at(ei), cfg.edge_entries(ei)[p].t));
    for (k, &(x, t)) in points.iter().enumerate() {
        let bad = |reason: &str| Error::BadPoint { site: x, t, reason: reason.into() };
        if d.site_index(x).is_none() {
            return Err(bad("site outside domain"));
        }
        if !d.contains_time(t) {
            return Err(bad("time outside domain"));
        }
        let on_skip = skip_link.is_some_and(|(e, ts)| ts == t && (e.x_left == x || e.right() == x));
        if !on_skip && cfg.site_has_link_at(x, t) {
            return Err(bad("coincides with a link"));
        }
        if points[..k].iter().any(|&(y, s)| y == x && s == t) {
            return Err(bad("duplicate point"));
        }
    }
    Ok(())
}

/// Trace from every endpoint of the cut points until another endpoint is
/// reached, ignoring the link at `skip` (edge index, position).
pub(crate) fn trace_pairing(
    cfg: &LinkConfig,
    points: &[(i64, f64)],
    skip: Option<(usize, usize)>,
) -> Result<Vec<usize>> {
    validate_points(cfg, points, skip)?;
    let tracer = Tracer { cfg, domain: *cfg.domain(), points, skip };
    let nend = 2 * points.len();
    let mut partner = vec![usize::MAX; nend];
    let guard = 4 * (cfg.len() + 2 * cfg.domain().num_edges()) + 4 * points.len() + 8;
    for start in 0..nend {
        if partner[start] != usize::MAX {
            continue;
        }
        let (mut site, mut s) = points[start / 2];
        let mut up = start % 2 == 1;
        let mut steps = 0;
        let stop = loop {
            steps += 1;
            if steps > guard {
                return Err(Error::Invariant("local trace did not terminate".into()));
            }
            match tracer.next_hit(site, s, up) {
                Hit::Cut(k) => break if up { 2 * k } else { 2 * k + 1 },
                Hit::Link { edge_idx, t, side, kind } => {
                    let from = End { side, vert: if up { Vert::Below } else { Vert::Above } };
                    let to = from.partner(kind);
                    let e = tracer.domain.edge_at(edge_idx);
                    site = match to.side {
                        Side::Left => e.x_left,
                        Side::Right => e.right(),
                    };
                    s = t;
                    up = to.vert == Vert::Above;
                }
            }
        };
        partner[start] = stop;
        partner[stop] = start;
    }
    Ok(partner)
}
