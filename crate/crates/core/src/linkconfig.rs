//! Configurations of crosses and double-bars on edges × time.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, Edge};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Cross,
    Bar,
}

impl LinkKind {
    pub fn symbol(self) -> char {
        match self {
            LinkKind::Cross => 'X',
            LinkKind::Bar => 'B',
        }
    }

    pub fn flipped(self) -> LinkKind {
        match self {
            LinkKind::Cross => LinkKind::Bar,
            LinkKind::Bar => LinkKind::Cross,
        }
    }

    /// Base-measure weight of the mark: `u` for crosses, `1-u` for bars.
    pub fn weight(self, u: f64) -> f64 {
        match self {
            LinkKind::Cross => u,
            LinkKind::Bar => 1.0 - u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub edge: Edge,
    pub t: f64,
    pub kind: LinkKind,
}

impl Link {
    pub fn new(x_left: i64, t: f64, kind: LinkKind) -> Link {
        Link { edge: Edge::new(x_left), t, kind }
    }
}

/// Model parameters shared by the sampler and the cluster analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub u: f64,
    pub n: f64,
    pub kappa: f64,
    pub h: f64,
}

impl SimParams {
    pub fn new(u: f64, n: f64) -> Result<SimParams> {
        SimParams { u, n, kappa: 0.0, h: 1.0 }.validated()
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<SimParams> {
        self.kappa = kappa;
        self.validated()
    }

    pub fn with_h(mut self, h: f64) -> Result<SimParams> {
        self.h = h;
        self.validated()
    }

    pub fn validated(self) -> Result<SimParams> {
        if !(0.0..=1.0).contains(&self.u) {
            return Err(Error::InvalidParameter(format!("u must lie in [0,1], got {}", self.u)));
        }
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::InvalidParameter(format!("n must be positive, got {}", self.n)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be positive, got {}", self.h)));
        }
        Ok(self)
    }

    /// Height below which a trivial loop counts as small; infinite when κ = 0.
    pub fn small_cutoff(&self) -> f64 {
        if self.kappa == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (self.kappa * self.n)
        }
    }

    pub fn is_small(&self, height: f64) -> bool {
        height < self.small_cutoff()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Entry {
    pub t: f64,
    pub kind: LinkKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Move {
    Insert(Link),
    Delete(usize),
    Flip(usize),
}

/// Links stored per edge, sorted by time. Link indices follow the canonical
/// edge-major, time-ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    domain: Domain,
    edges: Vec<Vec<Entry>>,
    len: usize,
}

impl LinkConfig {
    pub fn empty(domain: Domain) -> LinkConfig {
        LinkConfig { domain, edges: vec![Vec::new(); domain.num_edges()], len: 0 }
    }

    pub fn from_links(domain: Domain, links: impl IntoIterator<Item = Link>) -> Result<LinkConfig> {
        let mut cfg = LinkConfig::empty(domain);
        for l in links {
            cfg.insert(l)?;
        }
        Ok(cfg)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub(crate) fn edge_entries(&self, edge_idx: usize) -> &[Entry] {
        &self.edges[edge_idx]
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.edges.iter().enumerate().flat_map(move |(i, v)| {
            let edge = self.domain.edge_at(i);
            v.iter().map(move |e| Link { edge, t: e.t, kind: e.kind })
        })
    }

    pub fn links_on(&self, edge: Edge) -> impl Iterator<Item = Link> + '_ {
        let idx = self.domain.edge_index(edge);
        idx.into_iter().flat_map(move |i| {
            self.edges[i].iter().map(move |e| Link { edge, t: e.t, kind: e.kind })
        })
    }

    pub fn locate(&self, index: usize) -> Option<(usize, usize)> {
        let mut rest = index;
        for (i, v) in self.edges.iter().enumerate() {
            if rest < v.len() {
                return Some((i, rest));
            }
            rest -= v.len();
        }
        None
    }

    pub fn index_of(&self, edge_idx: usize, pos: usize) -> usize {
        self.edges[..edge_idx].iter().map(Vec::len).sum::<usize>() + pos
    }

    pub fn link(&self, index: usize) -> Option<Link> {
        let (i, p) = self.locate(index)?;
        let e = self.edges[i][p];
        Some(Link { edge: self.domain.edge_at(i), t: e.t, kind: e.kind })
    }

    pub fn num_crosses(&self) -> usize {
        self.edges.iter().flatten().filter(|e| e.kind == LinkKind::Cross).count()
    }

    /// Check that a link could be inserted: in range and not at the time of
    /// any link sharing a site with it.
    pub fn check_insertable(&self, link: &Link) -> Result<()> {
        let Some(ei) = self.domain.edge_index(link.edge) else {
            return Err(Error::OutOfDomain { x_left: link.edge.x_left, t: link.t });
        };
        if !self.domain.contains_time(link.t) {
            return Err(Error::OutOfDomain { x_left: link.edge.x_left, t: link.t });
        }
        let lo = ei.saturating_sub(1);
        let hi = (ei + 1).min(self.edges.len() - 1);
        for j in lo..=hi {
            if self.edges[j].binary_search_by(|e| e.t.total_cmp(&link.t)).is_ok() {
                return Err(Error::Collision { x_left: link.edge.x_left, t: link.t });
            }
        }
        Ok(())
    }

    /// Whether a site carries a link at exactly time `t`.
    pub fn site_has_link_at(&self, x: i64, t: f64) -> bool {
        let mut hit = false;
        if let Some(i) = self.domain.edge_index(Edge::new(x - 1)) {
            hit |= self.edges[i].binary_search_by(|e| e.t.total_cmp(&t)).is_ok();
        }
        if let Some(i) = self.domain.edge_index(Edge::new(x)) {
            hit |= self.edges[i].binary_search_by(|e| e.t.total_cmp(&t)).is_ok();
        }
        hit
    }

    pub fn insert(&mut self, link: Link) -> Result<usize> {
        self.check_insertable(&link)?;
        let ei = self.domain.edge_index(link.edge).expect("checked");
        let pos = self.edges[ei].partition_point(|e| e.t < link.t);
        self.edges[ei].insert(pos, Entry { t: link.t, kind: link.kind });
        self.len += 1;
        Ok(self.index_of(ei, pos))
    }

    pub fn remove(&mut self, index: usize) -> Result<Link> {
        let (i, p) = self.locate(index).ok_or(Error::IndexOutOfRange { index, len: self.len })?;
        let e = self.edges[i].remove(p);
        self.len -= 1;
        Ok(Link { edge: self.domain.edge_at(i), t: e.t, kind: e.kind })
    }

    pub fn flip(&mut self, index: usize) -> Result<Link> {
        let (i, p) = self.locate(index).ok_or(Error::IndexOutOfRange { index, len: self.len })?;
        let e = &mut self.edges[i][p];
        e.kind = e.kind.flipped();
        Ok(Link { edge: self.domain.edge_at(i), t: e.t, kind: e.kind })
    }

    pub fn apply_move_in_place(&mut self, mv: &Move) -> Result<()> {
        match *mv {
            Move::Insert(l) => self.insert(l).map(|_| ()),
            Move::Delete(i) => self.remove(i).map(|_| ()),
            Move::Flip(i) => self.flip(i).map(|_| ()),
        }
    }

    pub fn apply_move(&self, mv: &Move) -> Result<LinkConfig> {
        let mut out = self.clone();
        out.apply_move_in_place(mv)?;
        Ok(out)
    }

    /// Number of links on edges `x_lo..=x_hi` (by left endpoint) with time in `[t_lo, t_hi)`.
    pub fn count_in_window(&self, x_lo: i64, x_hi: i64, t_lo: f64, t_hi: f64) -> usize {
        (x_lo..=x_hi)
            .filter_map(|x| self.domain.edge_index(Edge::new(x)))
            .map(|i| {
                let v = &self.edges[i];
                v.partition_point(|e| e.t < t_hi) - v.partition_point(|e| e.t < t_lo)
            })
            .sum()
    }

    pub fn header(&self) -> String {
        format!(
            "# loopcfg v1 kind={} L={} beta={}",
            self.domain.kind(),
            self.domain.l(),
            self.domain.beta()
        )
    }

    pub fn serialize(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for l in self.links() {
            let _ = writeln!(s, "{}\t{:.16e}\t{}", l.edge.x_left, l.t, l.kind.symbol());
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<LinkConfig> {
        let mut lines = text.lines().enumerate();
        let domain = loop {
            match lines.next() {
                None => return Err(Error::Parse { line: 0, msg: "missing header".into() }),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break parse_header(l).map_err(|msg| Error::Parse { line: i + 1, msg })?,
            }
        };
        let mut cfg = LinkConfig::empty(domain);
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let mut parts = line.split('\t');
            let (Some(x), Some(t), Some(k), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(perr(format!("expected 3 tab-separated fields, got '{line}'")));
            };
            let x: i64 = x.trim().parse().map_err(|_| perr(format!("bad edge '{x}'")))?;
            let t: f64 = t.trim().parse().map_err(|_| perr(format!("bad time '{t}'")))?;
            let kind = match k.trim() {
                "X" => LinkKind::Cross,
                "B" => LinkKind::Bar,
                other => return Err(perr(format!("bad link kind '{other}'"))),
            };
            cfg.insert(Link::new(x, t, kind)).map_err(|e| perr(e.to_string()))?;
        }
        Ok(cfg)
    }
}

fn parse_header(line: &str) -> std::result::Result<Domain, String> {
    let rest = line
        .trim()
        .strip_prefix("# loopcfg v1")
        .ok_or_else(|| format!("expected '# loopcfg v1' header, got '{line}'"))?;
    let (mut kind, mut l, mut beta) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad header token '{tok}'"))?;
        match k {
            "kind" => kind = Some(v.parse::<DomainKind>().map_err(|e| e.to_string())?),
            "L" => l = Some(v.parse::<i64>().map_err(|_| format!("bad L '{v}'"))?),
            "beta" => beta = Some(v.parse::<f64>().map_err(|_| format!("bad beta '{v}'"))?),
            _ => return Err(format!("unknown header key '{k}'")),
        }
    }
    match (kind, l, beta) {
        (Some(k), Some(l), Some(b)) => Domain::new(k, l, b).map_err(|e| e.to_string()),
        _ => Err("header needs kind, L and beta".into()),
    }
}

fn uniform_time<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> f64 {
    loop {
        let t = domain.t_min() + rng.random::<f64>() * domain.beta();
        if domain.contains_time(t) {
            return t;
        }
    }
}

pub(crate) fn random_time<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> f64 {
    uniform_time(domain, rng)
}

/// Independent Poisson processes of crosses and bars on the selected edges.
pub fn sample_poisson<R: Rng + ?Sized>(
    domain: &Domain,
    cross_rate: f64,
    bar_rate: f64,
    edge_filter: impl Fn(Edge) -> bool,
    rng: &mut R,
) -> LinkConfig {
    let mut cfg = LinkConfig::empty(*domain);
    for e in domain.edges().filter(|e| edge_filter(*e)) {
        for (rate, kind) in [(cross_rate, LinkKind::Cross), (bar_rate, LinkKind::Bar)] {
            let mean = rate * domain.beta();
            if mean <= 0.0 {
                continue;
            }
            let k = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
            let mut placed = 0;
            while placed < k {
                let link = Link { edge: e, t: uniform_time(domain, rng), kind };
                if cfg.insert(link).is_ok() {
                    placed += 1;
                }
            }
        }
    }
    cfg
}

/// A draw from the base measure: rate-1 links per edge, crosses with probability `u`.
pub fn sample_base<R: Rng + ?Sized>(domain: &Domain, u: f64, rng: &mut R) -> LinkConfig {
    sample_poisson(domain, u, 1.0 - u, |_| true, rng)
}

pub fn is_rect(domain: &Domain) -> bool {
    domain.kind() != DomainKind::Torus
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus() -> Domain {
        Domain::new(DomainKind::Torus, 2, 1.5).unwrap()
    }

    #[test]
    fn insert_keeps_canonical_order() {
        let mut c = LinkConfig::empty(torus());
        c.insert(Link::new(0, 0.7, LinkKind::Bar)).unwrap();
        c.insert(Link::new(-1, 0.2, LinkKind::Cross)).unwrap();
        let idx = c.insert(Link::new(0, 0.1, LinkKind::Cross)).unwrap();
        assert_eq!(idx, 1);
        let ts: Vec<f64> = c.links().map(|l| l.t).collect();
        assert_eq!(ts, vec![0.2, 0.1, 0.7]);
    }

    #[test]
    fn collisions_rejected() {
        let mut c = LinkConfig::empty(torus());
        c.insert(Link::new(0, 0.5, LinkKind::Bar)).unwrap();
        assert!(matches!(c.insert(Link::new(0, 0.5, LinkKind::Cross)), Err(Error::Collision { .. })));
        assert!(matches!(c.insert(Link::new(1, 0.5, LinkKind::Cross)), Err(Error::Collision { .. })));
        assert!(c.insert(Link::new(2, 0.5, LinkKind::Cross)).is_err());
        assert!(c.insert(Link::new(0, 1.5, LinkKind::Cross)).is_err());
    }

    #[test]
    fn move_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = sample_base(&torus(), 0.4, &mut rng);
        let link = Link::new(1, 0.123456, LinkKind::Cross);
        let plus = base.apply_move(&Move::Insert(link)).unwrap();
        let idx = plus.links().position(|l| l == link).unwrap();
        assert_eq!(plus.apply_move(&Move::Delete(idx)).unwrap(), base);
        if !base.is_empty() {
            let f = base.apply_move(&Move::Flip(0)).unwrap();
            assert_eq!(f.apply_move(&Move::Flip(0)).unwrap(), base);
        }
        assert!(matches!(base.apply_move(&Move::Delete(base.len())), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn serialization_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Domain::new(DomainKind::PrimalRect, 3, 2.5).unwrap();
        let c = sample_base(&d, 0.5, &mut rng);
        let text = c.serialize();
        assert!(text.starts_with("# loopcfg v1 kind=primal L=3 beta=2.5\n"));
        let back = LinkConfig::deserialize(&text).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.links().zip(c.links()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
        }
    }

    #[test]
    fn deserialize_rejects_garbage() {
        assert!(LinkConfig::deserialize("").is_err());
        assert!(LinkConfig::deserialize("# loopcfg v1 kind=primal L=2 beta=1\n").is_err());
        let bad = "# loopcfg v1 kind=torus L=1 beta=1\n0\t0.5\tQ\n";
        assert!(matches!(LinkConfig::deserialize(bad), Err(Error::Parse { line: 2, .. })));
        let dup = "# loopcfg v1 kind=torus L=1 beta=1\n0\t0.5\tX\n0\t0.5\tB\n";
        assert!(LinkConfig::deserialize(dup).is_err());
    }

    #[test]
    fn base_sample_has_expected_mean() {
        let d = Domain::new(DomainKind::Torus, 3, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 400;
        let (mut total, mut crosses) = (0usize, 0usize);
        for _ in 0..reps {
            let c = sample_base(&d, 0.25, &mut rng);
            total += c.len();
            crosses += c.num_crosses();
        }
        let nu = d.total_intensity();
        let mean = total as f64 / reps as f64;
        let se = (nu / reps as f64).sqrt();
        assert!((mean - nu).abs() < 4.0 * se, "mean {mean} vs {nu}");
        let frac = crosses as f64 / total as f64;
        assert!((frac - 0.25).abs() < 0.02);
    }

    #[test]
    fn u_extremes_pure_marks() {
        let d = Domain::new(DomainKind::Torus, 2, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_base(&d, 0.0, &mut rng).num_crosses(), 0);
        let c = sample_base(&d, 1.0, &mut rng);
        assert_eq!(c.num_crosses(), c.len());
    }
}
