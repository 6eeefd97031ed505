//! The discrete random mirror model on the 45°-rotated square lattice and
//! its vertical rescaling to the continuous loop model.
//!
//! Sites are `(c, r)` with `c + r` even; rays run along the diagonal edges
//! to `(c±1, r±1)`. A `v` mirror reverses the horizontal component of a
//! ray, an `h` mirror the vertical one, and an empty site lets it pass.
//! Faces are `(c, r)` with `c + r` odd; a face is black when `c` is odd.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, Edge};
use crate::linkconfig::{Link, LinkConfig, LinkKind};
use crate::stats::{estimate, EstimatorResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mirror {
    V,
    H,
    Empty,
}

impl Mirror {
    pub const ALL: [Mirror; 3] = [Mirror::V, Mirror::H, Mirror::Empty];

    pub fn symbol(self) -> char {
        match self {
            Mirror::V => 'V',
            Mirror::H => 'H',
            Mirror::Empty => '.',
        }
    }

    fn from_symbol(c: char) -> Option<Mirror> {
        match c {
            'V' => Some(Mirror::V),
            'H' => Some(Mirror::H),
            '.' => Some(Mirror::Empty),
            _ => None,
        }
    }

    /// Port joined to `port` inside a site. Ports: 0 up-left, 1 up-right,
    /// 2 down-left, 3 down-right.
    fn partner(self, port: usize) -> usize {
        match self {
            Mirror::V => [2, 3, 0, 1][port],
            Mirror::H => [1, 0, 3, 2][port],
            Mirror::Empty => [3, 2, 1, 0][port],
        }
    }
}

const PORT_DIR: [(i64, i64); 4] = [(-1, 1), (1, 1), (-1, -1), (1, -1)];
const OPPOSITE: [usize; 4] = [3, 2, 1, 0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MirrorParams {
    pub p_v: f64,
    pub p_h: f64,
    pub p_empty: f64,
    pub n: f64,
}

impl MirrorParams {
    pub fn new(p_v: f64, p_h: f64, p_empty: f64, n: f64) -> Result<MirrorParams> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(p_v) && ok(p_h) && ok(p_empty)) || (p_v + p_h + p_empty - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mirror probabilities must lie in [0,1] and sum to 1, got ({p_v}, {p_h}, {p_empty})"
            )));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!("n must be positive, got {n}")));
        }
        Ok(MirrorParams { p_v, p_h, p_empty, n })
    }

    pub fn weight(&self, m: Mirror) -> f64 {
        match m {
            Mirror::V => self.p_v,
            Mirror::H => self.p_h,
            Mirror::Empty => self.p_empty,
        }
    }
}

/// `p_∅ = uε`, `p_h = (1-u)ε`, `p_v = 1-ε`.
pub fn rescaled_params(u: f64, epsilon: f64, n: f64) -> Result<MirrorParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("u must lie in [0,1], got {u}")));
    }
    MirrorParams::new(1.0 - epsilon, (1.0 - u) * epsilon, u * epsilon, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FaceColour {
    Black,
    White,
}

impl FaceColour {
    pub fn of_face(c: i64) -> FaceColour {
        if c.rem_euclid(2) == 1 {
            FaceColour::Black
        } else {
            FaceColour::White
        }
    }
}

/// A finite set of sites inside a `cols × rows` array, some frozen, with
/// rows optionally periodic.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorLattice {
    cols: i64,
    rows: i64,
    periodic: bool,
    index: Vec<Option<usize>>,
    sites: Vec<(i64, i64)>,
    frozen: Vec<Option<Mirror>>,
}

impl MirrorLattice {
    fn build(cols: i64, rows: i64, periodic: bool, mut member: impl FnMut(i64, i64) -> Option<Option<Mirror>>) -> Result<Self> {
        if cols < 1 || rows < 1 || (periodic && rows % 2 != 0) {
            return Err(Error::InvalidParameter(format!("bad mirror array {cols}×{rows} (periodic rows must be even)")));
        }
        let mut index = vec![None; (cols * rows) as usize];
        let mut sites = Vec::new();
        let mut frozen = Vec::new();
        for c in 0..cols {
            for r in 0..rows {
                if (c + r) % 2 != 0 {
                    continue;
                }
                if let Some(f) = member(c, r) {
                    index[(c * rows + r) as usize] = Some(sites.len());
                    sites.push((c, r));
                    frozen.push(f);
                }
            }
        }
        Ok(MirrorLattice { cols, rows, periodic, index, sites, frozen })
    }

    /// Every site of a `cols × rows` array, all free; rays leaving the array
    /// end as paths.
    pub fn rect(cols: i64, rows: i64) -> Result<Self> {
        Self::build(cols, rows, false, |_, _| Some(None))
    }

    /// As [`MirrorLattice::rect`] with periodic rows.
    pub fn cylinder(cols: i64, rows: i64) -> Result<Self> {
        Self::build(cols, rows, true, |_, _| Some(None))
    }

    /// A frozen circuit of width and height `size` (both even) whose mirrors
    /// favour loops around faces of `colour`: vertical mirrors on the two
    /// side walls and horizontal mirrors on the top and bottom rows of the
    /// favoured columns. The white circuit is the black one moved one unit
    /// diagonally.
    pub fn boxed(width: i64, height: i64, colour: FaceColour) -> Result<Self> {
        if width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::InvalidParameter(format!("circuit size must be even and ≥ 2, got {width}×{height}")));
        }
        let o = match colour {
            FaceColour::Black => 0,
            FaceColour::White => 1,
        };
        Self::build(width + 2, height + 3, false, |c, r| {
            let (c, r) = (c - o, r - o);
            if c < 0 || c > width || r < 1 || r > height + 1 {
                return None;
            }
            if c == 0 || c == width {
                (r >= 2 && r <= height).then_some(Some(Mirror::V))
            } else if r == 1 || r == height + 1 {
                Some(Some(Mirror::H))
            } else {
                Some(None)
            }
        })
    }

    /// Lattice matching the open chain with `2L` sites on a time circle of
    /// `rows` rows: frozen vertical mirrors on columns `0` and `2L`, free
    /// columns `1..2L` standing for the edges.
    pub fn chain(l: i64, rows: i64) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidParameter(format!("L must be ≥ 1, got {l}")));
        }
        Self::build(2 * l + 1, rows, true, |c, _| Some(if c == 0 || c == 2 * l { Some(Mirror::V) } else { None }))
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> (i64, i64) {
        self.sites[i]
    }

    pub fn site_at(&self, c: i64, r: i64) -> Option<usize> {
        if c < 0 || c >= self.cols {
            return None;
        }
        let r = if self.periodic { r.rem_euclid(self.rows) } else { r };
        if r < 0 || r >= self.rows {
            return None;
        }
        self.index[(c * self.rows + r) as usize]
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i].is_some()
    }

    pub fn free_sites(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&i| self.frozen[i].is_none()).collect()
    }

    pub fn cols(&self) -> i64 {
        self.cols
    }

    pub fn rows(&self) -> i64 {
        self.rows
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn neighbor(&self, site: usize, port: usize) -> Option<(usize, usize)> {
        let (c, r) = self.sites[site];
        let (dc, dr) = PORT_DIR[port];
        self.site_at(c + dc, r + dr).map(|s| (s, OPPOSITE[port]))
    }

    /// Faces whose four corner sites all belong to the lattice.
    pub fn interior_faces(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for c in 0..self.cols {
            for r in 0..self.rows {
                if (c + r) % 2 == 1
                    && [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)].iter().all(|&(a, b)| self.site_at(a, b).is_some())
                {
                    out.push((c, r));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorConfig {
    pub lattice: MirrorLattice,
    pub state: Vec<Mirror>,
}

impl MirrorConfig {
    /// Frozen sites take their fixed mirror, free sites `fill`.
    pub fn uniform(lattice: MirrorLattice, fill: Mirror) -> MirrorConfig {
        let state = lattice.frozen.iter().map(|f| f.unwrap_or(fill)).collect();
        MirrorConfig { lattice, state }
    }

    pub fn set(&mut self, site: usize, m: Mirror) -> Result<()> {
        if self.lattice.is_frozen(site) {
            return Err(Error::FrozenSite(site));
        }
        self.state[site] = m;
        Ok(())
    }

    /// Row-major grid over `{V, H, .}`, top row first, blanks off-lattice.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in (0..self.lattice.rows).rev() {
            let line: String = (0..self.lattice.cols)
                .map(|c| self.lattice.site_at(c, r).map_or(' ', |i| self.state[i].symbol()))
                .collect();
            s.push_str(line.trim_end());
            s.push('\n');
        }
        s
    }

    /// Inverse of [`MirrorConfig::to_text`] on a given lattice.
    pub fn from_text(lattice: MirrorLattice, text: &str) -> Result<MirrorConfig> {
        let mut cfg = MirrorConfig::uniform(lattice, Mirror::V);
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != cfg.lattice.rows as usize {
            return Err(Error::Parse { line: lines.len(), msg: format!("expected {} rows", cfg.lattice.rows) });
        }
        for (k, line) in lines.iter().enumerate() {
            let r = cfg.lattice.rows - 1 - k as i64;
            let chars: Vec<char> = line.chars().collect();
            for c in 0..cfg.lattice.cols {
                let ch = chars.get(c as usize).copied().unwrap_or(' ');
                match (cfg.lattice.site_at(c, r), Mirror::from_symbol(ch)) {
                    (Some(i), Some(m)) => {
                        if cfg.lattice.frozen[i].is_some_and(|f| f != m) {
                            return Err(Error::Parse { line: k + 1, msg: format!("frozen site ({c},{r}) changed") });
                        }
                        cfg.state[i] = m;
                    }
                    (None, None) if ch == ' ' => {}
                    _ => return Err(Error::Parse { line: k + 1, msg: format!("bad symbol {ch:?} at column {c}") }),
                }
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for MirrorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// One loop or path, with the horizontal mirrors it reflects off (site and
/// whether it used the upper pair of ports) and the empty sites it crosses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MirrorComponent {
    pub closed: bool,
    pub h_visits: Vec<(usize, bool)>,
    pub empty_visits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MirrorTrace {
    pub loops: usize,
    pub paths: usize,
    pub components: Vec<MirrorComponent>,
}

impl MirrorTrace {
    /// `ℓ(ξ)`: loops and paths together.
    pub fn ell(&self) -> usize {
        self.loops + self.paths
    }
}

/// Follow every ray through the configuration.
pub fn mirror_trace_loops(cfg: &MirrorConfig) -> MirrorTrace {
    let lat = &cfg.lattice;
    let mut seen = vec![false; 4 * lat.num_sites()];
    let mut out = MirrorTrace { loops: 0, paths: 0, components: Vec::new() };
    for start in 0..seen.len() {
        if seen[start] {
            continue;
        }
        let mut comp = MirrorComponent { closed: false, h_visits: Vec::new(), empty_visits: 0 };
        // Walk forward from `start` through its site, then across edges.
        let visit = |site: usize, port: usize, seen: &mut Vec<bool>, comp: &mut MirrorComponent| -> usize {
            let m = cfg.state[site];
            let q = m.partner(port);
            seen[4 * site + port] = true;
            seen[4 * site + q] = true;
            match m {
                Mirror::H => comp.h_visits.push((site, port < 2)),
                Mirror::Empty => comp.empty_visits += 1,
                Mirror::V => {}
            }
            q
        };
        let (s0, p0) = (start / 4, start % 4);
        let mut q = visit(s0, p0, &mut seen, &mut comp);
        let mut cur = (s0, q);
        loop {
            match lat.neighbor(cur.0, cur.1) {
                None => break,
                Some((s, p)) if s == s0 && p == p0 => {
                    comp.closed = true;
                    break;
                }
                Some((s, p)) => {
                    q = visit(s, p, &mut seen, &mut comp);
                    cur = (s, q);
                }
            }
        }
        if !comp.closed {
            let mut cur = (s0, p0);
            while let Some((s, p)) = lat.neighbor(cur.0, cur.1) {
                let q = visit(s, p, &mut seen, &mut comp);
                cur = (s, q);
            }
        }
        if comp.closed {
            out.loops += 1;
        } else {
            out.paths += 1;
        }
        out.components.push(comp);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Port(usize),
    Exit,
}

/// Where the ray leaving `site` through each port comes back.
fn external_pairing(cfg: &MirrorConfig, site: usize) -> [End; 4] {
    let lat = &cfg.lattice;
    let mut ends = [None; 4];
    for p in 0..4 {
        if ends[p].is_some() {
            continue;
        }
        let mut cur = (site, p);
        let end = loop {
            match lat.neighbor(cur.0, cur.1) {
                None => break End::Exit,
                Some((s, q)) if s == site => break End::Port(q),
                Some((s, q)) => cur = (s, cfg.state[s].partner(q)),
            }
        };
        if let End::Port(q) = end {
            ends[q] = Some(End::Port(p));
        }
        ends[p] = Some(end);
    }
    ends.map(|e| e.unwrap_or(End::Exit))
}

/// Loops and paths through `site` if it held `m`, given its surroundings.
fn components_through(ends: &[End; 4], m: Mirror) -> usize {
    let mut dsu = crate::dsu::Dsu::new(4);
    for (p, e) in ends.iter().enumerate() {
        if let End::Port(q) = e {
            dsu.union(p, *q);
        }
        dsu.union(p, m.partner(p));
    }
    dsu.components()
}

/// `ℓ(ξ with site = m) − ℓ(ξ)` by local tracing.
pub fn mirror_delta(cfg: &MirrorConfig, site: usize, m: Mirror) -> i64 {
    let ends = external_pairing(cfg, site);
    components_through(&ends, m) as i64 - components_through(&ends, cfg.state[site]) as i64
}

/// Conditional law of one free site given the rest.
pub fn conditional_law(cfg: &MirrorConfig, params: &MirrorParams, site: usize) -> Result<[f64; 3]> {
    if cfg.lattice.is_frozen(site) {
        return Err(Error::FrozenSite(site));
    }
    let ends = external_pairing(cfg, site);
    let base = components_through(&ends, cfg.state[site]) as i32;
    let mut w = [0.0; 3];
    for (k, m) in Mirror::ALL.iter().enumerate() {
        w[k] = params.weight(*m) * params.n.powi(components_through(&ends, *m) as i32 - base);
    }
    let z: f64 = w.iter().sum();
    Ok(w.map(|x| x / z))
}

/// Resample `site` from its conditional law.
pub fn mirror_heatbath_step<R: Rng + ?Sized>(
    cfg: &mut MirrorConfig,
    params: &MirrorParams,
    site: usize,
    rng: &mut R,
) -> Result<()> {
    let law = conditional_law(cfg, params, site)?;
    let x: f64 = rng.random();
    let m = if x < law[0] {
        Mirror::V
    } else if x < law[0] + law[1] {
        Mirror::H
    } else {
        Mirror::Empty
    };
    cfg.state[site] = if law[2] == 0.0 && m == Mirror::Empty { Mirror::H } else { m };
    Ok(())
}

/// One sweep: as many heat-bath updates as free sites, at uniform sites.
pub fn mirror_sweep<R: Rng + ?Sized>(cfg: &mut MirrorConfig, params: &MirrorParams, rng: &mut R) -> Result<()> {
    let free = cfg.lattice.free_sites();
    for _ in 0..free.len() {
        let s = free[rng.random_range(0..free.len())];
        mirror_heatbath_step(cfg, params, s, rng)?;
    }
    Ok(())
}

/// Largest number of free sites the exact enumeration accepts.
pub const MIRROR_ENUMERATION_GUARD: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorDistribution {
    pub free: Vec<usize>,
    /// Probability of each assignment, free site `k` taking digit `k` in
    /// base 3 (least significant first) with digits ordered as [`Mirror::ALL`].
    pub probs: Vec<f64>,
}

impl MirrorDistribution {
    pub fn assignment(&self, index: usize) -> Vec<Mirror> {
        let mut x = index;
        (0..self.free.len())
            .map(|_| {
                let m = Mirror::ALL[x % 3];
                x /= 3;
                m
            })
            .collect()
    }

    /// Marginal law of the `k`-th free site.
    pub fn marginal(&self, k: usize) -> [f64; 3] {
        let mut m = [0.0; 3];
        for (i, p) in self.probs.iter().enumerate() {
            m[(i / 3usize.pow(k as u32)) % 3] += p;
        }
        m
    }

    pub fn argmax(&self) -> usize {
        (0..self.probs.len()).max_by(|&a, &b| self.probs[a].total_cmp(&self.probs[b])).unwrap_or(0)
    }

    pub fn config(&self, lattice: &MirrorLattice, index: usize) -> MirrorConfig {
        let mut cfg = MirrorConfig::uniform(lattice.clone(), Mirror::V);
        for (k, m) in self.assignment(index).into_iter().enumerate() {
            cfg.state[self.free[k]] = m;
        }
        cfg
    }
}

/// Exact law of the free sites by brute force.
pub fn mirror_enumerate_exact(lattice: &MirrorLattice, params: &MirrorParams) -> Result<MirrorDistribution> {
    let free = lattice.free_sites();
    if free.len() > MIRROR_ENUMERATION_GUARD {
        return Err(Error::Budget(format!("{} free sites exceed {MIRROR_ENUMERATION_GUARD}", free.len())));
    }
    let total = 3usize.pow(free.len() as u32);
    let mut dist = MirrorDistribution { free: free.clone(), probs: Vec::with_capacity(total) };
    let mut cfg = MirrorConfig::uniform(lattice.clone(), Mirror::V);
    for i in 0..total {
        let mut w = 1.0;
        for (k, m) in dist.assignment(i).into_iter().enumerate() {
            cfg.state[free[k]] = m;
            w *= params.weight(m);
        }
        if w > 0.0 {
            w *= params.n.powi(mirror_trace_loops(&cfg).ell() as i32);
        }
        dist.probs.push(w);
    }
    let z: f64 = dist.probs.iter().sum();
    if !(z > 0.0) {
        return Err(Error::InvalidParameter("all configurations have zero weight".into()));
    }
    dist.probs.iter_mut().for_each(|p| *p /= z);
    Ok(dist)
}

/// Faces enclosed by loops that reflect off exactly two horizontal mirrors
/// in one column and nothing else but vertical mirrors.
pub fn surrounded_faces(cfg: &MirrorConfig, trace: &MirrorTrace) -> Vec<(i64, i64)> {
    let lat = &cfg.lattice;
    let mut out = Vec::new();
    for comp in &trace.components {
        if !comp.closed || comp.empty_visits != 0 || comp.h_visits.len() != 2 {
            continue;
        }
        let (a, b) = (comp.h_visits[0], comp.h_visits[1]);
        let ((ca, ra), (cb, rb)) = (lat.site(a.0), lat.site(b.0));
        if ca != cb || a.1 == b.1 {
            continue;
        }
        let (lo, hi) = if a.1 { (ra, rb) } else { (rb, ra) };
        let span = if hi > lo { hi - lo } else { hi - lo + lat.rows };
        let mut r = lo + 1;
        while r < lo + span {
            out.push((ca, if lat.periodic { r.rem_euclid(lat.rows) } else { r }));
            r += 2;
        }
    }
    out
}

/// Fraction of interior black faces inside a trivial loop minus the same
/// fraction for white faces.
pub fn black_white_value(cfg: &MirrorConfig) -> f64 {
    let faces = cfg.lattice.interior_faces();
    let trace = mirror_trace_loops(cfg);
    let inside: std::collections::HashSet<(i64, i64)> = surrounded_faces(cfg, &trace).into_iter().collect();
    let mut hit = [0usize; 2];
    let mut total = [0usize; 2];
    for &(c, r) in &faces {
        let k = FaceColour::of_face(c) as usize;
        total[k] += 1;
        if inside.contains(&(c, r)) {
            hit[k] += 1;
        }
    }
    let frac = |k: usize| if total[k] == 0 { 0.0 } else { hit[k] as f64 / total[k] as f64 };
    frac(FaceColour::Black as usize) - frac(FaceColour::White as usize)
}

pub fn black_white_order(configs: &[MirrorConfig]) -> Result<EstimatorResult> {
    estimate(&configs.iter().map(black_white_value).collect::<Vec<_>>())
}

/// Map a configuration on [`MirrorLattice::chain`] to the continuous model
/// on the torus: column `c` is the edge with left site `c - L`, row `r` is
/// time `rε/2`, horizontal mirrors become bars and empty sites crosses.
pub fn to_link_config(cfg: &MirrorConfig, epsilon: f64) -> Result<LinkConfig> {
    let lat = &cfg.lattice;
    if !lat.periodic || lat.cols % 2 == 0 || lat.cols < 3 {
        return Err(Error::Unsupported("only chain lattices map to the continuous model".into()));
    }
    let l = (lat.cols - 1) / 2;
    let domain = Domain::new(DomainKind::Torus, l, lat.rows as f64 * epsilon / 2.0)?;
    let mut links = Vec::new();
    for (i, &(c, r)) in lat.sites.iter().enumerate() {
        let kind = match cfg.state[i] {
            Mirror::V => continue,
            Mirror::H => LinkKind::Bar,
            Mirror::Empty => LinkKind::Cross,
        };
        if lat.is_frozen(i) {
            return Err(Error::Unsupported("frozen wall sites must hold vertical mirrors".into()));
        }
        links.push(Link { edge: Edge::new(c - l), t: r as f64 * epsilon / 2.0, kind });
    }
    LinkConfig::from_links(domain, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::trace_loops;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rescaled_example() {
        let p = rescaled_params(0.5, 0.1, 2.0).unwrap();
        assert!((p.p_v - 0.9).abs() < 1e-12 && (p.p_h - 0.05).abs() < 1e-12 && (p.p_empty - 0.05).abs() < 1e-12);
        assert_eq!(rescaled_params(0.0, 0.3, 2.0).unwrap().p_empty, 0.0);
    }

    #[test]
    fn params_must_sum_to_one() {
        assert!(MirrorParams::new(0.5, 0.5, 0.1, 2.0).is_err());
    }

    #[test]
    fn single_site_states() {
        // One free site with open boundary: two paths whatever the mirror.
        let lat = MirrorLattice::rect(1, 1).unwrap();
        for m in Mirror::ALL {
            let cfg = MirrorConfig::uniform(lat.clone(), m);
            let t = mirror_trace_loops(&cfg);
            assert_eq!((t.loops, t.paths), (0, 2));
        }
    }

    #[test]
    fn face_surrounded_by_four_mirrors() {
        let lat = MirrorLattice::rect(3, 4).unwrap();
        let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::Empty);
        let s = |c, r| lat.site_at(c, r).unwrap();
        cfg.set(s(1, 1), Mirror::H).unwrap();
        cfg.set(s(1, 3), Mirror::H).unwrap();
        cfg.set(s(0, 2), Mirror::V).unwrap();
        cfg.set(s(2, 2), Mirror::V).unwrap();
        let t = mirror_trace_loops(&cfg);
        assert_eq!(t.loops, 1);
        assert_eq!(surrounded_faces(&cfg, &t), vec![(1, 2)]);
        assert_eq!(FaceColour::of_face(1), FaceColour::Black);
    }

    #[test]
    fn boxed_circuit_closes_inner_rays() {
        for colour in [FaceColour::Black, FaceColour::White] {
            let lat = MirrorLattice::boxed(4, 4, colour).unwrap();
            assert_eq!(lat.free_sites().len(), 4);
            let cfg = MirrorConfig::uniform(lat, Mirror::V);
            let t = mirror_trace_loops(&cfg);
            // Inner rays bounce between the horizontal rows.
            assert!(t.loops >= 1);
        }
    }

    #[test]
    fn text_round_trip() {
        let lat = MirrorLattice::boxed(4, 4, FaceColour::Black).unwrap();
        let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::Empty);
        let f = lat.free_sites();
        cfg.set(f[0], Mirror::H).unwrap();
        let back = MirrorConfig::from_text(lat, &cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn frozen_sites_reject_updates() {
        let lat = MirrorLattice::boxed(4, 4, FaceColour::Black).unwrap();
        let frozen = (0..lat.num_sites()).find(|&i| lat.is_frozen(i)).unwrap();
        let mut cfg = MirrorConfig::uniform(lat, Mirror::V);
        let p = MirrorParams::new(0.4, 0.4, 0.2, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(mirror_heatbath_step(&mut cfg, &p, frozen, &mut rng), Err(Error::FrozenSite(_))));
    }

    #[test]
    fn n_one_conditional_is_prior() {
        let lat = MirrorLattice::rect(4, 4).unwrap();
        let p = MirrorParams::new(0.2, 0.3, 0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::V);
        for _ in 0..5 {
            mirror_sweep(&mut cfg, &p, &mut rng).unwrap();
        }
        for s in lat.free_sites() {
            let law = conditional_law(&cfg, &p, s).unwrap();
            assert!((law[0] - 0.2).abs() < 1e-12 && (law[1] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        let lat = MirrorLattice::rect(3, 4).unwrap();
        let p = MirrorParams::new(0.3, 0.3, 0.4, 3.0).unwrap();
        let d = mirror_enumerate_exact(&lat, &p).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let uniform = mirror_enumerate_exact(&lat, &MirrorParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0).unwrap()).unwrap();
        let q = uniform.probs[0];
        assert!(uniform.probs.iter().all(|&x| (x - q).abs() < 1e-12));
        assert!(matches!(mirror_enumerate_exact(&MirrorLattice::rect(5, 5).unwrap(), &p), Err(Error::Budget(_))));
    }

    #[test]
    fn black_circuit_argmax_surrounds_black_faces() {
        let lat = MirrorLattice::boxed(4, 4, FaceColour::Black).unwrap();
        let p = MirrorParams::new(0.4, 0.4, 0.2, 4.0).unwrap();
        let d = mirror_enumerate_exact(&lat, &p).unwrap();
        let best = d.config(&lat, d.argmax());
        assert!(black_white_value(&best) > 0.0, "{}", best);
    }

    #[test]
    fn chain_lattice_matches_continuum_loops() {
        let lat = MirrorLattice::chain(2, 12).unwrap();
        let p = MirrorParams::new(0.5, 0.3, 0.2, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cfg = MirrorConfig::uniform(lat, Mirror::V);
        for _ in 0..50 {
            mirror_sweep(&mut cfg, &p, &mut rng).unwrap();
            let t = mirror_trace_loops(&cfg);
            let lc = to_link_config(&cfg, 0.1).unwrap();
            // Wall sites contribute one outer path each.
            let walls = cfg.lattice.num_sites() - cfg.lattice.free_sites().len();
            assert_eq!(t.paths, walls);
            assert_eq!(t.loops, trace_loops(&lc).ell());
        }
    }

    #[test]
    fn local_delta_matches_retrace() {
        let lat = MirrorLattice::rect(5, 6).unwrap();
        let p = MirrorParams::new(0.4, 0.3, 0.3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cfg = MirrorConfig::uniform(lat.clone(), Mirror::V);
        for _ in 0..30 {
            mirror_sweep(&mut cfg, &p, &mut rng).unwrap();
            let s = rng.random_range(0..lat.num_sites());
            for m in Mirror::ALL {
                let before = mirror_trace_loops(&cfg).ell() as i64;
                let mut c2 = cfg.clone();
                c2.state[s] = m;
                let after = mirror_trace_loops(&c2).ell() as i64;
                assert_eq!(mirror_delta(&cfg, s, m), after - before);
                assert!((after - before).abs() <= 2);
            }
        }
    }
}
