#![allow(dead_code)]

use dimerloop::{Domain, DomainKind, Edge, Link, LinkConfig, LinkKind};
use rand::Rng;

/// Loop count by union-find over the vertical intervals cut out by the
/// link times at each site. Shares no code with the tracer.
pub fn brute_loop_count(cfg: &LinkConfig) -> usize {
    let d = cfg.domain();
    let sites: Vec<i64> = d.sites().collect();
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); sites.len()];
    for link in cfg.links() {
        for x in [link.edge.x_left, link.edge.right()] {
            events[(x - d.site_min()) as usize].push(link.t);
        }
    }
    for ev in &mut events {
        ev.sort_by(f64::total_cmp);
    }
    // Interval j at a site ends at event j (periodic: j = k wraps to 0).
    let mut base = Vec::with_capacity(sites.len());
    let mut total = 0;
    for ev in &events {
        base.push(total);
        total += if d.is_periodic() { ev.len().max(1) } else { ev.len() + 1 };
    }
    let below = |s: usize, t: f64| -> usize {
        let j = events[s].iter().position(|&e| e == t).expect("event present");
        base[s] + j
    };
    let above = |s: usize, t: f64| -> usize {
        let j = events[s].iter().position(|&e| e == t).expect("event present");
        if d.is_periodic() {
            base[s] + (j + 1) % events[s].len()
        } else {
            base[s] + j + 1
        }
    };
    let mut dsu = UnionFind((0..total).collect());
    for link in cfg.links() {
        let a = (link.edge.x_left - d.site_min()) as usize;
        let b = a + 1;
        match link.kind {
            LinkKind::Bar => {
                dsu.union(below(a, link.t), below(b, link.t));
                dsu.union(above(a, link.t), above(b, link.t));
            }
            LinkKind::Cross => {
                dsu.union(below(a, link.t), above(b, link.t));
                dsu.union(above(a, link.t), below(b, link.t));
            }
        }
    }
    if !d.is_periodic() {
        for e in d.edges().filter(|&e| d.is_boundary_edge(e)) {
            let a = (e.x_left - d.site_min()) as usize;
            let b = a + 1;
            dsu.union(base[a], base[b]);
            dsu.union(base[a] + events[a].len(), base[b] + events[b].len());
        }
    }
    dsu.roots()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }

    fn roots(&mut self) -> usize {
        (0..self.0.len()).filter(|&i| self.find(i) == i).count()
    }
}

pub fn domain_for(kind: DomainKind, l: i64, beta: f64) -> Domain {
    Domain::new(kind, l, beta).expect("valid domain")
}

/// A small domain of the given kind with `L ∈ {1, 2, 3}` compatible with it.
pub fn small_domain<R: Rng + ?Sized>(kind: DomainKind, rng: &mut R) -> Domain {
    let l = match kind {
        DomainKind::Torus => rng.random_range(1..=3),
        DomainKind::PrimalRect => [1, 3][rng.random_range(0..2)],
        DomainKind::DualRect => 2,
    };
    domain_for(kind, l, rng.random_range(0.5..3.0))
}

/// Up to `max_links` uniformly placed links; colliding draws are skipped.
pub fn random_config<R: Rng + ?Sized>(domain: Domain, max_links: usize, rng: &mut R) -> LinkConfig {
    let mut cfg = LinkConfig::empty(domain);
    let k = rng.random_range(0..=max_links);
    for _ in 0..k {
        let e = domain.edge_at(rng.random_range(0..domain.num_edges()));
        let t = rng.random_range(domain.t_min()..domain.t_max());
        let kind = if rng.random_bool(0.5) { LinkKind::Cross } else { LinkKind::Bar };
        let _ = cfg.insert(Link { edge: e, t, kind });
    }
    cfg
}

pub fn bar(x: i64, t: f64) -> Link {
    Link { edge: Edge::new(x), t, kind: LinkKind::Bar }
}

pub fn cross(x: i64, t: f64) -> Link {
    Link { edge: Edge::new(x), t, kind: LinkKind::Cross }
}

pub fn kinds() -> [DomainKind; 3] {
    [DomainKind::Torus, DomainKind::PrimalRect, DomainKind::DualRect]
}

/// `|a - b| / sqrt(se_a² + se_b²)`. A combined error below 1e-12 is
/// rounding on a constant series: zero when the values agree to 1e-9 and
/// infinite otherwise.
pub fn sigma_distance(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let se = (se_a * se_a + se_b * se_b).sqrt();
    if se > 1e-12 {
        (a - b).abs() / se
    } else if (a - b).abs() < 1e-9 {
        0.0
    } else {
        f64::INFINITY
    }
}
