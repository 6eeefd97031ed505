use super::*;
use crate::geometry::{Domain, DomainKind};
use crate::linkconfig::Link;

fn bar(x: i64, t: f64) -> Link {
    Link::new(x, t, LinkKind::Bar)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn empty_torus_is_all_outside() {
    let d = Domain::new(DomainKind::Torus, 3, 2.0).unwrap();
    let p = SimParams::new(0.5, 2.0).unwrap();
    let r = build_clusters(&LinkConfig::empty(d), &p).unwrap();
    assert!(r.trivial.is_empty());
    assert!(r.clusters.is_empty());
    assert!(close(r.vol_outside(), 2.0 * 3.0 * 2.0));
    assert!(r.out_links.is_empty());
}

#[test]
fn isolated_dual_loop_on_torus() {
    let d = Domain::new(DomainKind::Torus, 2, 1.0).unwrap();
    let cfg = LinkConfig::from_links(d, [bar(1, 0.2), bar(1, 0.5)]).unwrap();
    let all_small = SimParams::new(0.5, 2.0).unwrap();
    let r = build_clusters(&cfg, &all_small).unwrap();
    assert_eq!(r.trivial.len(), 2);
    assert_eq!(r.clusters.len(), 1);
    assert_eq!(r.clusters[0].parity, Parity::Dual);
    assert!(close(r.clusters[0].volume, 2.0));
    assert!(close(r.vol_outside(), 2.0));

    // Cutoff 1/(κn) = 0.5 separates heights 0.3 and 0.7.
    let p = all_small.with_kappa(1.0).unwrap();
    let r = build_clusters(&cfg, &p).unwrap();
    let heights: Vec<(f64, bool)> = r.trivial.iter().map(|t| (t.height, t.small)).collect();
    assert!(heights.iter().any(|&(h, s)| close(h, 0.3) && s));
    assert!(heights.iter().any(|&(h, s)| close(h, 0.7) && !s));
    assert_eq!(r.clusters.len(), 1);
    assert!(close(r.clusters[0].volume, 0.6));
    assert!(close(r.vol_outside(), 3.4));
    assert_eq!(r.out_links.len(), 2);
    assert_eq!(r.covered.len(), 2);
    assert_eq!(r.tall_outside(), 1);
}

#[test]
fn different_parities_do_not_join() {
    let d = Domain::new(DomainKind::Torus, 2, 4.0).unwrap();
    let cfg = LinkConfig::from_links(d, [bar(0, 1.0), bar(0, 1.5), bar(1, 1.7), bar(1, 2.2)]).unwrap();
    let p = SimParams::new(0.5, 2.0).unwrap().with_kappa(0.5).unwrap();
    let r = build_clusters(&cfg, &p).unwrap();
    let small: Vec<&TrivialLoop> = r.trivial.iter().filter(|t| t.small).collect();
    assert_eq!(small.len(), 2);
    assert_eq!(r.components.len(), 2);
    assert_eq!(r.clusters.len(), 2);
}

/// Primal rectangle L = 3, β = 10, with a ring of small primal loops
/// around a non-trivial loop.
fn ring() -> (LinkConfig, SimParams) {
    let d = Domain::new(DomainKind::PrimalRect, 3, 10.0).unwrap();
    let links = [
        bar(-2, 0.5),
        bar(-2, 4.5),
        bar(2, 0.5),
        bar(2, 4.5),
        bar(0, 1.0),
        bar(0, 2.0),
        Link::new(0, 2.5, LinkKind::Cross),
        bar(0, 3.0),
        bar(0, 4.0),
    ];
    (LinkConfig::from_links(d, links).unwrap(), SimParams::new(0.5, 2.0).unwrap().with_kappa(0.1).unwrap())
}

#[test]
fn enclosed_region_is_filled() {
    let (cfg, p) = ring();
    let r = build_clusters(&cfg, &p).unwrap();
    assert_eq!(r.clusters.len(), 1);
    assert_eq!(r.clusters[0].parity, Parity::Primal);
    assert!(close(r.clusters[0].volume, 26.0));
    assert!(close(r.vol_outside(), 6.0 * 10.0 - 26.0));
    let cross = cfg.links().position(|l| l.kind == LinkKind::Cross).unwrap();
    assert_eq!(r.placement[cross], Placement::Inside(0));
    let lp = r.decomp.interval_loop[r.decomp.interval_at_end(cross, crate::loops::End::ALL[0]).unwrap()];
    assert_eq!(r.loop_region[lp], Some(0));
    // Three real bottom bars and three fixed bottom bars.
    assert_eq!(r.out_links.len(), 6);
    assert_eq!(r.covered.len(), 6);
    assert!(r.exposed.is_empty());
    assert_eq!(r.tall_outside(), 3);
}

#[test]
fn boundary_component_of_hole_and_bottom() {
    let (cfg, p) = ring();
    let r = build_clusters(&cfg, &p).unwrap();
    let hole = boundary_component(&r, (0, 2.7)).unwrap();
    assert!(close(hole.area, 2.0));
    assert!(close(hole.vertical_length, 2.0));
    assert!(close(hole.horizontal_length, 4.0));
    assert_eq!(hole.crossings, 2);
    assert!(close(hole.perimeter, 6.0));
    let below = boundary_component(&r, (0, -2.0)).unwrap();
    assert!(close(below.area, 34.0));
    let on_loop = boundary_component(&r, (-2, 2.0)).unwrap();
    assert!(on_loop.cells.is_empty());
    assert_eq!(on_loop.perimeter, 0.0);
}

#[test]
fn block_outside_covers_outside() {
    let (cfg, p) = ring();
    let r = build_clusters(&cfg, &p.with_h(2.0).unwrap()).unwrap();
    let bo = block_outside(&r).unwrap();
    // Block rows have height 1; the outside is everything below t = 1 plus
    // the bottom rows of the side columns.
    assert_eq!(bo.outside_components, 1);
    assert_eq!(bo.block_components, 1);
    assert!(!bo.blocks.is_empty());
    assert!(bo.num_links <= cfg.len());
}

fn dual_loop() -> (LinkConfig, SimParams) {
    let d = Domain::new(DomainKind::PrimalRect, 3, 10.0).unwrap();
    let cfg = LinkConfig::from_links(d, [bar(1, 0.3), bar(1, 1.1)]).unwrap();
    (cfg, SimParams::new(0.5, 2.0).unwrap().with_kappa(0.1).unwrap())
}

#[test]
fn repair_moves_dual_cluster_left() {
    let (cfg, p) = dual_loop();
    let out = repair(&cfg, &p).unwrap();
    assert!(out.omega_bar.links().all(|l| l.edge.x_left == 0 && l.kind == LinkKind::Bar));
    assert_eq!(out.eta_bar, vec![0, 1]);
    assert_eq!(out.checks.delta_ell, 2);
    assert_eq!(out.checks.exposed, 6);
    assert_eq!(out.checks.exposed_bar, 2);
    assert!(out.checks.all_hold(), "{:?}", out.checks);
    assert!(close(out.checks.vol_outside, out.checks.vol_outside_bar));
}

#[test]
fn preimages_of_dual_loop() {
    let (cfg, p) = dual_loop();
    let out = repair(&cfg, &p).unwrap();
    let fast = count_preimages(&out, &p, Some(&cfg)).unwrap();
    let naive = count_preimages_naive(&out, &p).unwrap();
    // Unshifting makes the loop above the bars small, which changes η.
    assert_eq!(fast.preimages, 1);
    assert_eq!(naive.preimages, 1);
    assert!(fast.contains_target);
    assert!(fast.preimages as f64 <= fast.bound);
}

#[test]
fn repair_rejects_torus() {
    let d = Domain::new(DomainKind::Torus, 2, 1.0).unwrap();
    let p = SimParams::new(0.5, 2.0).unwrap();
    assert!(matches!(repair(&LinkConfig::empty(d), &p), Err(Error::Unsupported(_))));
}

#[test]
fn cell_grid_slabs() {
    let d = Domain::new(DomainKind::Torus, 1, 2.0).unwrap();
    let g = CellGrid::from_times(d, [0.5, 1.5]);
    assert_eq!(g.num_slabs(), 2);
    assert!(close(g.slab_len(1), 1.0));
    assert_eq!(g.slab_at(0.1), 1);
    assert_eq!(g.slab_at(1.0), 0);
    assert_eq!(g.slabs_between(1, 1).len(), 2);
    let r = Domain::new(DomainKind::PrimalRect, 1, 2.0).unwrap();
    let g = CellGrid::from_times(r, [0.0]);
    assert_eq!(g.num_slabs(), 2);
    assert_eq!(g.below_cut(0), None);
    assert_eq!(g.above_cut(2), None);
}
