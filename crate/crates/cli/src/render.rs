//! SVG drawing of a link configuration: sites run left to right, time runs
//! upwards, primal columns are grey and dual columns white.

use std::fmt::Write;

use dimerloop::clusters::{ClusterReport, NONE};
use dimerloop::{LinkConfig, LinkKind, Parity};

const COL: f64 = 40.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 20.0;

struct Frame {
    x0: f64,
    t_max: f64,
    beta: f64,
}

impl Frame {
    fn x(&self, site: f64) -> f64 {
        MARGIN + (site - self.x0) * COL
    }

    fn y(&self, t: f64) -> f64 {
        MARGIN + (self.t_max - t) / self.beta * HEIGHT
    }
}

fn rect(s: &mut String, x: f64, y: f64, w: f64, h: f64, style: &str) {
    let _ = writeln!(s, r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" {style}/>"#);
}

fn line(s: &mut String, a: (f64, f64), b: (f64, f64), style: &str) {
    let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" {style}/>"#, a.0, a.1, b.0, b.1);
}

fn glyph(s: &mut String, f: &Frame, x_left: i64, t: f64, kind: LinkKind, style: &str) {
    let (a, b, y) = (f.x(x_left as f64), f.x(x_left as f64 + 1.0), f.y(t));
    match kind {
        LinkKind::Bar => {
            line(s, (a, y - 2.0), (b, y - 2.0), style);
            line(s, (a, y + 2.0), (b, y + 2.0), style);
        }
        LinkKind::Cross => {
            line(s, (a, y - 5.0), (b, y + 5.0), style);
            line(s, (a, y + 5.0), (b, y - 5.0), style);
        }
    }
}

/// Deterministic SVG document; clusters of `report` are shaded green
/// (primal) and orange (dual).
pub fn render_svg(cfg: &LinkConfig, report: Option<&ClusterReport>) -> String {
    let d = cfg.domain();
    let f = Frame { x0: d.site_min() as f64 - 0.5, t_max: d.t_max(), beta: d.beta() };
    let width = d.num_sites() as f64 * COL + 2.0 * MARGIN;
    let height = HEIGHT + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    rect(&mut s, 0.0, 0.0, width, height, r#"fill="white""#);
    for e in d.edges() {
        if e.parity() == Parity::Primal {
            let x = f.x(e.x_left as f64);
            rect(&mut s, x, MARGIN, COL, HEIGHT, r##"fill="#d9d9d9""##);
        }
    }
    if let Some(r) = report {
        let g = &r.grid;
        for cell in 0..g.len() {
            let owner = r.owner[cell];
            if owner == NONE {
                continue;
            }
            let fill = match r.clusters[owner as usize].parity {
                Parity::Primal => "#4caf50",
                Parity::Dual => "#ff9800",
            };
            let (site_idx, slab) = g.site_slab(cell);
            let x = f.x(d.site_min() as f64 + site_idx as f64 - 0.5);
            let (lo, hi) = g.slab_bounds(slab);
            let style = format!(r#"fill="{fill}" fill-opacity="0.45""#);
            let mut piece = |lo: f64, hi: f64| rect(&mut s, x, f.y(hi), COL, f.y(lo) - f.y(hi), &style);
            if hi > d.t_max() {
                piece(lo, d.t_max());
                piece(d.t_min(), hi - d.beta());
            } else {
                piece(lo, hi);
            }
        }
    }
    for x in d.sites() {
        let px = f.x(x as f64);
        line(&mut s, (px, MARGIN), (px, MARGIN + HEIGHT), r#"stroke="black" stroke-width="1""#);
    }
    if !d.is_periodic() {
        for e in d.edges().filter(|e| d.is_boundary_edge(*e)) {
            for t in [d.t_min(), d.t_max()] {
                glyph(&mut s, &f, e.x_left, t, LinkKind::Bar, r#"stroke="black" stroke-width="1.5" stroke-dasharray="3 2""#);
            }
        }
    }
    for l in cfg.links() {
        let colour = match l.kind {
            LinkKind::Bar => "#1565c0",
            LinkKind::Cross => "#c62828",
        };
        glyph(&mut s, &f, l.edge.x_left, l.t, l.kind, &format!(r#"stroke="{colour}" stroke-width="2""#));
    }
    s.push_str("</svg>\n");
    s
}
