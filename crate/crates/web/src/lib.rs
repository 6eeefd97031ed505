//! Browser demo: run the loop sampler, draw the current configuration and
//! report a few observables.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dimerloop::clusters::build_clusters;
use dimerloop::observables::dimer_psi;
use dimerloop::sampler::Chain;
use dimerloop::{Domain, DomainKind, SimParams};
use dimerloop_cli::render::render_svg;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct Stats {
    sweeps: u64,
    links: usize,
    ell: usize,
    psi: f64,
    clusters: usize,
    vol_outside: f64,
}

#[wasm_bindgen]
pub struct Lab {
    chain: Chain,
}

#[wasm_bindgen]
impl Lab {
    /// `kind` is `torus`, `primal-rect` or `dual-rect`.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, l: i32, beta: f64, u: f64, n: f64, kappa: f64, seed: u32) -> Result<Lab, JsValue> {
        let kind: DomainKind = kind.parse().map_err(js_err)?;
        let domain = Domain::new(kind, l as i64, beta).map_err(js_err)?;
        let params = SimParams::new(u, n).and_then(|p| p.with_kappa(kappa)).map_err(js_err)?;
        Ok(Lab { chain: Chain::from_empty(domain, params, seed as u64, 0) })
    }

    pub fn sweep(&mut self, count: u32) -> Result<(), JsValue> {
        for _ in 0..count {
            self.chain.sweep().map_err(js_err)?;
        }
        Ok(())
    }

    pub fn svg(&self, clusters: bool) -> Result<String, JsValue> {
        let report = if clusters { Some(build_clusters(self.chain.cfg(), self.chain.params()).map_err(js_err)?) } else { None };
        Ok(render_svg(self.chain.cfg(), report.as_ref()))
    }

    /// JSON object with sweep count, link and loop numbers, ψ and the
    /// cluster outline.
    pub fn stats(&self) -> Result<String, JsValue> {
        let params = self.chain.params();
        let r = build_clusters(self.chain.cfg(), params).map_err(js_err)?;
        let s = Stats {
            sweeps: self.chain.sweeps(),
            links: self.chain.cfg().len(),
            ell: self.chain.ell(),
            psi: dimer_psi(self.chain.cfg(), params),
            clusters: r.clusters.len(),
            vol_outside: r.vol_outside(),
        };
        serde_json::to_string(&s).map_err(js_err)
    }
}
