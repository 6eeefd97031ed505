//! Plain-text run configuration: `key = value` lines, `[section]` headers
//! or dotted keys, `#` comments. Dotted keys ignore the current section.

use std::str::FromStr;

use dimerloop::mirror::{FaceColour, MirrorParams};
use dimerloop::sampler::Schedule;
use dimerloop::{Domain, DomainKind, SimParams};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub n: f64,
    pub u: f64,
    pub kappa: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeConfig {
    pub kind: DomainKind,
    pub l: i64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcConfig {
    pub sweeps: u64,
    pub burnin: u64,
    pub thin: u64,
    pub seed: u64,
    pub chains: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerimeterConfig {
    pub site: i64,
    pub time: f64,
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorConfig {
    pub width: i64,
    pub height: i64,
    pub colour: FaceColour,
    pub p_v: f64,
    pub p_h: f64,
    pub p_empty: f64,
    pub n: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    /// Samples whose preimages are enumerated.
    pub preimages: usize,
    /// Largest `|ω̄^out|` sent to the enumeration.
    pub max_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesConfig {
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    pub mcmc: McmcConfig,
    pub perimeter: PerimeterConfig,
    pub mirror: MirrorConfig,
    pub audit: AuditConfig,
    pub series: SeriesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig { n: 2.0, u: 0.5, kappa: 0.0, h: 1.0 },
            lattice: LatticeConfig { kind: DomainKind::Torus, l: 2, beta: 1.0 },
            mcmc: McmcConfig { sweeps: 1000, burnin: 100, thin: 1, seed: 1, chains: 1 },
            perimeter: PerimeterConfig { site: 0, time: 0.0, grid: 40 },
            mirror: MirrorConfig {
                width: 10,
                height: 10,
                colour: FaceColour::Black,
                p_v: 0.4,
                p_h: 0.4,
                p_empty: 0.2,
                n: 8.0,
            },
            audit: AuditConfig { preimages: 0, max_out: 8 },
            series: SeriesConfig { k_max: 20 },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Validation(format!("bad value '{value}' for key '{key}'")))
}

impl RunConfig {
    pub fn parse_text(text: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected 'key = value', got '{line}'", i + 1)))?;
            let key = if section.is_empty() || k.contains('.') { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            cfg.set(&key, v).map_err(|e| CliError::Validation(format!("config line {}: {}", i + 1, e.message())))?;
        }
        Ok(cfg)
    }

    /// Apply one `section.key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "model.n" => self.model.n = parse(key, v)?,
            "model.u" => self.model.u = parse(key, v)?,
            "model.kappa" => self.model.kappa = parse(key, v)?,
            "model.h" => self.model.h = parse(key, v)?,
            "lattice.kind" => {
                self.lattice.kind = v.parse().map_err(|e: dimerloop::Error| CliError::Validation(e.to_string()))?
            }
            "lattice.L" | "lattice.l" => self.lattice.l = parse(key, v)?,
            "lattice.beta" => self.lattice.beta = parse(key, v)?,
            "mcmc.sweeps" => self.mcmc.sweeps = parse(key, v)?,
            "mcmc.burnin" => self.mcmc.burnin = parse(key, v)?,
            "mcmc.thin" => self.mcmc.thin = parse(key, v)?,
            "mcmc.seed" => self.mcmc.seed = parse(key, v)?,
            "mcmc.chains" => self.mcmc.chains = parse(key, v)?,
            "perimeter.site" => self.perimeter.site = parse(key, v)?,
            "perimeter.time" => self.perimeter.time = parse(key, v)?,
            "perimeter.grid" => self.perimeter.grid = parse(key, v)?,
            "mirror.width" => self.mirror.width = parse(key, v)?,
            "mirror.height" => self.mirror.height = parse(key, v)?,
            "mirror.colour" | "mirror.color" => {
                self.mirror.colour = match v.to_ascii_lowercase().as_str() {
                    "black" => FaceColour::Black,
                    "white" => FaceColour::White,
                    _ => return Err(CliError::Validation(format!("mirror colour must be black or white, got '{v}'"))),
                }
            }
            "mirror.p_v" => self.mirror.p_v = parse(key, v)?,
            "mirror.p_h" => self.mirror.p_h = parse(key, v)?,
            "mirror.p_empty" => self.mirror.p_empty = parse(key, v)?,
            "mirror.n" => self.mirror.n = parse(key, v)?,
            "audit.preimages" => self.audit.preimages = parse(key, v)?,
            "audit.max_out" => self.audit.max_out = parse(key, v)?,
            "series.k_max" => self.series.k_max = parse(key, v)?,
            _ => return Err(CliError::Validation(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        Ok(Domain::new(self.lattice.kind, self.lattice.l, self.lattice.beta)?)
    }

    pub fn params(&self) -> Result<SimParams, CliError> {
        let m = &self.model;
        Ok(SimParams { u: m.u, n: m.n, kappa: m.kappa, h: m.h }.validated()?)
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        if self.mcmc.thin == 0 || self.mcmc.chains == 0 {
            return Err(CliError::Validation("mcmc.thin and mcmc.chains must be at least 1".into()));
        }
        Ok(Schedule { burnin: self.mcmc.burnin, sweeps: self.mcmc.sweeps, thin: self.mcmc.thin })
    }

    pub fn mirror_params(&self) -> Result<MirrorParams, CliError> {
        let m = &self.mirror;
        Ok(MirrorParams::new(m.p_v, m.p_h, m.p_empty, m.n)?)
    }

    /// `n` as a local dimension, for commands that build operators.
    pub fn integer_n(&self) -> Result<usize, CliError> {
        let n = self.model.n;
        if n >= 1.0 && n.fract() == 0.0 {
            Ok(n as usize)
        } else {
            Err(CliError::Validation(format!("this command needs an integer n ≥ 1, got {n}")))
        }
    }
}
