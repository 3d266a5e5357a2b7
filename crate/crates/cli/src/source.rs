use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use slowcone::cone::QuadraticCone;
use slowcone::dynsys::{get_builtin, parse_config, BoundSystem, BoxDomain, SweepSection, SystemDef};
use slowcone::integrate::SolverOptions;
use slowcone::slowfast::SlowFastSystem;

/// Largest accepted singular-perturbation parameter.
pub const EPS_MAX: f64 = 0.1;

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Built-in system: paper-4d, paper-3d-limit or circle.
    #[arg(long)]
    pub builtin: Option<String>,
    /// TOML system configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// A system ready to run, with everything the commands need.
pub struct Resolved {
    pub name: String,
    pub def: SystemDef,
    /// The full field (slow time for slow-fast systems) at the chosen ε.
    pub field: BoundSystem,
    pub slow_fast: Option<SlowFastSystem>,
    /// Orders the slow variables of a slow-fast system, all variables otherwise.
    pub cone: Option<QuadraticCone>,
    pub domain: Option<BoxDomain>,
    pub solver: SolverOptions,
    pub sweep: SweepSection,
}

impl Resolved {
    pub fn load(src: &SourceArgs, eps: Option<f64>) -> Result<Self> {
        let mut r = match (&src.builtin, &src.config) {
            (Some(name), None) => {
                let b = get_builtin(name)?;
                Resolved {
                    name: name.clone(),
                    field: b.system.bind_defaults()?,
                    def: b.system,
                    slow_fast: b.slow_fast,
                    cone: b.cone,
                    domain: b.domain,
                    solver: SolverOptions::default(),
                    sweep: SweepSection::default(),
                }
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let cfg = parse_config(&text).with_context(|| format!("parsing {}", path.display()))?;
                let n = cfg.system.dim() - cfg.slow_fast.as_ref().map_or(0, |s| s.fast_dim());
                let cone = match &cfg.cone {
                    Some(c) => Some(QuadraticCone::from_row_major(n, &c.matrix)?),
                    None => None,
                };
                let mut solver = SolverOptions::with_tolerances(cfg.solver.rel_tol, cfg.solver.abs_tol);
                solver.max_steps = cfg.solver.max_steps;
                let field = match &cfg.slow_fast {
                    Some(sf) if sf.eps() > 0.0 => sf.full_field()?,
                    _ => cfg.system.bind_defaults().or_else(|_| {
                        let zeros: BTreeMap<String, f64> =
                            cfg.system.param_names.iter().map(|p| (p.clone(), 0.0)).collect();
                        cfg.system.bind(&zeros)
                    })?,
                };
                Resolved {
                    name: cfg.system.name.clone(),
                    field,
                    def: cfg.system,
                    slow_fast: cfg.slow_fast,
                    cone,
                    domain: cfg.domain,
                    solver,
                    sweep: cfg.sweep,
                }
            }
            _ => bail!("give exactly one of --builtin or --config"),
        };
        match (&r.slow_fast, eps) {
            (Some(sf), e) => {
                let e = e.unwrap_or(sf.eps());
                if !(e > 0.0 && e <= EPS_MAX) {
                    bail!("--eps must lie in (0, {EPS_MAX}], got {e}");
                }
                let sf = sf.with_eps(e)?;
                r.field = sf.full_field()?;
                r.slow_fast = Some(sf);
            }
            (None, Some(_)) => bail!("--eps applies only to slow-fast systems"),
            (None, None) => {}
        }
        if let Some(sf) = &r.slow_fast {
            r.solver = sf.slow_time_options(&r.solver);
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.def.dim()
    }

    pub fn eps(&self) -> Option<f64> {
        self.slow_fast.as_ref().map(SlowFastSystem::eps)
    }

    pub fn domain(&self) -> Result<&BoxDomain> {
        self.domain
            .as_ref()
            .with_context(|| format!("system `{}` declares no domain box", self.name))
    }

    pub fn cone(&self) -> Result<&QuadraticCone> {
        self.cone
            .as_ref()
            .with_context(|| format!("system `{}` declares no cone", self.name))
    }

    pub fn slow_fast(&self) -> Result<&SlowFastSystem> {
        self.slow_fast
            .as_ref()
            .with_context(|| format!("system `{}` is not slow-fast", self.name))
    }

    pub fn parse_point(&self, text: &str) -> Result<Vec<f64>> {
        let x = parse_list(text)?;
        if x.len() != self.dim() {
            bail!("--ic needs {} comma-separated values, got {}", self.dim(), x.len());
        }
        Ok(x)
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("`{}` is not a number", s.trim()))
        })
        .collect()
}
