use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use slowcone::certify::{
    algebraic_certificate, dynamic_certificate, eventual_tstar, sample_pairs, CooperativityReport, LambdaSpec,
    ALGEBRAIC_MARGIN, DYNAMIC_MARGIN,
};
use slowcone::dynsys::{parse_config, parse_system, BoundSystem, BoxDomain, VectorField};
use slowcone::integrate::{flow, Trajectory};
use slowcone::limitsets::{classify_omega, find_equilibria, genericity_sweep, ClassifyOptions, OmegaClassification};

use crate::source::Resolved;

pub const SCHEMA_VERSION: u32 = 1;
const CERTIFY_TIMES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Outcome of a command: the process exit code.
pub type Exit = i32;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    system: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    report: T,
}

fn emit<T: Serialize>(r: &Resolved, command: &str, report: T, out: Option<&Path>, file: &str) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        system: &r.name,
        eps: r.eps(),
        report,
    };
    let text = serde_json::to_string_pretty(&env)? + "\n";
    match out {
        Some(dir) => write_file(&dir.join(file), text.as_bytes()),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_csv_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(r: &Resolved, ic: &str, t_end: f64, dense: Option<usize>, out: Option<&Path>) -> Result<Exit> {
    let x0 = r.parse_point(ic)?;
    if !(t_end > 0.0) {
        bail!("--t must be positive");
    }
    let traj = flow(&r.field, &x0, t_end, &r.solver)?;
    let names = &r.def.state_names;
    match out {
        Some(dir) => {
            let mut w = create(&dir.join("trajectory.csv"))?;
            traj.write_csv(&mut w, names, dense)?;
            w.flush()?;
            let summary = json!({
                "initial_state": x0,
                "final_time": traj.final_time(),
                "final_state": traj.final_state(),
                "accepted_steps": traj.stats.steps,
                "rejected_steps": traj.stats.rejected,
                "evaluations": traj.stats.nfev,
            });
            emit(r, "simulate", summary, Some(dir), "simulate.json")?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            traj.write_csv(&mut w, names, dense)?;
            w.flush()?;
        }
    }
    Ok(0)
}

/// The field the cone orders: the reduced flow for slow-fast systems.
fn ordered_field(r: &Resolved) -> Result<(Box<dyn VectorField>, BoxDomain)> {
    let domain = r.domain()?;
    match &r.slow_fast {
        Some(sf) => Ok((Box::new(sf.reduced_system()?), domain.head(sf.slow_dim()))),
        None => Ok((Box::new(r.field.clone()), domain.clone())),
    }
}

#[derive(Serialize)]
struct CertifyBundle {
    pass: bool,
    algebraic: Option<CooperativityReport>,
    dynamic: Option<CooperativityReport>,
    eventual: Option<CooperativityReport>,
}

#[allow(clippy::too_many_arguments)]
pub fn certify(
    r: &Resolved,
    lambda: &str,
    mode: &str,
    grid: usize,
    pairs: usize,
    directions: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<Exit> {
    let bundle = certify_bundle(r, lambda, mode, grid, pairs, directions, seed)?;
    let code = if bundle.pass { 0 } else { 2 };
    emit(r, "certify", &bundle, out, "certify.json")?;
    Ok(code)
}

fn certify_bundle(
    r: &Resolved,
    lambda: &str,
    mode: &str,
    grid: usize,
    n_pairs: usize,
    directions: usize,
    seed: u64,
) -> Result<CertifyBundle> {
    let cone = r.cone()?;
    let (field, domain) = ordered_field(r)?;
    let want = |m: &str| mode == m || mode == "all";
    if !["algebraic", "dynamic", "eventual", "all"].contains(&mode) {
        bail!("--mode must be algebraic, dynamic, eventual or all");
    }
    let algebraic = if want("algebraic") {
        let scope_sys = reduced_scope(r)?;
        let spec = LambdaSpec::parse(lambda, &scope_sys)?;
        Some(algebraic_certificate(field.as_ref(), cone, &domain, grid, &spec, ALGEBRAIC_MARGIN)?)
    } else {
        None
    };
    let pairs = sample_pairs(&domain, n_pairs, seed);
    let dynamic = if want("dynamic") {
        Some(dynamic_certificate(
            field.as_ref(),
            cone,
            &pairs,
            &CERTIFY_TIMES,
            directions,
            seed,
            &r.solver_slow(),
            DYNAMIC_MARGIN,
        )?)
    } else {
        None
    };
    let eventual = match (&r.slow_fast, want("eventual")) {
        (Some(sf), true) => {
            let g = sf.slow_manifold_field();
            let mut rep = eventual_tstar(&g, cone, &pairs, &CERTIFY_TIMES, directions, seed, &r.solver_slow(), DYNAMIC_MARGIN)?;
            rep.perturbation_size = Some(slowcone::certify::perturbation_size(field.as_ref(), &g, &domain, 200, seed)?);
            Some(rep)
        }
        _ => None,
    };
    let pass = [&algebraic, &dynamic, &eventual]
        .iter()
        .all(|rep| rep.as_ref().is_none_or(|x| x.pass));
    Ok(CertifyBundle {
        pass,
        algebraic,
        dynamic,
        eventual,
    })
}

/// A system whose scope names the variables λ may use.
fn reduced_scope(r: &Resolved) -> Result<BoundSystem> {
    match &r.slow_fast {
        Some(sf) => match sf.reduced_system()?.system_def() {
            Some(def) => Ok(def.bind_defaults()?),
            None => {
                let n = sf.slow_dim();
                let def = slowcone::dynsys::SystemDef {
                    name: r.name.clone(),
                    state_names: r.def.state_names[..n].to_vec(),
                    param_names: r.def.param_names.clone(),
                    param_defaults: r.def.param_defaults.clone(),
                    components: r.def.components[..n].to_vec(),
                };
                let mut b = sf.full_field()?;
                b.def = def;
                Ok(b)
            }
        },
        None => Ok(r.field.clone()),
    }
}

impl Resolved {
    /// Solver options for fields on the slow variables only.
    fn solver_slow(&self) -> slowcone::integrate::SolverOptions {
        let mut o = self.solver.clone();
        o.abs_tol_components = None;
        o
    }
}

pub fn manifold(r: &Resolved, grid: usize, out: Option<&Path>) -> Result<Exit> {
    let sf = r.slow_fast()?;
    let slow_box = r.domain()?.head(sf.slow_dim());
    let stability = sf.certify_fast_stability(&slow_box, grid)?;
    let rows = sf.manifold_table(&slow_box, grid)?;
    let n = sf.slow_dim();
    let names = &r.def.state_names;
    let mut header: Vec<String> = names[..n].to_vec();
    header.extend(names[n..].iter().map(|y| format!("h0_{y}")));
    header.extend(names[n..].iter().map(|y| format!("h1_{y}")));
    header.extend(["defect0", "defect1", "spectral_abscissa"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let flat = rows.iter().map(|row| {
        let mut v = row.x.clone();
        v.extend(&row.h0);
        v.extend(&row.h1);
        v.extend([row.defect0, row.defect1, row.spectral_abscissa]);
        v
    });
    match out {
        Some(dir) => {
            write_csv_rows(&dir.join("manifold.csv"), &header, flat)?;
            let worst0 = rows.iter().map(|r| r.defect0).fold(0.0, f64::max);
            let worst1 = rows.iter().map(|r| r.defect1).fold(0.0, f64::max);
            let report = json!({
                "fast_stability": stability,
                "grid_points": rows.len(),
                "max_defect_order0": worst0,
                "max_defect_order1": worst1,
            });
            emit(r, "manifold", report, Some(dir), "manifold.json")?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            writeln!(w, "{}", header.join(","))?;
            for row in flat {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            w.flush()?;
        }
    }
    Ok(if stability.pass { 0 } else { 2 })
}

fn classify_options(r: &Resolved) -> Result<ClassifyOptions> {
    let mut o = match &r.slow_fast {
        Some(sf) => ClassifyOptions::for_slow_fast(sf),
        None => ClassifyOptions::default(),
    };
    o.transient = r.sweep.transient;
    if let Some(domain) = &r.domain {
        // equilibria of the full system for the separation guard
        o.equilibria = find_equilibria(&r.field, domain, 5)?.into_iter().map(|e| e.point).collect();
    }
    Ok(o)
}

pub fn classify(r: &Resolved, ic: &str, expect: Option<&str>, out: Option<&Path>) -> Result<Exit> {
    let x0 = r.parse_point(ic)?;
    let opts = classify_options(r)?;
    let c = classify_omega(&r.field, &x0, &opts);
    if let (Some(dir), OmegaClassification::ClosedOrbit { orbit, .. }) = (out, &c) {
        let mut header = vec!["t"];
        header.extend(r.def.state_names.iter().map(String::as_str));
        let k = orbit.samples.len() as f64;
        let rows = orbit.samples.iter().enumerate().map(|(i, s)| {
            let mut v = vec![orbit.period * i as f64 / k];
            v.extend(s);
            v
        });
        write_csv_rows(&dir.join("orbit.csv"), &header, rows)?;
    }
    let kind = c.kind();
    emit(r, "classify", json!({ "initial_state": x0, "classification": c }), out, "classify.json")?;
    Ok(match expect {
        Some(e) if !e.eq_ignore_ascii_case(kind) && e.replace('-', "").to_lowercase() != kind.to_lowercase() => 2,
        _ => 0,
    })
}

pub fn sweep(r: &Resolved, n: Option<usize>, seed: Option<u64>, min_closed: Option<f64>, out: Option<&Path>) -> Result<Exit> {
    let n = n.unwrap_or(r.sweep.n);
    let seed = seed.unwrap_or(r.sweep.seed);
    let opts = classify_options(r)?;
    let rep = genericity_sweep(&r.field, r.domain()?, n, seed, &[], &opts)?;
    let fraction = rep.closed_orbit_fraction();
    emit(r, "sweep", json!({ "closed_orbit_fraction": fraction, "sweep": rep }), out, "sweep.json")?;
    if let Some(dir) = out {
        let mut w = create(&dir.join("sweep.csv"))?;
        let names = r.def.state_names.join(",");
        writeln!(w, "index,{names},outcome,period")?;
        for e in &rep.entries {
            let ic: Vec<String> = e.initial.iter().map(|v| format!("{v:.16e}")).collect();
            let period = match &e.outcome {
                OmegaClassification::ClosedOrbit { orbit, .. } => format!("{:.16e}", orbit.period),
                _ => String::new(),
            };
            writeln!(w, "{},{},{},{}", e.index, ic.join(","), e.outcome.kind(), period)?;
        }
        w.flush()?;
    }
    Ok(match min_closed {
        Some(m) if fraction < m => 2,
        _ => 0,
    })
}

pub fn parse_check(src: &crate::source::SourceArgs) -> Result<Exit> {
    match (&src.builtin, &src.config) {
        (Some(name), _) => {
            let b = slowcone::dynsys::get_builtin(name)?;
            print!("{}", b.system.to_config_text());
        }
        (_, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match parse_config(&text) {
                Ok(cfg) => print!("{}", cfg.system.to_config_text()),
                Err(full) => {
                    // a bare [system] section is also accepted
                    let sys = parse_system(&text).map_err(|_| full)?;
                    print!("{}", sys.to_config_text());
                }
            }
        }
        _ => bail!("give exactly one of --builtin or --config"),
    }
    Ok(0)
}

fn projection(traj: &Trajectory, dense: usize, idx: [usize; 3]) -> impl Iterator<Item = Vec<f64>> + '_ {
    traj.resample(dense)
        .into_iter()
        .map(move |(t, x)| vec![t, x[idx[0]], x[idx[1]], x[idx[2]]])
}

pub struct DemoArgs {
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    pub t_end: f64,
    pub dense: usize,
    pub out: PathBuf,
}

/// Full reproduction bundle for the four-dimensional example.
pub fn demo_paper(a: &DemoArgs) -> Result<Exit> {
    let src = crate::source::SourceArgs {
        builtin: Some("paper-4d".into()),
        config: None,
    };
    let r = Resolved::load(&src, Some(a.eps))?;
    let sf = r.slow_fast()?;
    let out = a.out.as_path();
    let ic = [2.0, 2.0, 3.0, 12.0];

    eprintln!("[1/6] equilibria");
    let reduced = sf.reduced_system()?;
    let slow_box = r.domain()?.head(sf.slow_dim());
    let eq = find_equilibria(&reduced, &slow_box, 7)?;
    emit(&r, "demo-paper/equilibria", &eq, Some(out), "equilibria.json")?;

    eprintln!("[2/6] cooperativity certificates");
    let cert = certify_bundle(&r, "3*(x^2+y^2+z^2)", "all", 9, 20, 64, a.seed)?;
    let cert_pass = cert.pass;
    emit(&r, "demo-paper/certify", &cert, Some(out), "certify.json")?;
    if !cert_pass {
        eprintln!("certification failed");
        return Ok(2);
    }

    eprintln!("[3/6] slow manifold");
    let code = manifold(&r, 9, Some(out))?;
    if code != 0 {
        return Ok(code);
    }

    eprintln!("[4/6] classification of (2, 2, 3, 12)");
    let opts = classify_options(&r)?;
    let c = classify_omega(&r.field, &ic, &opts);
    let closed = c.kind() == "ClosedOrbit";
    emit(&r, "demo-paper/classify", json!({ "initial_state": ic, "classification": c }), Some(out), "classify.json")?;
    if !closed {
        eprintln!("the trajectory from (2, 2, 3, 12) was not classified as a closed orbit");
        return Ok(2);
    }

    eprintln!("[5/6] time series and projections");
    let traj = flow(&r.field, &ic, a.t_end, &r.solver)?;
    let mut w = create(&out.join("timeseries.csv"))?;
    traj.write_csv(&mut w, &r.def.state_names, Some(a.dense))?;
    w.flush()?;
    for (name, idx, cols) in [
        ("xyz", [0, 1, 2], ["t", "x", "y", "z"]),
        ("xyw", [0, 1, 3], ["t", "x", "y", "w"]),
        ("yzw", [1, 2, 3], ["t", "y", "z", "w"]),
        ("xzw", [0, 2, 3], ["t", "x", "z", "w"]),
    ] {
        write_csv_rows(&out.join(format!("projection_{name}.csv")), &cols, projection(&traj, a.dense, idx))?;
    }
    let limit = slowcone::dynsys::get_builtin("paper-3d-limit")?.system.bind_defaults()?;
    let lt = flow(&limit, &ic[..3], a.t_end, &r.solver_slow())?;
    write_csv_rows(&out.join("limit_xyz.csv"), &["t", "x", "y", "z"], projection(&lt, a.dense, [0, 1, 2]))?;

    eprintln!("[6/6] genericity sweep (N = {}, seed = {})", a.n, a.seed);
    let rep = genericity_sweep(&r.field, r.domain()?, a.n, a.seed, &[], &opts)?;
    let fraction = rep.closed_orbit_fraction();
    emit(&r, "demo-paper/sweep", json!({ "closed_orbit_fraction": fraction, "sweep": rep }), Some(out), "sweep.json")?;
    eprintln!(
        "closed orbits: {}/{}, equilibria: {}, unresolved: {}",
        rep.counts.closed_orbit, rep.n, rep.counts.equilibrium, rep.counts.unresolved
    );
    Ok(0)
}
