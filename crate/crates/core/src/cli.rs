//! Command-line front end: configuration parsing, the equilibria/
//! integrate/classify/verify/batch subcommands, and CSV/JSON export.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration error,
//! 3 verification failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bianchi::{GroupSpec, GroupTag, State};
use crate::closed_form::{
    heis_bolt_expansion, heis_bolt_series, heis_trajectory, heis_verify,
    heis_verify_with_exponent, su2_biaxial_residual, su2_biaxial_state, HeisenbergSolution,
    Su2BiaxialSolution,
};
use crate::diagnostics::{classify, ClassificationReport, ClassifyOptions, SeedSpec};
use crate::equilibria::{
    equilibrium_point, linearize, list_equilibria, unstable_seed, EquilibriumFamily,
};
use crate::error::{Error, Result};
use crate::flow::{
    change_chart, integrate, resample, stitch, write_csv, Chart, Direction, IntegratorOptions,
    Trajectory, TrajectoryMeta,
};
use crate::series::{
    series_solve, vz_kahler_check, vz_metric_check, OrbitKind, SeriesOptions,
};

#[derive(Parser, Debug)]
#[command(
    name = "cklab",
    about = "Numerical laboratory for cohomogeneity-one centrally flat Kähler metrics",
    version
)]
pub struct Cli {
    /// flat key=value configuration file; flags override file values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory (falls back to CKLAB_OUT, then ./out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List equilibrium families with spectra and unstable directions
    Equilibria(EquilibriaArgs),
    /// Integrate a trajectory and export CSV plus endpoint metadata
    Integrate(IntegrateArgs),
    /// Run the completeness classification for a seed
    Classify(ClassifyArgs),
    /// Consolidated residual verification report
    Verify(VerifyArgs),
    /// Run a batch of commands from config sections
    Batch(BatchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GroupArgs {
    /// group: heisenberg | su2 | e2
    #[arg(long)]
    pub group: Option<String>,
    /// e^{-A} for SU(2)
    #[arg(long, value_name = "VALUE")]
    pub exp_neg_a: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// equilibrium parameter(s), comma separated
    #[arg(long, value_name = "Q")]
    pub q: Option<String>,
    /// also write equilibria.json into the output directory
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// seed family: qq0 | 0qq | q0q | origin | q0q0 | 0p0r
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    /// perturbation size along the unstable direction
    #[arg(long)]
    pub eps: Option<f64>,
    /// weights for a multi-dimensional unstable eigenspace, comma separated
    #[arg(long)]
    pub weights: Option<String>,
    /// explicit seed state a,b,c,alpha (overrides family seeding)
    #[arg(long)]
    pub state: Option<String>,
    /// Heisenberg closed-form bolt parameter (exports the explicit solution)
    #[arg(long)]
    pub c1: Option<f64>,
    /// forward | backward | both
    #[arg(long)]
    pub direction: Option<String>,
    /// export chart: t | tau | r | q
    #[arg(long)]
    pub chart: Option<String>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub t_limit: Option<f64>,
    /// output file stem
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// series truncation order used by the expansion checks
    #[arg(long)]
    pub order: Option<usize>,
    /// run the corrupted negative controls as well
    #[arg(long)]
    pub inject_error: bool,
}

#[derive(Args, Debug, Clone)]
pub struct BatchArgs {
    /// configuration file with [run.NAME] sections
    #[arg(long)]
    pub jobs: Option<PathBuf>,
}

/// Flat key=value configuration with [section] headers.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

const KNOWN_KEYS: &[&str] = &[
    "group", "exp_neg_a", "q", "eps", "weights", "state", "c1", "direction", "chart", "rel_tol",
    "abs_tol", "t_limit", "name", "family", "order", "inject_error", "out", "command", "json",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        sections.entry(current.clone()).or_default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .or_else(|| self.sections.get("").and_then(|m| m.get(key)))
            .map(|s| s.as_str())
    }
}

fn parse_f64(name: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{name}: not a number: {v:?}")))
}

fn parse_group(name: Option<&str>, exp_neg_a: Option<f64>) -> Result<GroupSpec> {
    let tag = name.ok_or_else(|| Error::Config("missing --group".into()))?;
    match tag {
        "heisenberg" | "heis" | "nil3" => Ok(GroupSpec::heisenberg()),
        "su2" => Ok(GroupSpec::su2(exp_neg_a.unwrap_or(1.0))),
        "e2" => Ok(GroupSpec::e2()),
        other => Err(Error::Config(format!("unknown group {other:?}"))),
    }
}

fn parse_state(v: &str) -> Result<State> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "state must be a,b,c,alpha, got {v:?}"
        )));
    }
    let mut vals = [0.0; 4];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = parse_f64("state", p.trim())?;
    }
    Ok(State::new(0.0, vals[0], vals[1], vals[2], vals[3]))
}

fn parse_weights(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|p| parse_f64("weights", p.trim()))
        .collect()
}

fn out_dir(cli_out: Option<&Path>, cfg: Option<&ConfigFile>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(cfg) = cfg {
        if let Some(p) = cfg.get("", "out") {
            return PathBuf::from(p);
        }
    }
    if let Ok(p) = std::env::var("CKLAB_OUT") {
        return PathBuf::from(p);
    }
    PathBuf::from("out")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Outcome of a command: messages for stdout plus whether verification
/// failed (exit code 3).
pub struct CmdOutcome {
    pub stdout: String,
    pub verification_failed: bool,
}

impl CmdOutcome {
    fn ok(stdout: String) -> Self {
        CmdOutcome {
            stdout,
            verification_failed: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct EquilibriumRow {
    family: EquilibriumFamily,
    q: f64,
    second: f64,
    point: [f64; 4],
    eigenvalues: Vec<[f64; 2]>,
    unstable_dimension: usize,
    degenerate: bool,
}

pub fn cmd_equilibria(args: &EquilibriaArgs, cfg: Option<&ConfigFile>, out: &Path) -> Result<CmdOutcome> {
    let section = "equilibria";
    let group_name = args
        .group
        .group
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "group").map(String::from)));
    let ena = match (args.group.exp_neg_a, cfg.and_then(|c| c.get(section, "exp_neg_a"))) {
        (Some(v), _) => Some(v),
        (None, Some(v)) => Some(parse_f64("exp_neg_a", v)?),
        _ => None,
    };
    let group = parse_group(group_name.as_deref(), ena)?;
    let q_text = args
        .q
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "q").map(String::from)))
        .unwrap_or_else(|| "1".into());
    let qs: Vec<f64> = q_text
        .split(',')
        .map(|p| parse_f64("q", p.trim()))
        .collect::<Result<_>>()?;
    let eqs = list_equilibria(&group, &qs)?;
    let mut rows = Vec::new();
    let mut text = String::new();
    text.push_str(&format!(
        "group {} (e^-A = {})\n",
        group.tag, group.exp_neg_a
    ));
    text.push_str("family      q        eigenvalues\n");
    for e in &eqs {
        let rep = linearize(&group, e)?;
        let mut evs: Vec<[f64; 2]> = rep.eigenvalues.iter().map(|z| [z.re, z.im]).collect();
        evs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        let ev_text = evs
            .iter()
            .map(|z| {
                if z[1].abs() < 1e-12 {
                    format!("{:.6}", z[0])
                } else {
                    format!("{:.6}{:+.6}i", z[0], z[1])
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        text.push_str(&format!("{:<10} {:<8} {}\n", e.family.to_string(), e.q, ev_text));
        rows.push(EquilibriumRow {
            family: e.family,
            q: e.q,
            second: e.second,
            point: [e.point.a, e.point.b, e.point.c, e.point.alpha],
            eigenvalues: evs,
            unstable_dimension: rep.unstable.len(),
            degenerate: rep.degenerate,
        });
    }
    if args.json {
        write_json(&out.join("equilibria.json"), &rows)?;
        text.push_str(&format!("wrote {}\n", out.join("equilibria.json").display()));
    }
    Ok(CmdOutcome::ok(text))
}

struct SeedResolution {
    group: GroupSpec,
    seed: SeedSpec,
    state: Option<State>,
}

fn resolve_seed(
    group: &GroupArgs,
    family: Option<&str>,
    q: Option<f64>,
    eps: Option<f64>,
    weights: Option<&str>,
    state: Option<&str>,
    c1: Option<f64>,
    cfg: Option<&ConfigFile>,
    section: &str,
) -> Result<SeedResolution> {
    let group_name = group
        .group
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "group").map(String::from)));
    let ena = match (group.exp_neg_a, cfg.and_then(|c| c.get(section, "exp_neg_a"))) {
        (Some(v), _) => Some(v),
        (None, Some(v)) => Some(parse_f64("exp_neg_a", v)?),
        _ => None,
    };
    let g = parse_group(group_name.as_deref(), ena)?;
    let state_text = state
        .map(String::from)
        .or_else(|| cfg.and_then(|c| c.get(section, "state").map(String::from)));
    let family_text = family
        .map(String::from)
        .or_else(|| cfg.and_then(|c| c.get(section, "family").map(String::from)));
    let c1_val = match (c1, cfg.and_then(|c| c.get(section, "c1"))) {
        (Some(v), _) => Some(v),
        (None, Some(v)) => Some(parse_f64("c1", v)?),
        _ => None,
    };
    if g.tag == GroupTag::Heisenberg {
        if let Some(c1) = c1_val {
            return Ok(SeedResolution {
                group: g,
                seed: SeedSpec::HeisenbergClosedForm { c1 },
                state: None,
            });
        }
    }
    if let Some(sv) = state_text {
        let st = parse_state(&sv)?;
        return Ok(SeedResolution {
            group: g,
            seed: SeedSpec::Explicit {
                a: st.a,
                b: st.b,
                c: st.c,
                alpha: st.alpha,
            },
            state: Some(st),
        });
    }
    let family_name = family_text.ok_or_else(|| {
        Error::Config("need --family (with --q/--eps), --state, or --c1".into())
    })?;
    let fam = EquilibriumFamily::parse(&family_name)
        .ok_or_else(|| Error::Config(format!("unknown family {family_name:?}")))?;
    let qv = match (q, cfg.and_then(|c| c.get(section, "q"))) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("q", v)?,
        _ => 1.0,
    };
    let ev = match (eps, cfg.and_then(|c| c.get(section, "eps"))) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("eps", v)?,
        _ => 1e-6,
    };
    let wv = match (weights, cfg.and_then(|c| c.get(section, "weights"))) {
        (Some(v), _) => Some(parse_weights(v)?),
        (None, Some(v)) => Some(parse_weights(v)?),
        _ => None,
    };
    Ok(SeedResolution {
        group: g,
        seed: SeedSpec::Family {
            family: fam,
            q: qv,
            epsilon: ev,
            weights: wv,
        },
        state: None,
    })
}

pub fn cmd_integrate(args: &IntegrateArgs, cfg: Option<&ConfigFile>, out: &Path) -> Result<CmdOutcome> {
    let section = "integrate";
    let res = resolve_seed(
        &args.group,
        args.family.as_deref(),
        args.q,
        args.eps,
        args.weights.as_deref(),
        args.state.as_deref(),
        args.c1,
        cfg,
        section,
    )?;
    let mut opts = IntegratorOptions::default();
    if let Some(v) = args.rel_tol.or_else(|| {
        cfg.and_then(|c| c.get(section, "rel_tol"))
            .and_then(|v| v.parse().ok())
    }) {
        opts.rel_tol = v;
    }
    if let Some(v) = args.abs_tol.or_else(|| {
        cfg.and_then(|c| c.get(section, "abs_tol"))
            .and_then(|v| v.parse().ok())
    }) {
        opts.abs_tol = v;
    }
    if let Some(v) = args.t_limit.or_else(|| {
        cfg.and_then(|c| c.get(section, "t_limit"))
            .and_then(|v| v.parse().ok())
    }) {
        opts.t_limit = v;
    }
    let chart_name = args
        .chart
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "chart").map(String::from)))
        .unwrap_or_else(|| "t".into());
    let chart = Chart::parse(&chart_name)
        .ok_or_else(|| Error::Config(format!("unknown chart {chart_name:?}")))?;
    let dir_name = args
        .direction
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "direction").map(String::from)))
        .unwrap_or_else(|| "both".into());
    let name = args
        .name
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "name").map(String::from)))
        .unwrap_or_else(|| "trajectory".into());

    let traj: Trajectory = match &res.seed {
        SeedSpec::HeisenbergClosedForm { c1 } => {
            let sol = HeisenbergSolution::new(*c1)?;
            heis_trajectory(&sol, -10.0, 10.0, 2001)
        }
        _ => {
            let st = match (&res.seed, res.state) {
                (_, Some(st)) => st,
                (
                    SeedSpec::Family {
                        family,
                        q,
                        epsilon,
                        weights,
                    },
                    None,
                ) => {
                    let eq = equilibrium_point(&res.group, *family, *q, 0.0);
                    let rep = linearize(&res.group, &eq)?;
                    unstable_seed(&res.group, &eq, &rep, *epsilon, weights.as_deref())?
                }
                _ => unreachable!(),
            };
            match dir_name.as_str() {
                "forward" => integrate(&res.group, &st, Direction::Forward, &opts)?,
                "backward" => integrate(&res.group, &st, Direction::Backward, &opts)?,
                "both" => {
                    let back = integrate(&res.group, &st, Direction::Backward, &opts)?;
                    let fwd = integrate(&res.group, &st, Direction::Forward, &opts)?;
                    stitch(back, &fwd)?
                }
                other => return Err(Error::Config(format!("unknown direction {other:?}"))),
            }
        }
    };
    let traj = change_chart(&traj, chart)?;
    fs::create_dir_all(out)?;
    let csv_path = out.join(format!("{name}.csv"));
    let mut file = fs::File::create(&csv_path)?;
    write_csv(&traj, &mut file)?;
    file.flush()?;
    let meta_path = out.join(format!("{name}.meta.json"));
    write_json(&meta_path, &TrajectoryMeta::of(&traj))?;
    let mut text = format!(
        "samples {}\nleft {:?} at t={:.6}\nright {:?} at t={:.6}\n",
        traj.samples.len(),
        traj.left.kind,
        traj.left.value,
        traj.right.kind,
        traj.right.value
    );
    if let Ok(drift) = traj.first_integral_drift() {
        for (name, d) in drift {
            text.push_str(&format!("drift {name}: {d:.3e}\n"));
        }
    }
    text.push_str(&format!(
        "wrote {} and {}\n",
        csv_path.display(),
        meta_path.display()
    ));
    Ok(CmdOutcome::ok(text))
}

fn verdict_line(rep: &ClassificationReport) -> String {
    let mut lines = Vec::new();
    lines.push(format!(
        "group {} (e^-A = {}), ricci_flat = {}",
        rep.group, rep.exp_neg_a, rep.ricci_flat
    ));
    if let Some(left) = &rep.left {
        let mut l = format!("left:  {:?}", left.verdict);
        if let Some(d) = left.distance {
            l.push_str(&format!(", distance {d:.6}"));
        }
        if let Some(q) = left.captured_q {
            l.push_str(&format!(", captured q = {q:.9}"));
        }
        if let Some(m) = &left.smoothness_metric {
            l.push_str(&format!(
                ", smooth metric {} (a1={}, d1={})",
                if m.pass { "PASS" } else { "FAIL" },
                m.weights.0,
                m.weights.1
            ));
        }
        if let Some(k) = &left.smoothness_kahler {
            l.push_str(&format!(", kahler {}", if k.pass { "PASS" } else { "FAIL" }));
        }
        lines.push(l);
    }
    if let Some(right) = &rep.right {
        let mut l = format!("right: {:?}", right.verdict);
        if let Some(f) = &right.fit {
            l.push_str(&format!(
                ", integrand exponent {:.4} (r2={:.6})",
                f.exponent, f.r2
            ));
        }
        if let Some(w) = &right.w_chart {
            l.push_str(&format!(
                ", W-fit k={:.6} (measured {:.6}, r2={:.8})",
                w.k_fit, w.k_measured, w.r2
            ));
        }
        lines.push(l);
    }
    for (name, d) in &rep.first_integral_drift {
        lines.push(format!("drift {name}: {d:.3e}"));
    }
    lines.push(format!("verdict: {:?}", rep.overall));
    for r in &rep.reasons {
        lines.push(format!("  note: {r}"));
    }
    lines.join("\n") + "\n"
}

pub fn cmd_classify(args: &ClassifyArgs, cfg: Option<&ConfigFile>, out: &Path) -> Result<CmdOutcome> {
    let section = "classify";
    let res = resolve_seed(
        &args.group,
        args.family.as_deref(),
        args.q,
        args.eps,
        args.weights.as_deref(),
        args.state.as_deref(),
        args.c1,
        cfg,
        section,
    )?;
    let rep = classify(&res.group, &res.seed, &ClassifyOptions::default())?;
    let name = args
        .name
        .clone()
        .or_else(|| cfg.and_then(|c| c.get(section, "name").map(String::from)))
        .unwrap_or_else(|| "classify".into());
    let path = out.join(format!("{name}.json"));
    write_json(&path, &rep)?;
    let mut text = verdict_line(&rep);
    text.push_str(&format!("wrote {}\n", path.display()));
    Ok(CmdOutcome::ok(text))
}

#[derive(Debug, Serialize)]
struct VerifyCheck {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
    /// negative control: pass means the corruption was detected
    control: bool,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    checks: Vec<VerifyCheck>,
    pass: bool,
}

fn check(name: &str, value: f64, threshold: f64) -> VerifyCheck {
    VerifyCheck {
        name: name.into(),
        value,
        threshold,
        pass: value <= threshold,
        control: false,
    }
}

fn control(name: &str, value: f64, must_exceed: f64) -> VerifyCheck {
    VerifyCheck {
        name: name.into(),
        value,
        threshold: must_exceed,
        pass: value > must_exceed,
        control: true,
    }
}

pub fn cmd_verify(args: &VerifyArgs, cfg: Option<&ConfigFile>, out: &Path) -> Result<CmdOutcome> {
    let order = args
        .order
        .or_else(|| {
            cfg.and_then(|c| c.get("verify", "order"))
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(8);
    let inject = args.inject_error
        || cfg
            .and_then(|c| c.get("verify", "inject_error"))
            .map(|v| v == "true" || v == "1")
            .unwrap_or(false);
    if order < 6 || order > 12 {
        return Err(Error::Config(format!(
            "order must be within [6, 12], got {order}"
        )));
    }
    let mut checks = Vec::new();

    // closed-form residuals
    for c1 in [0.5, 1.0, 2.0] {
        let sol = HeisenbergSolution::new(c1)?;
        let rep = heis_verify(&sol, 1000, 10.0);
        checks.push(check(
            &format!("heis closed form combined residual (c1={c1})"),
            rep.max_combined,
            1e-10,
        ));
        checks.push(check(
            &format!("heis closed form central residual (c1={c1})"),
            rep.max_central,
            1e-10,
        ));
        let exp = heis_bolt_expansion(&sol, 8);
        checks.push(check(
            &format!("heis bolt r^2 coefficient (c1={c1})"),
            (exp.sigma3_sq.get(2) - 1.0).abs(),
            1e-8,
        ));
        checks.push(check(
            &format!("heis bolt r^4 coefficient (c1={c1})"),
            (exp.sigma3_sq.get(4) + 1.0 / (4.0 * c1)).abs(),
            1e-8,
        ));
    }

    // biaxial closed form
    {
        let sol = Su2BiaxialSolution::new(2.0, 0.0, 1.0)?;
        let g = GroupSpec::su2(1.0);
        let mut worst: f64 = 0.0;
        let mut worst_t: f64 = 0.0;
        for i in 0..200 {
            let q = -4.0 + 8.0 * i as f64 / 199.0;
            worst = worst.max(su2_biaxial_residual(&sol, q).abs());
            let (st, dv) = su2_biaxial_state(&sol, q)?;
            let ws = crate::closed_form::w_scale(&g, &st, &dv);
            for r in crate::bianchi::w_residuals(&g, &st, &dv) {
                worst_t = worst_t.max(r.abs() / ws);
            }
        }
        checks.push(check("su2 biaxial chart residual", worst, 1e-10));
        checks.push(check("su2 biaxial product residual", worst_t, 1e-9));
    }

    // series expansions
    {
        let g = GroupSpec::su2(1.0);
        let eq = equilibrium_point(&g, EquilibriumFamily::Su2QQ0, 1.0, 0.0);
        let ser = series_solve(&g, &eq, order, &SeriesOptions::default())?;
        checks.push(check("su2 bolt recursion residual", ser.residual, 1e-12));
        checks.push(check(
            "su2 bolt leading slope vs 1+e^-A",
            (ser.coeffs[2][1] - g.gamma()).abs(),
            1e-10,
        ));
        let eqn = equilibrium_point(&g, EquilibriumFamily::Su2Origin, 0.0, 0.0);
        let nut = series_solve(&g, &eqn, order.min(7), &SeriesOptions::default())?;
        checks.push(check(
            "su2 nut leading coefficients",
            (nut.coeffs[0][1] - 2f64.sqrt() / 2.0)
                .abs()
                .max((nut.coeffs[2][1] - 1.0).abs()),
            1e-12,
        ));
        let ge = GroupSpec::e2();
        let eqe = equilibrium_point(&ge, EquilibriumFamily::E2Q0Q0, 1.0, 0.0);
        let sere = series_solve(&ge, &eqe, order, &SeriesOptions::default())?;
        checks.push(check(
            "e2 bolt b'(0) = 1",
            (sere.coeffs[1][1] - 1.0).abs(),
            1e-12,
        ));
        let cross = sere
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let want_even = i != 1;
                c.iter()
                    .enumerate()
                    .filter(|(k, _)| (k % 2 == 0) != want_even)
                    .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
            })
            .fold(0.0f64, f64::max);
        checks.push(check("e2 bolt cross-parity coefficients", cross, 1e-12));
    }

    // frame identities and the dual curvature routes on seeded states
    {
        let mut seed = 0x5851f42d4c957f2du64;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            0.2 + ((seed >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut worst_rel: f64 = 0.0;
        let mut worst_cross: f64 = 0.0;
        for i in 0..100 {
            let lambda = if i % 2 == 0 { 0.0 } else { rnd() - 0.5 };
            let g = GroupSpec::custom(1.0, if i % 3 == 0 { 0.0 } else { 1.0 }, 1.0, lambda);
            let st = State::new(0.0, rnd(), rnd(), rnd(), rnd());
            let d = crate::bianchi::rhs_general(&g, &st)?;
            let fr = crate::ansatz::ansatz_map(&g, &st, &d)?;
            for r in fr.relation_residuals() {
                worst_rel = worst_rel.max(r.abs());
            }
            let via_ricci = crate::ansatz::central_curvature_via_ricci(&g, &st)?;
            let implied = crate::ansatz::lambda_implied(&g, &st, &d);
            worst_cross = worst_cross.max((via_ricci - implied).abs());
        }
        checks.push(check("frame bracket identities", worst_rel, 1e-12));
        checks.push(check(
            "central curvature: coefficient route vs reduced route",
            worst_cross,
            1e-8,
        ));
    }

    if inject {
        // corrupted closed form: wrong exponent
        let sol = HeisenbergSolution::new(1.0)?;
        let bad = heis_verify_with_exponent(&sol, 1000, 10.0, 2.1);
        checks.push(control(
            "control: corrupted heis exponent detected",
            bad.max_combined.max(bad.max_central),
            1e-3,
        ));
        // corrupted series coefficient breaks the Kähler parity
        let ge = GroupSpec::e2();
        let eqe = equilibrium_point(&ge, EquilibriumFamily::E2Q0Q0, 1.0, 0.0);
        let mut sere = series_solve(&ge, &eqe, order, &SeriesOptions::default())?;
        sere.coeffs[1][2] = 0.1;
        let bad_k = vz_kahler_check(&sere, &ge, OrbitKind::Bolt)?;
        let leak = bad_k
            .kahler_conditions
            .iter()
            .map(|c| c.residual)
            .fold(0.0f64, f64::max);
        checks.push(control("control: corrupted series detected", leak, 1e-3));
        // corrupted tau window: doubled alpha
        let g = GroupSpec::su2(1.0);
        let eq = equilibrium_point(&g, EquilibriumFamily::Su2QQ0, 1.0, 0.0);
        let rep = linearize(&g, &eq)?;
        let st = unstable_seed(&g, &eq, &rep, 1e-6, None)?;
        let mut opts = IntegratorOptions::default();
        opts.t_limit = 7.0;
        opts.capture = false;
        let tr = integrate(&g, &st, Direction::Forward, &opts)?;
        let tau = change_chart(&tr, Chart::Tau)?;
        let (lo, hi) = tau.coord_range();
        let mesh: Vec<f64> = (0..=200)
            .map(|i| lo + 0.5 * (hi - lo) + 0.4 * (hi - lo) * i as f64 / 200.0)
            .collect();
        let mut win = resample(&tau, &mesh)?;
        for smp in &mut win.samples {
            smp.state.alpha *= 2.0;
        }
        let res = crate::ansatz::central_residual_onevar(&g, &win)?;
        let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        checks.push(control("control: corrupted tau window detected", worst, 1e-3));
    }

    // smoothness reports for the record
    {
        let sol = HeisenbergSolution::new(1.0)?;
        let ser = heis_bolt_series(&sol, 8)?;
        let g = GroupSpec::heisenberg();
        let m = vz_metric_check(&ser, &g, OrbitKind::Bolt)?;
        checks.push(check(
            "heis bolt smooth extension",
            if m.pass { 0.0 } else { 1.0 },
            0.5,
        ));
    }

    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        checks: checks
            .into_iter()
            .collect(),
        pass,
    };
    write_json(&out.join("verify.json"), &report)?;
    let mut text = String::new();
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let kind = if c.control { " [control]" } else { "" };
        text.push_str(&format!(
            "{status}{kind} {}: {:.3e} (threshold {:.1e})\n",
            c.name, c.value, c.threshold
        ));
    }
    text.push_str(&format!(
        "verification {}\nwrote {}\n",
        if report.pass { "PASSED" } else { "FAILED" },
        out.join("verify.json").display()
    ));
    Ok(CmdOutcome {
        stdout: text,
        verification_failed: !report.pass,
    })
}

pub fn cmd_batch(args: &BatchArgs, cfg: Option<&ConfigFile>, out: &Path) -> Result<CmdOutcome> {
    let path = args
        .jobs
        .clone()
        .or_else(|| cfg.and_then(|c| c.get("batch", "name").map(PathBuf::from)))
        .ok_or_else(|| Error::Config("batch needs --jobs FILE".into()))?;
    let jobs = ConfigFile::load(&path)?;
    let mut text = String::new();
    let mut failed = false;
    for (section, keys) in &jobs.sections {
        let Some(run_name) = section.strip_prefix("run.") else {
            continue;
        };
        let command = keys
            .get("command")
            .ok_or_else(|| Error::Config(format!("[{section}] missing command=")))?;
        // each run gets its own section-backed config and output directory
        let mut sub = ConfigFile::default();
        sub.sections.insert(command.clone(), keys.clone());
        sub.sections.entry(String::new()).or_default();
        let run_out = out.join(run_name);
        let outcome = match command.as_str() {
            "classify" => cmd_classify(
                &ClassifyArgs {
                    group: GroupArgs {
                        group: None,
                        exp_neg_a: None,
                    },
                    family: None,
                    q: None,
                    eps: None,
                    weights: None,
                    state: None,
                    c1: None,
                    name: None,
                },
                Some(&sub),
                &run_out,
            )?,
            "integrate" => cmd_integrate(
                &IntegrateArgs {
                    group: GroupArgs {
                        group: None,
                        exp_neg_a: None,
                    },
                    family: None,
                    q: None,
                    eps: None,
                    weights: None,
                    state: None,
                    c1: None,
                    direction: None,
                    chart: None,
                    rel_tol: None,
                    abs_tol: None,
                    t_limit: None,
                    name: None,
                },
                Some(&sub),
                &run_out,
            )?,
            other => {
                return Err(Error::Config(format!(
                    "[{section}] unsupported batch command {other:?}"
                )))
            }
        };
        failed |= outcome.verification_failed;
        text.push_str(&format!("[{run_name}]\n{}", outcome.stdout));
    }
    Ok(CmdOutcome {
        stdout: text,
        verification_failed: failed,
    })
}

/// Entry point used by the binary: parses, dispatches, maps errors to exit
/// codes, prints messages.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        None => None,
    };
    let out = out_dir(cli.out.as_deref(), cfg.as_ref());
    let result = match &cli.command {
        Command::Equilibria(args) => cmd_equilibria(args, cfg.as_ref(), &out),
        Command::Integrate(args) => cmd_integrate(args, cfg.as_ref(), &out),
        Command::Classify(args) => cmd_classify(args, cfg.as_ref(), &out),
        Command::Verify(args) => cmd_verify(args, cfg.as_ref(), &out),
        Command::Batch(args) => cmd_batch(args, cfg.as_ref(), &out),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.verification_failed {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidOptions(_) => 2,
                Error::DegenerateParameter(_) => 2,
                _ => 1,
            }
        }
    }
}
