//! Batch front end: kinematics queries and the land/swim scenario runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use croc_kin::config::{ConfigDocument, ScenarioKind};
use croc_kin::gait::stand_sequence;
use croc_kin::leg::{leg_fk, leg_ik, AnklePolicy, FootPosition, LegAngles};
use croc_kin::sim::scenario::{compensated_gait, fault_cases, reduction_pct, swim_samples, Comparison, FaultMatrix};
use croc_kin::sim::{initial_state, reach_height, run_scenario, ReachPosture, RunResult, RunSummary, Sample};
use croc_kin::spine::{spine_fk, spine_ik, SpineAngles};
use croc_kin::Error;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "croc-kin", version, about = "Crocodile robot kinematics and locomotion runs")]
struct Cli {
    /// JSON config; falls back to $CROC_KIN_CONFIG, then built-in defaults.
    #[arg(long, global = true, env = "CROC_KIN_CONFIG")]
    config: Option<PathBuf>,
    /// Reserved; every run is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Joint angles on the command line and in printed output are in degrees.
    #[arg(long, global = true)]
    degrees: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward kinematics from joint angles.
    Fk {
        chain: Chain,
        #[arg(allow_negative_numbers = true, required = true)]
        q: Vec<f64>,
    },
    /// Inverse kinematics for a target point in mm.
    Ik {
        chain: Chain,
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
        /// Leg ankle angle; omitted keeps the sole flat.
        #[arg(long, allow_negative_numbers = true)]
        ankle: Option<f64>,
    },
    /// Run a scenario family and write series.csv and report.json.
    Scenario {
        name: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Chain {
    Leg,
    Spine,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_)) => 2,
            Some(Error::Unreachable { .. } | Error::Infeasible(_) | Error::JointLimit { .. } | Error::Domain(_)) => 3,
            Some(Error::NoSupport) => 4,
            _ => 1,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let doc = match &cli.config {
        Some(p) => ConfigDocument::load(p)?,
        None => ConfigDocument::default(),
    };
    let unit = Units { degrees: cli.degrees };
    match &cli.cmd {
        Command::Fk { chain, q } => print_json(&fk(&doc, *chain, q, unit)?),
        Command::Ik { chain, x, y, z, ankle } => print_json(&ik(&doc, *chain, [*x, *y, *z], *ankle, unit)?),
        Command::Scenario { name, out } => {
            let kind = match name {
                Some(n) => ScenarioKind::parse(n).ok_or_else(|| Error::Config(format!("unknown scenario {n:?}")))?,
                None => doc
                    .scenario
                    .ok_or_else(|| Error::Config("no scenario named on the command line or in the config".into()))?,
            };
            scenario(&doc, kind, out, cli.seed)
        }
    }
}

#[derive(Clone, Copy)]
struct Units {
    degrees: bool,
}

impl Units {
    fn input(self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }

    fn output(self, v: f64) -> f64 {
        if self.degrees {
            v.to_degrees()
        } else {
            v
        }
    }

    fn name(self) -> &'static str {
        if self.degrees {
            "deg"
        } else {
            "rad"
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    // a closed pipe downstream is not a failure of the query
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

#[derive(Serialize)]
struct FkOutput {
    chain: &'static str,
    angle_unit: &'static str,
    joints: Vec<f64>,
    position_mm: [f64; 3],
    rotation: [[f64; 3]; 3],
}

fn rows(r: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]])
}

fn arity(q: &[f64], n: usize) -> Result<(), Error> {
    if q.len() != n {
        return Err(Error::Arity { expected: n, actual: q.len() });
    }
    Ok(())
}

fn fk(doc: &ConfigDocument, chain: Chain, q: &[f64], u: Units) -> Result<FkOutput, Failure> {
    let rad: Vec<f64> = q.iter().map(|v| u.input(*v)).collect();
    let (name, t) = match chain {
        Chain::Leg => {
            arity(&rad, 4).map_err(|e| Error::Config(e.to_string()))?;
            ("leg", leg_fk(&doc.robot.leg, &LegAngles::from_array([rad[0], rad[1], rad[2], rad[3]])).transform)
        }
        Chain::Spine => {
            arity(&rad, 5).map_err(|e| Error::Config(e.to_string()))?;
            let a = SpineAngles([rad[0], rad[1], rad[2], rad[3], rad[4]]);
            ("spine", spine_fk(&doc.robot.spine, &a))
        }
    };
    let p = t.translation();
    Ok(FkOutput {
        chain: name,
        angle_unit: u.name(),
        joints: q.to_vec(),
        position_mm: [p.x, p.y, p.z],
        rotation: rows(&t.rotation()),
    })
}

#[derive(Serialize)]
struct IkOutput {
    chain: &'static str,
    angle_unit: &'static str,
    target_mm: [f64; 3],
    solutions: Vec<Vec<f64>>,
    singular: bool,
    converged: bool,
    error_mm: f64,
}

fn ik(doc: &ConfigDocument, chain: Chain, p: [f64; 3], ankle: Option<f64>, u: Units) -> Result<IkOutput, Failure> {
    let out = |v: Vec<f64>| v.into_iter().map(|a| u.output(a)).collect::<Vec<_>>();
    match chain {
        Chain::Leg => {
            let policy = ankle.map_or(AnklePolicy::FootFlat, |a| AnklePolicy::Fixed(u.input(a)));
            let sol = leg_ik(&doc.robot.leg, &FootPosition::new(p[0], p[1], p[2]), policy)?;
            let target = FootPosition::new(p[0], p[1], p[2]);
            let error_mm =
                sol.solutions.iter().map(|q| leg_fk(&doc.robot.leg, q).position.distance(&target)).fold(0.0, f64::max);
            Ok(IkOutput {
                chain: "leg",
                angle_unit: u.name(),
                target_mm: p,
                solutions: sol.solutions.iter().map(|q| out(q.to_array().to_vec())).collect(),
                singular: sol.singular,
                converged: true,
                error_mm,
            })
        }
        Chain::Spine => {
            let r = spine_ik(&doc.robot.spine, &Vector3::from(p), &SpineAngles::default())?;
            if !r.converged {
                return Err(Error::Infeasible(format!(
                    "spine IK stopped {:.3} mm from the target after {} iterations",
                    r.error_mm, r.iterations
                ))
                .into());
            }
            Ok(IkOutput {
                chain: "spine",
                angle_unit: u.name(),
                target_mm: p,
                solutions: vec![out(r.angles.0.to_vec())],
                singular: false,
                converged: r.converged,
                error_mm: r.error_mm,
            })
        }
    }
}

#[derive(Serialize)]
struct NamedRun {
    name: String,
    result: RunResult,
}

#[derive(Serialize)]
struct ScenarioReport<'a> {
    scenario: &'static str,
    seed: u64,
    runs: Vec<NamedRun>,
    summary: BTreeMap<String, f64>,
    config: &'a ConfigDocument,
}

fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

fn write_series(dir: &Path, series: &[Sample]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join("series.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["t", "displacement_mm", "cog_height_mm", "margin_mm"])?;
    for s in series {
        w.write_record([fmt(s.t), fmt(s.displacement_mm), fmt(s.cog_height_mm), fmt(s.margin_mm)])?;
    }
    w.flush()?;
    Ok(())
}

fn pair(c: Comparison, on: &str, off: &str) -> Vec<NamedRun> {
    vec![NamedRun { name: on.into(), result: c.on }, NamedRun { name: off.into(), result: c.off }]
}

fn scenario(doc: &ConfigDocument, kind: ScenarioKind, out: &Path, seed: u64) -> Result<(), Failure> {
    let (m, g, sim) = (&doc.robot, &doc.gait, &doc.sim);
    let mut summary = BTreeMap::new();
    let runs = match kind {
        ScenarioKind::Stability => {
            let (on, off) = rayon::join(
                || run_scenario(m, &croc_kin::gait::GaitParams { tail_drag: true, ..*g }, sim, &[], sim.duration),
                || run_scenario(m, &croc_kin::gait::GaitParams { tail_drag: false, ..*g }, sim, &[], sim.duration),
            );
            let c = Comparison { on: on?, off: off? };
            summary.insert("min_margin_tail_on_mm".into(), c.on.summary.min_margin_mm);
            summary.insert("min_margin_tail_off_mm".into(), c.off.summary.min_margin_mm);
            summary.insert("cog_amplitude_tail_on_mm".into(), c.on.summary.cog_height_amplitude_mm);
            summary.insert("cog_amplitude_tail_off_mm".into(), c.off.summary.cog_height_amplitude_mm);
            pair(c, "tail_on", "tail_off")
        }
        ScenarioKind::Displacement => {
            let (on, off) = rayon::join(
                || run_scenario(m, g, sim, &[], sim.duration),
                || run_scenario(m, &g.locked_trunk(), sim, &[], sim.duration),
            );
            let c = Comparison { on: on?, off: off? };
            summary.insert("displacement_on_mm".into(), c.on.displacement_mm());
            summary.insert("displacement_off_mm".into(), c.off.displacement_mm());
            summary.insert("ratio".into(), c.on.displacement_mm() / c.off.displacement_mm());
            pair(c, "trunk_on", "trunk_off")
        }
        ScenarioKind::Fault => {
            let cases = fault_cases();
            let mut jobs = vec![(None, *g)];
            for f in &cases {
                jobs.push((Some((*f, true)), compensated_gait(g, f)));
                jobs.push((Some((*f, false)), g.locked_trunk()));
            }
            let results = jobs
                .par_iter()
                .map(|(f, gait)| {
                    let faults: Vec<_> = f.iter().map(|(spec, _)| *spec).collect();
                    run_scenario(m, gait, sim, &faults, sim.duration)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let mut it = results.into_iter();
            let baseline = it.next().expect("baseline run");
            let paired: Vec<_> = cases
                .iter()
                .map(|f| (*f, it.next().expect("trunk-on run"), it.next().expect("trunk-off run")))
                .collect();
            let fm = FaultMatrix::assemble(baseline, paired);
            let b = fm.baseline.displacement_mm();
            summary.insert("baseline_mm".into(), b);
            let mut runs = vec![NamedRun { name: "baseline".into(), result: fm.baseline.clone() }];
            for c in fm.cases {
                let label = c.fault.label().replace(':', "_");
                summary.insert(format!("{label}_reduction_on_pct"), c.reduction_on_pct);
                summary.insert(format!("{label}_reduction_off_pct"), c.reduction_off_pct);
                debug_assert_eq!(c.reduction_on_pct, reduction_pct(b, c.trunk_on.displacement_mm()));
                runs.push(NamedRun { name: format!("{label}_trunk_on"), result: c.trunk_on });
                runs.push(NamedRun { name: format!("{label}_trunk_off"), result: c.trunk_off });
            }
            runs
        }
        ScenarioKind::Stand => {
            let crawl = reach_height(m, g, &doc.stand, ReachPosture::Crawl)?;
            let stand = reach_height(m, g, &doc.stand, ReachPosture::Stand)?;
            summary.insert("crawl_reach_mm".into(), crawl);
            summary.insert("stand_reach_mm".into(), stand);
            summary.insert("ratio".into(), stand / crawl);
            let seq = stand_sequence(m, g, &doc.stand, sim.duration)?;
            let series = seq
                .keyframes
                .iter()
                .map(|f| initial_state(m, sim, f).map(|s| Sample::of(&s)))
                .collect::<Result<Vec<_>, Error>>()?;
            vec![NamedRun {
                name: "stand".into(),
                result: RunResult { summary: RunSummary::from_series(&series, None), series },
            }]
        }
        ScenarioKind::Swim => {
            let samples = swim_samples(&doc.swim, 200, 200)?;
            fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
            let path = out.join("midline.csv");
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
            w.write_record(["t", "x_mm", "y_mm", "envelope_mm"]).map_err(anyhow::Error::from)?;
            let mut excess = f64::NEG_INFINITY;
            for s in &samples {
                excess = excess.max(s.y_mm.abs() - s.envelope_mm);
                w.write_record([fmt(s.t), fmt(s.x_mm), fmt(s.y_mm), fmt(s.envelope_mm)])
                    .map_err(anyhow::Error::from)?;
            }
            w.flush().map_err(anyhow::Error::from)?;
            summary.insert("samples".into(), samples.len() as f64);
            summary.insert("max_envelope_excess_mm".into(), excess);
            summary.insert("period_s".into(), doc.swim.period());
            Vec::new()
        }
    };

    if let Some(first) = runs.first() {
        write_series(out, &first.result.series)?;
    }
    if runs.len() > 1 {
        runs.par_iter()
            .map(|r| write_series(&out.join("runs").join(&r.name), &r.result.series))
            .collect::<anyhow::Result<Vec<_>>>()?;
    }
    let fell: Vec<_> =
        runs.iter().filter_map(|r| r.result.summary.fell_at.map(|t| format!("{} at t = {t} s", r.name))).collect();
    let report = ScenarioReport { scenario: kind.name(), seed, runs, summary, config: doc };
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).map_err(Error::from)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("{} written to {}", kind.name(), out.display());
    for (k, v) in &report.summary {
        let _ = writeln!(std::io::stdout(), "{k} = {v:.6}");
    }
    if !fell.is_empty() {
        return Err(Error::NoSupport).context(format!("run fell: {}", fell.join(", "))).map_err(Failure::from);
    }
    Ok(())
}
