//! Subcommand implementations. Each returns the text for standard output;
//! file outputs go to the run's output directory next to its manifest.

use crate::error::CliError;
use crate::instance::{read_batch, read_json, Instance};
use crate::svg::{self, CandidatePoint, Surface};
use hardneg_core::arc_solver::{enumerate_candidates, optimal_arc_distance, ArcProblem};
use hardneg_core::batch_engine::{optimal_distance_table, Variant};
use hardneg_core::losses::{self, LossConfig, LossKind};
use hardneg_core::oracle::{grid_min_arc, grid_min_segment, GridResult};
use hardneg_core::segment_solver::{enumerate_segment_candidates, optimal_segment_distance, SegmentProblem};
use hardneg_core::trainer::{generate_synthetic, random_unit, run_experiment, ExperimentConfig, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Written as `manifest.json` next to every file output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: &'static str,
}

pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(OutDir { path: path.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.path.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn manifest(&self, command: &str, config: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let m = RunManifest {
            command: command.to_string(),
            config: config.map(Path::to_path_buf),
            out_dir: self.path.clone(),
            seed,
            timestamp,
            version: env!("CARGO_PKG_VERSION"),
        };
        self.write("manifest.json", to_json(&m)? + "\n")?;
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Output(e.to_string()))
}

/// Prints `text` or, with an output directory, writes it to `name` there
/// together with the manifest.
fn emit(
    text: String,
    out_dir: Option<&Path>,
    name: &str,
    command: &str,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<String, CliError> {
    match out_dir {
        None => Ok(text),
        Some(dir) => {
            let out = OutDir::create(dir)?;
            let path = out.write(name, text)?;
            out.manifest(command, config, seed)?;
            Ok(format!("wrote {}\n", path.display()))
        }
    }
}

#[derive(Serialize)]
struct Tagged<T: Serialize> {
    variant: Variant,
    #[serde(flatten)]
    body: T,
}

pub fn solve(instance: &Path, variant: Option<Variant>) -> Result<String, CliError> {
    let inst: Instance = read_json(instance)?;
    let variant = inst.resolve_variant(variant);
    let text = match variant {
        Variant::Arc => to_json(&Tagged {
            variant,
            body: optimal_arc_distance(&inst.arc_problem()?),
        })?,
        Variant::Segment => to_json(&Tagged {
            variant,
            body: optimal_segment_distance(&inst.segment_problem()?)?,
        })?,
    };
    Ok(text + "\n")
}

fn check_resolution(resolution: f64) -> Result<(), CliError> {
    if resolution > 0.0 && resolution.is_finite() {
        Ok(())
    } else {
        Err(CliError::InvalidInput(format!("resolution must be positive, got {resolution}")))
    }
}

pub fn oracle(instance: &Path, variant: Option<Variant>, resolution: f64) -> Result<String, CliError> {
    check_resolution(resolution)?;
    let inst: Instance = read_json(instance)?;
    let variant = inst.resolve_variant(variant);
    let body: GridResult = match variant {
        Variant::Arc => grid_min_arc(&inst.arc_problem()?, resolution),
        Variant::Segment => grid_min_segment(&inst.segment_problem()?, resolution),
    };
    Ok(to_json(&Tagged { variant, body })? + "\n")
}

/// Dimensions cycled through by the sweep.
pub const SWEEP_DIMS: [usize; 4] = [3, 8, 64, 512];

#[derive(Debug, Clone, Copy, Serialize)]
struct SweepRow {
    index: usize,
    dim: usize,
    solver: f64,
    oracle: f64,
    difference: f64,
    bound: f64,
    ok: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solver against the grid oracle on `count` random instances with unit
/// Gaussian endpoints. An instance passes when the solver is no worse than
/// the grid (within 1e-9) and the grid is within `2·resolution·L` of it,
/// with `L = 1` for arcs and `‖u‖ + ‖v‖` for segments.
pub fn sweep(
    count: usize,
    variant: Variant,
    resolution: f64,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<String, CliError> {
    check_resolution(resolution)?;
    if count == 0 {
        return Err(CliError::InvalidInput("--sweep needs at least one instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    for index in 0..count {
        let dim = SWEEP_DIMS[index % SWEEP_DIMS.len()];
        let mut pt = || random_unit(&mut rng, dim);
        let (a, b, c, d) = (pt(), pt(), pt(), pt());
        let (solver, oracle, lipschitz) = match variant {
            Variant::Arc => {
                let p = ArcProblem::new(a, b, c, d)?;
                (optimal_arc_distance(&p).distance, grid_min_arc(&p, resolution).best_distance, 1.0)
            }
            Variant::Segment => {
                let p = SegmentProblem::new(a.into_inner(), b.into_inner(), c.into_inner(), d.into_inner())?;
                let l = norm(&p.u) + norm(&p.v);
                (optimal_segment_distance(&p)?.distance, grid_min_segment(&p, resolution).best_distance, l)
            }
        };
        let bound = 2.0 * resolution * lipschitz;
        let difference = oracle - solver;
        rows.push(SweepRow {
            index,
            dim,
            solver,
            oracle,
            difference,
            bound,
            ok: solver <= oracle + 1e-9 && difference <= bound,
        });
    }
    let abs: Vec<f64> = rows.iter().map(|r| r.difference.abs()).collect();
    let summary: Vec<(&str, String)> = vec![
        ("variant", format!("{variant:?}").to_lowercase()),
        ("instances", count.to_string()),
        ("resolution", resolution.to_string()),
        ("seed", seed.to_string()),
        ("max_abs_difference", abs.iter().copied().fold(0.0, f64::max).to_string()),
        ("mean_abs_difference", (abs.iter().sum::<f64>() / count as f64).to_string()),
        (
            "max_solver_minus_oracle",
            rows.iter().map(|r| -r.difference).fold(f64::NEG_INFINITY, f64::max).to_string(),
        ),
        ("violations", rows.iter().filter(|r| !r.ok).count().to_string()),
    ];
    let summary_csv = csv_text(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["statistic", "value"]).map_err(csv_err)?;
        for (k, v) in &summary {
            w.write_record([k, v.as_str()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    })?;
    match out_dir {
        None => Ok(summary_csv),
        Some(dir) => {
            let out = OutDir::create(dir)?;
            let rows_csv = csv_text(|buf| {
                let mut w = csv::Writer::from_writer(buf);
                for r in &rows {
                    w.serialize(r).map_err(csv_err)?;
                }
                w.flush().map_err(|e| CliError::Output(e.to_string()))
            })?;
            out.write("oracle_sweep.csv", rows_csv)?;
            let path = out.write("oracle_summary.csv", &summary_csv)?;
            out.manifest("oracle --sweep", None, Some(seed))?;
            Ok(format!("{summary_csv}wrote {}\n", path.display()))
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    config: &'a ExperimentConfig,
    summary: &'a [hardneg_core::trainer::LossSummary],
    final_evals: Vec<FinalEval<'a>>,
}

#[derive(Serialize)]
struct FinalEval<'a> {
    loss: LossKind,
    seed: u64,
    final_loss: f64,
    eval: &'a hardneg_core::trainer::EvalReport,
}

pub fn experiment(config: &Path, out_dir: &Path) -> Result<String, CliError> {
    let cfg: ExperimentConfig = read_json(config)?;
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    let out = OutDir::create(out_dir)?;
    let metrics = csv_text(|buf| Ok(result.write_metrics_csv(buf)?))?;
    out.write("metrics.csv", metrics)?;
    for &loss in &cfg.losses {
        let history = csv_text(|buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["seed", "step", "loss_value", "recall_at_1"]).map_err(csv_err)?;
            for r in result.runs.iter().filter(|r| r.loss == loss) {
                for h in &r.history {
                    w.write_record([
                        r.seed.to_string(),
                        h.step.to_string(),
                        h.loss.to_string(),
                        h.recall_at_1.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            w.flush().map_err(|e| CliError::Output(e.to_string()))
        })?;
        out.write(&format!("history_{loss}.csv"), history)?;
    }
    let summary = ExperimentSummary {
        config: &cfg,
        summary: &result.summary,
        final_evals: result
            .runs
            .iter()
            .map(|r| FinalEval {
                loss: r.loss,
                seed: r.seed,
                final_loss: r.history.last().map_or(f64::NAN, |h| h.loss),
                eval: &r.final_eval,
            })
            .collect(),
    };
    out.write("summary.json", to_json(&summary)?)?;
    out.manifest("experiment", Some(config), None)?;
    let mut text = String::from("loss,median_recall_at_1,median_nmi,median_f1,window_monotone_runs\n");
    for s in &result.summary {
        text += &format!(
            "{},{},{},{},{}/{}\n",
            s.loss, s.median_recall_at_1, s.median_nmi, s.median_f1, s.window_monotone_runs, s.runs
        );
    }
    Ok(text)
}

pub fn cases(instance: &Path, variant: Option<Variant>, out_dir: Option<&Path>) -> Result<String, CliError> {
    let inst: Instance = read_json(instance)?;
    let variant = inst.resolve_variant(variant);
    let text = match variant {
        Variant::Arc => {
            let p = inst.arc_problem()?;
            let set = enumerate_candidates(&p);
            let coeffs = *p.coeffs();
            let objective = move |a: f64, b: f64| coeffs.evaluate(a, b);
            svg::render(&Surface {
                title: format!("KKT candidates, arc pair (d = {:.6})", optimal_arc_distance(&p).distance),
                u_label: "α",
                v_label: "β",
                extent_u: p.alpha0(),
                extent_v: p.beta0(),
                objective: &objective,
                candidates: set
                    .candidates
                    .iter()
                    .map(|(k, ok)| CandidatePoint {
                        case_id: k.case_id,
                        u: k.alpha,
                        v: k.beta,
                        value: k.f_value,
                        feasible: *ok,
                    })
                    .collect(),
                winner: set.winner,
            })
        }
        Variant::Segment => {
            let p = inst.segment_problem()?;
            let all = enumerate_segment_candidates(&p)?;
            let best = optimal_segment_distance(&p)?;
            let winner = all
                .iter()
                .position(|(k, _)| *k == best.candidate)
                .ok_or_else(|| CliError::Output("optimum missing from candidate list".into()))?;
            let objective = |k1: f64, k2: f64| {
                let (a, b) = (p.point_x(k1), p.point_y(k2));
                0.5 * a.iter().zip(&b).map(|(s, t)| (s - t) * (s - t)).sum::<f64>()
            };
            svg::render(&Surface {
                title: format!("KKT candidates, segment pair (d = {:.6})", best.distance),
                u_label: "k1",
                v_label: "k2",
                extent_u: 1.0,
                extent_v: 1.0,
                objective: &objective,
                candidates: all
                    .iter()
                    .map(|(k, ok)| CandidatePoint {
                        case_id: k.case_id,
                        u: k.k1,
                        v: k.k2,
                        value: 0.5 * k.sq_distance,
                        feasible: *ok,
                    })
                    .collect(),
                winner,
            })
        }
    };
    emit(text, out_dir, "cases.svg", "cases", Some(instance), None)
}

pub fn table(batch: &Path, variant: Variant, out_dir: Option<&Path>) -> Result<String, CliError> {
    let b = read_batch(batch)?;
    let t = optimal_distance_table(&b, variant)?;
    let text = csv_text(|buf| Ok(t.write_csv(buf)?))?;
    emit(text, out_dir, "table.csv", "table", Some(batch), None)
}

#[derive(Serialize)]
struct LossReport<'a> {
    loss: LossKind,
    variant: Variant,
    config: &'a LossConfig,
    total: f64,
    terms: usize,
}

pub fn loss(
    batch: &Path,
    kind: LossKind,
    variant: Variant,
    config: Option<&Path>,
    margin: Option<f64>,
    out_dir: Option<&Path>,
) -> Result<String, CliError> {
    let b = read_batch(batch)?;
    let mut cfg: LossConfig = match config {
        Some(path) => read_json(path)?,
        None => LossConfig::default(),
    };
    if let Some(m) = margin {
        cfg.margin = m;
    }
    cfg.validate()?;
    let table = kind.uses_table().then(|| optimal_distance_table(&b, variant)).transpose()?;
    let value = losses::evaluate(kind, &b, table.as_ref(), &cfg)?;
    let report = to_json(&LossReport {
        loss: kind,
        variant,
        config: &cfg,
        total: value.total,
        terms: value.per_term.len(),
    })? + "\n";
    match out_dir {
        None => Ok(report),
        Some(dir) => {
            let out = OutDir::create(dir)?;
            out.write("loss.json", &report)?;
            out.write("terms.csv", csv_text(|buf| Ok(value.write_csv(buf)?))?)?;
            out.manifest("loss", config, None)?;
            Ok(report)
        }
    }
}

pub fn generate(spec: &SyntheticSpec, out_dir: Option<&Path>) -> Result<String, CliError> {
    let b = generate_synthetic(spec)?;
    let text = csv_text(|buf| Ok(b.write_csv(buf)?))?;
    emit(text, out_dir, "batch.csv", "generate", None, Some(spec.seed))
}
