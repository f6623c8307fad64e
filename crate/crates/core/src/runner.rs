//! Runs an [`ExperimentConfig`] and writes its reports.
//!
//! The JSON report holds the version, the result-determining config
//! entries, their hash, the master seed, the verdict and the result. It
//! contains no timings or worker counts, so identical configs give
//! byte-identical reports.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, ExperimentConfig, Format};
use crate::defect::{invariant_structure_defect, DefectSettings};
use crate::error::{Error, Result};
use crate::expansion::{find_minimal_n, scan_all_n, ExpansionReport, MinimalNSearch, ScanSettings};
use crate::output::{csv_text, heatmap_svg};
use crate::seed::derive_seed;
use crate::spectrum::{nonrandom_stable_test, stable_direction, top_lyapunov, DirectionSample, StableVerdict};
use crate::walk::{
    finite_orbit_detect, run_orbit, smoothing_check, weyl_report, EquidistributionVerdict, OrbitTrace, OrbitVerdict,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status when the run succeeded but contradicted `expect=`.
pub const EXIT_MISMATCH: i32 = 2;

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub command: Command,
    pub verdict: String,
    /// 0, or [`EXIT_MISMATCH`] when `expect=` disagrees with the verdict.
    pub exit_code: i32,
    pub report: Value,
    /// The JSON report as written.
    pub json: String,
    pub files: Vec<PathBuf>,
}

/// Secondary artifacts of a command.
#[derive(Default)]
struct Artifacts {
    /// `(suffix, contents)` pairs, written as `<prefix>.<suffix>.csv`.
    csv: Vec<(&'static str, String)>,
    svg: Option<String>,
}

struct Executed {
    verdict: String,
    result: Value,
    artifacts: Artifacts,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Executes the experiment on a pool of `config.workers` threads and
/// writes the requested files when `output` is set.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::range("workers", e.to_string()))?;
    let executed = pool.install(|| execute(config))?;

    let expect_met = config.expect.as_ref().map(|e| *e == executed.verdict);
    let mut report = Map::new();
    report.insert("tool".into(), json!("uniexp"));
    report.insert("version".into(), json!(VERSION));
    report.insert("command".into(), json!(config.command.name()));
    let mut cfg = Map::new();
    for (k, v) in config.result_entries() {
        cfg.insert(k.to_string(), Value::String(v));
    }
    report.insert("config".into(), Value::Object(cfg));
    report.insert("config_hash".into(), json!(config.hash()));
    report.insert("master_seed".into(), json!(config.master_seed));
    report.insert("verdict".into(), json!(executed.verdict));
    report.insert("expect".into(), json!(config.expect));
    report.insert("expect_met".into(), json!(expect_met));
    report.insert("result".into(), executed.result);
    let report = Value::Object(report);
    let json = serde_json::to_string_pretty(&report)? + "\n";

    let mut files = Vec::new();
    if let Some(prefix) = &config.output {
        if let Some(parent) = PathBuf::from(prefix).parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut write = |suffix: &str, contents: &str| -> Result<()> {
            let path = PathBuf::from(format!("{prefix}.{suffix}"));
            std::fs::write(&path, contents)?;
            files.push(path);
            Ok(())
        };
        if config.formats.contains(&Format::Json) {
            write("report.json", &json)?;
        }
        if config.formats.contains(&Format::Csv) {
            for (suffix, text) in &executed.artifacts.csv {
                write(&format!("{suffix}.csv"), text)?;
            }
        }
        if config.formats.contains(&Format::Svg) {
            if let Some(svg) = &executed.artifacts.svg {
                write("heatmap.svg", svg)?;
            }
        }
    }

    Ok(RunOutcome {
        command: config.command,
        verdict: executed.verdict,
        exit_code: if expect_met == Some(false) { EXIT_MISMATCH } else { 0 },
        report,
        json,
        files,
    })
}

/// Rebuilds a config from the `config` block of a JSON report.
pub fn config_from_report(report: &Value) -> Result<ExperimentConfig> {
    let block = report
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::parse(0, "report has no config block"))?;
    let mut text = String::new();
    for (k, v) in block {
        text.push_str(&format!("{k}={}\n", v.as_str().unwrap_or_default()));
    }
    ExperimentConfig::parse(&text)
}

fn execute(config: &ExperimentConfig) -> Result<Executed> {
    let m = &config.measure;
    let task_seed = derive_seed(config.master_seed, 0);
    match config.command {
        Command::Verify | Command::ScanN => {
            let settings = ScanSettings {
                grid: config.grid(),
                threshold: config.threshold,
                n_max: config.n_max,
                policy: config.mode_policy(),
                certify: config.certify,
                seed: config.master_seed,
            };
            let search = if config.command == Command::Verify {
                find_minimal_n(m, &settings)?
            } else {
                scan_all_n(m, &settings)?
            };
            expansion_outputs(&search)
        }
        Command::Lyapunov => {
            let est = top_lyapunov(m, config.x0, config.theta0, config.n_steps, config.n_batches, task_seed)?;
            let verdict = if est.lambda1 - est.ci_halfwidth > 0.0 {
                "positive"
            } else {
                "nonpositive"
            };
            Ok(Executed {
                verdict: verdict.into(),
                result: to_value(&est)?,
                artifacts: Artifacts::default(),
            })
        }
        Command::Stable => {
            let d = stable_direction(m, config.x0, config.n, task_seed)?;
            Ok(Executed {
                verdict: "direction".into(),
                result: to_value(&d)?,
                artifacts: Artifacts {
                    csv: vec![("directions", directions_csv(std::slice::from_ref(&d))?)],
                    svg: None,
                },
            })
        }
        Command::Nonrandom => {
            let r = nonrandom_stable_test(
                m,
                config.x0,
                config.n,
                config.n_omegas,
                config.tolerance,
                config.master_seed,
            )?;
            let verdict = match r.verdict {
                StableVerdict::NonRandomCandidate => "nonrandom",
                StableVerdict::Random => "random",
            };
            Ok(Executed {
                verdict: verdict.into(),
                result: to_value(&r)?,
                artifacts: Artifacts {
                    csv: vec![("directions", directions_csv(&r.samples)?)],
                    svg: None,
                },
            })
        }
        Command::Defect => {
            let settings = DefectSettings {
                test_points: config.test_points,
                starts: config.starts,
                ..DefectSettings::default()
            };
            let r = invariant_structure_defect(m, config.kind, config.degree, &settings, config.master_seed)?;
            let rows: Vec<Vec<String>> = r
                .minimizer
                .iter()
                .enumerate()
                .map(|(i, c)| vec![i.to_string(), c.to_string()])
                .collect();
            Ok(Executed {
                verdict: if r.invariant_candidate {
                    "invariant"
                } else {
                    "noninvariant"
                }
                .into(),
                result: to_value(&r)?,
                artifacts: Artifacts {
                    csv: vec![("coefficients", csv_text(&["index", "value"], rows)?)],
                    svg: None,
                },
            })
        }
        Command::Orbit => {
            let trace = run_orbit(m, config.x0, config.orbit_len, task_seed)?;
            let v = finite_orbit_detect(&trace, config.tol)?;
            let verdict = match v {
                OrbitVerdict::FiniteCandidate(_) => "finite",
                OrbitVerdict::Infinite => "infinite",
            };
            Ok(Executed {
                verdict: verdict.into(),
                result: json!({
                    "n": trace.len(),
                    "x0": trace.x0,
                    "seed": trace.seed,
                    "tol": config.tol,
                    "orbit": v,
                }),
                artifacts: Artifacts {
                    csv: vec![("orbit", orbit_csv(&trace)?)],
                    svg: None,
                },
            })
        }
        Command::Equidist => {
            let trace = run_orbit(m, config.x0, config.orbit_len, task_seed)?;
            let r = weyl_report(&trace, config.f)?;
            let verdict = match r.verdict {
                EquidistributionVerdict::Equidistributing => "equidistributing",
                EquidistributionVerdict::Suspicious => "suspicious",
            };
            Ok(Executed {
                verdict: verdict.into(),
                result: to_value(&r)?,
                artifacts: Artifacts {
                    csv: vec![("orbit", orbit_csv(&trace)?)],
                    svg: None,
                },
            })
        }
        Command::Smoothing => {
            let r = smoothing_check(m, config.x0, config.samples, config.g, task_seed)?;
            let g = r.g;
            let scale = (g * g) as f64 / r.samples as f64;
            let rows: Vec<Vec<String>> = r
                .histogram
                .iter()
                .map(|row| row.iter().map(|c| c.to_string()).collect())
                .collect();
            let header: Vec<String> = (0..g).map(|ix| format!("ix{ix}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let svg = heatmap_svg(
                g,
                g,
                |ix, iy| r.histogram[iy][ix] as f64 * scale,
                "two-step empirical density",
            );
            Ok(Executed {
                verdict: if r.visible { "visible" } else { "invisible" }.into(),
                result: to_value(&r)?,
                artifacts: Artifacts {
                    csv: vec![("grid", csv_text(&header, rows)?)],
                    svg: Some(svg),
                },
            })
        }
    }
}

fn expansion_outputs(search: &MinimalNSearch) -> Result<Executed> {
    let verdict = if search.found.is_some() { "found" } else { "notfound" };
    let mut result = to_value(search)?;
    let note = match search.found {
        Some(n) => format!("min E_N exceeds the threshold first at N = {n}"),
        None => format!(
            "no N <= {} exceeded the threshold; this is inconclusive, not a proof that expansion fails",
            search.n_max
        ),
    };
    if let Value::Object(map) = &mut result {
        map.insert("note".into(), json!(note));
    }

    let trace_rows: Vec<Vec<String>> = search.trace.iter().map(trace_row).collect();
    let mut csv = vec![(
        "trace",
        csv_text(
            &[
                "N",
                "mode",
                "branches",
                "min_value",
                "grid_min_value",
                "argmin_x",
                "argmin_y",
                "argmin_theta",
                "stderr_max",
                "argmin_stderr",
                "certified_lower_bound",
                "exceeds_threshold",
            ],
            trace_rows,
        )?,
    )];
    let last = search.trace.last().expect("scan evaluates at least one N");
    csv.push(("grid", grid_csv(last)?));
    let grid = last.grid;
    let svg = heatmap_svg(
        grid.nx,
        grid.ny,
        |ix, iy| last.base_minima[ix * grid.ny + iy],
        &format!("min over angle of E_{} on the base grid", last.n),
    );
    Ok(Executed {
        verdict: verdict.into(),
        result,
        artifacts: Artifacts { csv, svg: Some(svg) },
    })
}

fn trace_row(r: &ExpansionReport) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.mode.to_string(),
        r.branches.to_string(),
        r.min_value.to_string(),
        r.grid_min_value.to_string(),
        r.argmin.base.x().to_string(),
        r.argmin.base.y().to_string(),
        r.argmin.theta().to_string(),
        r.stderr_max.to_string(),
        r.argmin_stderr.to_string(),
        r.certified_lower_bound.map(|v| v.to_string()).unwrap_or_default(),
        r.exceeds_threshold().to_string(),
    ]
}

fn grid_csv(r: &ExpansionReport) -> Result<String> {
    let g = r.grid;
    let rows = (0..g.base_count()).flat_map(|i| {
        let p = g.base_point(i);
        (0..g.ntheta).map(move |k| {
            let idx = i * g.ntheta + k;
            vec![
                p.x().to_string(),
                p.y().to_string(),
                g.angle(k).to_string(),
                r.node_values[idx].to_string(),
                r.node_stderrs[idx].to_string(),
            ]
        })
    });
    csv_text(&["x", "y", "theta", "value", "stderr"], rows)
}

fn directions_csv(samples: &[DirectionSample]) -> Result<String> {
    let rows = samples.iter().map(|d| {
        vec![
            d.omega_seed.to_string(),
            d.base.x().to_string(),
            d.base.y().to_string(),
            d.n.to_string(),
            d.direction.to_string(),
            d.gap.to_string(),
        ]
    });
    csv_text(&["omega_seed", "x", "y", "n", "direction", "gap"], rows)
}

fn orbit_csv(trace: &OrbitTrace) -> Result<String> {
    let rows = trace
        .points
        .iter()
        .enumerate()
        .map(|(j, p)| vec![j.to_string(), p.x().to_string(), p.y().to_string()]);
    csv_text(&["j", "x", "y"], rows)
}
