//! Stage implementations behind the subcommands. Every stage reads its
//! inputs, writes its artifacts plus a manifest into `out_dir`, and returns
//! the list of files it produced.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use teps::estimate::{gibbs_estimate, psrf, GibbsConfig, UtilitySpec};
use teps::experiments::{
    evaluate_counterfactual, run_monte_carlo, Dgp, McConfig, McGibbsSettings, Policy,
    PreferenceSource,
};
use teps::infer::{teps_infer, wtt_infer, AttentionParam};
use teps::select::{select_model, EstimateSummary, MethodLabel};
use teps::sim::{build_feasible_partition, simulate_cutoff_distribution, PartitionMode, TieBreak};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Manifest, SummaryJson};
use crate::Result;

fn tiebreak(cfg: &RunConfig) -> Result<TieBreak> {
    match cfg.get("tiebreak").unwrap_or("stb") {
        "stb" => Ok(TieBreak::Stb),
        "mtb" => Ok(TieBreak::Mtb),
        other => Err(CliError::validation(format!("unknown tiebreak {other:?}"))),
    }
}

fn load_economy(cfg: &RunConfig) -> Result<io::ParsedEconomy> {
    let programs = cfg.require_path("programs")?;
    let students = cfg.require_path("students")?;
    let priorities = match cfg.get("priorities") {
        Some(_) => Some(cfg.require_path("priorities")?),
        None => None,
    };
    io::parse_inputs(&programs, &students, priorities.as_deref(), tiebreak(cfg)?)
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out_dir.join(name))?))
}

fn finish_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    cfg: &RunConfig,
    mut produced: Vec<PathBuf>,
) -> Result<Vec<PathBuf>> {
    let name = format!("manifest_{command}.json");
    let mut writer = create(out_dir, &name)?;
    io::write_manifest(&mut writer, &Manifest::new(command, seed, cfg))?;
    writer.flush()?;
    produced.push(out_dir.join(name));
    Ok(produced)
}

/// `simulate-cutoffs`: lottery draws through deferred acceptance on the
/// submitted lists, one cutoff vector per draw.
pub fn simulate_cutoffs(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let parsed = load_economy(cfg)?;
    let rols = io::parse_rols_for(&parsed.economy, &cfg.require_path("rols")?)?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    let n_draws: u64 = cfg.parse_value("n_draws", 1000)?;
    let cutoffs = simulate_cutoff_distribution(&parsed.economy, &rols, n_draws, seed)?;
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "cutoffs.csv")?;
    io::write_cutoffs_csv(&mut writer, &cutoffs)?;
    writer.flush()?;
    finish_manifest(
        &out_dir,
        "simulate-cutoffs",
        seed,
        cfg,
        vec![out_dir.join("cutoffs.csv")],
    )
}

/// `partition`: per-student feasible-set equivalence classes.
pub fn partition(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let parsed = load_economy(cfg)?;
    let rols = io::parse_rols_for(&parsed.economy, &cfg.require_path("rols")?)?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    let n_draws: u64 = cfg.parse_value("n_draws", 1000)?;
    let mode = match cfg.get("mode").unwrap_or("joint") {
        "joint" => PartitionMode::Joint,
        "independent" => PartitionMode::Independent,
        other => return Err(CliError::validation(format!("unknown mode {other:?}"))),
    };
    let partitions = build_feasible_partition(&parsed.economy, &rols, n_draws, seed, mode)?;
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "partitions.json")?;
    io::write_partitions_json(&mut writer, &partitions)?;
    writer.flush()?;
    finish_manifest(
        &out_dir,
        "partition",
        seed,
        cfg,
        vec![out_dir.join("partitions.json")],
    )
}

/// `infer`: preference relations from partitions and lists, under weak
/// truth-telling (`method = wtt`) or stability-plus-transitivity
/// (`method = teps`, with attention `tau`).
pub fn infer(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let parsed = load_economy(cfg)?;
    let n_programs = parsed.economy.n_programs();
    let rols = io::parse_rols_for(&parsed.economy, &cfg.require_path("rols")?)?;
    let method = cfg.get("method").unwrap_or("teps");
    let relations = match method {
        "wtt" => rols.iter().map(|rol| wtt_infer(rol, n_programs)).collect(),
        "teps" => {
            let partitions =
                io::read_partitions_json(File::open(cfg.require_path("partitions")?)?)?;
            if partitions.len() != rols.len() {
                return Err(CliError::validation(format!(
                    "{} partitions for {} students",
                    partitions.len(),
                    rols.len()
                )));
            }
            let tau = AttentionParam::new(cfg.parse_value("tau", 100.0)?)?;
            rols.iter()
                .zip(&partitions)
                .map(|(rol, partition)| teps_infer(partition, rol, tau, n_programs))
                .collect::<teps::Result<Vec<_>>>()?
        }
        other => return Err(CliError::validation(format!("unknown method {other:?}"))),
    };
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "relations.csv")?;
    io::write_relations_csv(&mut writer, &relations)?;
    writer.flush()?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    finish_manifest(
        &out_dir,
        "infer",
        seed,
        cfg,
        vec![out_dir.join("relations.csv")],
    )
}

fn gibbs_config(cfg: &RunConfig, seed: u64) -> Result<GibbsConfig> {
    let defaults = GibbsConfig::default();
    Ok(GibbsConfig {
        n_iter: cfg.parse_value("gibbs_iter", defaults.n_iter)?,
        burn_in: cfg.parse_value("gibbs_burn", defaults.burn_in)?,
        thin: cfg.parse_value("gibbs_thin", defaults.thin)?,
        n_chains: cfg.parse_value("gibbs_chains", defaults.n_chains)?,
        seed,
        ..defaults
    })
}

fn parse_label(raw: &str) -> Result<MethodLabel> {
    match raw {
        "wtt" | "WTT" => Ok(MethodLabel::Wtt),
        "top" | "teps-top" | "TEPS^top" => Ok(MethodLabel::TepsTop),
        other => {
            let tau = other
                .trim_start_matches("teps-")
                .trim_start_matches("TEPS^")
                .parse::<u8>()
                .map_err(|_| CliError::validation(format!("unknown label {other:?}")))?;
            Ok(MethodLabel::Teps(tau))
        }
    }
}

/// `estimate`: Gibbs posterior under the relations in `relations`, with
/// per-(student, program) covariates from `xmat` and variance types from
/// the `var_type` column of programs.csv.
pub fn estimate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let parsed = load_economy(cfg)?;
    let n_students = parsed.economy.n_students();
    let n_programs = parsed.economy.n_programs();
    let (covariates, n_params) = io::parse_xmat_csv(
        File::open(cfg.require_path("xmat")?)?,
        n_students,
        n_programs,
    )?;
    let relations = io::read_relations_csv(
        File::open(cfg.require_path("relations")?)?,
        n_students,
        n_programs,
    )?;
    let normalized: usize = cfg.parse_value("normalized_type", 0)?;
    let spec = UtilitySpec::new(covariates, parsed.var_types.clone(), normalized, n_params)?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    let gibbs = gibbs_config(cfg, seed)?;
    let draws = gibbs_estimate(&relations, &spec, &gibbs)?;
    let label = parse_label(cfg.get("label").unwrap_or("teps-100"))?;
    let diagnostics = if gibbs.n_chains >= 2 {
        let mut values = Vec::new();
        for j in 0..n_params {
            values.push(psrf(&draws.beta_chains(j)).map_err(CliError::from)?);
        }
        Some(values)
    } else {
        None
    };
    let summary = SummaryJson {
        summary: EstimateSummary::new(label, draws.mean.clone(), draws.cov.clone())?,
        psrf: diagnostics,
        n_retained: draws.n_retained(),
    };
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "draws.csv")?;
    io::write_draws_csv(&mut writer, &draws)?;
    writer.flush()?;
    let mut writer = create(&out_dir, "summary.json")?;
    io::write_summary_json(&mut writer, &summary)?;
    writer.flush()?;
    finish_manifest(
        &out_dir,
        "estimate",
        seed,
        cfg,
        vec![out_dir.join("draws.csv"), out_dir.join("summary.json")],
    )
}

/// `select`: sequential testing ladder over previously written summaries
/// (`estimates` is a comma-separated list of summary.json paths; the
/// attention-0 summary anchors the ladder).
pub fn select(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let raw = cfg.require("estimates")?;
    let mut summaries = Vec::new();
    for part in raw.split(',') {
        let path = PathBuf::from(part.trim());
        if !path.exists() {
            return Err(CliError::dependency(format!(
                "estimate summary {part:?} does not exist"
            )));
        }
        summaries.push(io::read_summary_json(File::open(&path)?)?.summary);
    }
    let top = summaries
        .iter()
        .find(|s| s.label == MethodLabel::TepsTop)
        .cloned()
        .ok_or_else(|| CliError::validation("selection requires a TEPS^top summary"))?;
    let alpha: f64 = cfg.parse_value("alpha", 0.05)?;
    let grid = cfg.tau_grid()?;
    let result = select_model(&summaries, &top, &grid, alpha)?;
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "selection.json")?;
    io::write_selection_json(&mut writer, &result)?;
    writer.flush()?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    finish_manifest(
        &out_dir,
        "select",
        seed,
        cfg,
        vec![out_dir.join("selection.json")],
    )
}

fn parse_dgps(cfg: &RunConfig) -> Result<Vec<Dgp>> {
    cfg.get("dgps")
        .unwrap_or("tt,mis-irr,mis-rel")
        .split(',')
        .map(|raw| match raw.trim().to_ascii_lowercase().as_str() {
            "tt" => Ok(Dgp::Tt),
            "mis-irr" | "mis_irr" => Ok(Dgp::MisIrr),
            "mis-rel" | "mis_rel" => Ok(Dgp::MisRel),
            other => Err(CliError::validation(format!("unknown dgp {other:?}"))),
        })
        .collect()
}

/// `montecarlo`: the full synthetic replication pipeline; emits one CSV per
/// replication table plus the manifest.
pub fn montecarlo(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let defaults = McConfig::default();
    let seed: u64 = cfg.parse_value("seed", 0)?;
    let mc = McConfig {
        n_students: cfg.parse_value("mc_students", defaults.n_students)?,
        n_samples: cfg.parse_value("mc_samples", defaults.n_samples)?,
        n_cutoff_draws: cfg.parse_value("mc_cutoff_draws", defaults.n_cutoff_draws)?,
        tt_cutoff_samples: cfg.parse_value("mc_tt_cutoff_samples", defaults.tt_cutoff_samples)?,
        tt_cutoff_draws: cfg.parse_value("mc_tt_cutoff_draws", defaults.tt_cutoff_draws)?,
        seed,
        ..defaults
    };
    let gibbs_defaults = McGibbsSettings::default();
    let gibbs = McGibbsSettings {
        n_iter: cfg.parse_value("gibbs_iter", gibbs_defaults.n_iter)?,
        burn_in: cfg.parse_value("gibbs_burn", gibbs_defaults.burn_in)?,
        thin: cfg.parse_value("gibbs_thin", gibbs_defaults.thin)?,
        n_chains: cfg.parse_value("gibbs_chains", gibbs_defaults.n_chains)?,
    };
    let dgps = parse_dgps(cfg)?;
    let grid = cfg.tau_grid()?;
    let alpha: f64 = cfg.parse_value("alpha", 0.05)?;
    let tables = run_monte_carlo(&mc, &dgps, &grid, &gibbs, alpha)?;

    let out_dir = cfg.out_dir()?;
    let mut produced = Vec::new();

    let mut writer = csv::Writer::from_writer(create(&out_dir, "table_behavior.csv")?);
    writer.write_record([
        "dgp",
        "mean_rol_length",
        "wtt_share",
        "stable_share",
        "mistake_share",
        "fallback_students",
    ])?;
    for (dgp, stats) in &tables.behavior {
        writer.write_record(&[
            dgp.to_string(),
            stats.mean_rol_length.to_string(),
            stats.wtt_share.to_string(),
            stats.stable_share.to_string(),
            stats.mistake_share.to_string(),
            stats.fallback_students.to_string(),
        ])?;
    }
    writer.flush()?;
    produced.push(out_dir.join("table_behavior.csv"));

    let mut writer = csv::Writer::from_writer(create(&out_dir, "table_estimates.csv")?);
    let p = mc.true_beta.len();
    let mut header = vec!["dgp".to_string(), "method".to_string()];
    for j in 0..p {
        header.push(format!("mean_{j}"));
        header.push(format!("sd_{j}"));
        header.push(format!("rmse_{j}"));
    }
    writer.write_record(&header)?;
    for row in &tables.estimates {
        let mut record = vec![row.dgp.to_string(), row.label.to_string()];
        for j in 0..p {
            record.push(row.mean[j].to_string());
            record.push(row.sd[j].to_string());
            record.push(row.rmse[j].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    produced.push(out_dir.join("table_estimates.csv"));

    let mut writer = csv::Writer::from_writer(create(&out_dir, "table_selection.csv")?);
    writer.write_record(["dgp", "method", "selected_share"])?;
    for (dgp, label, share) in &tables.selection {
        writer.write_record(&[dgp.to_string(), label.to_string(), share.to_string()])?;
    }
    writer.flush()?;
    produced.push(out_dir.join("table_selection.csv"));

    finish_manifest(&out_dir, "montecarlo", seed, cfg, produced)
}

fn parse_policy(cfg: &RunConfig) -> Result<Policy> {
    cfg.get("policy")
        .unwrap_or("none")
        .parse()
        .map_err(|e: teps::Error| CliError::validation(e.to_string()))
}

/// `counterfactual`: policy evaluation from posterior draws. Preferences
/// come from the posterior utility model (`draws` + `xmat`); students are
/// grouped by the `group` column (or `group_by = <covariate name>`).
pub fn counterfactual(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let parsed = load_economy(cfg)?;
    let n_students = parsed.economy.n_students();
    let n_programs = parsed.economy.n_programs();
    let (covariates, _) = io::parse_xmat_csv(
        File::open(cfg.require_path("xmat")?)?,
        n_students,
        n_programs,
    )?;
    let draws = io::read_draws_csv(File::open(cfg.require_path("draws")?)?)?;
    let groups: Vec<usize> = match cfg.get("group_by") {
        Some(name) => {
            let idx = parsed
                .covariate_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    CliError::validation(format!("group_by column {name:?} not in students.csv"))
                })?;
            parsed
                .student_covariates
                .iter()
                .map(|row| row[idx] as usize)
                .collect()
        }
        None => parsed
            .groups
            .clone()
            .ok_or_else(|| CliError::validation("no group column and no group_by key"))?,
    };
    let policy = parse_policy(cfg)?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    let source = PreferenceSource::Posterior {
        draws: &draws,
        covariates: &covariates,
        program_types: &parsed.var_types,
    };
    let report = evaluate_counterfactual(
        &parsed.economy,
        &source,
        policy,
        cfg.parse_value("pref_draws", 200)?,
        cfg.parse_value("lottery_draws", 200)?,
        &groups,
        seed,
    )?;
    let out_dir = cfg.out_dir()?;
    let mut writer = create(&out_dir, "counterfactual.json")?;
    serde_json::to_writer_pretty(&mut writer, &report)?;
    writer.flush()?;
    finish_manifest(
        &out_dir,
        "counterfactual",
        seed,
        cfg,
        vec![out_dir.join("counterfactual.json")],
    )
}

/// `report`: human-readable digest of whatever artifacts sit in `out_dir`.
pub fn report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out_dir = cfg.out_dir()?;
    let mut text = String::new();
    text.push_str("run artifacts\n=============\n");
    for name in [
        "cutoffs.csv",
        "partitions.json",
        "relations.csv",
        "draws.csv",
        "summary.json",
        "selection.json",
        "table_behavior.csv",
        "table_estimates.csv",
        "table_selection.csv",
        "counterfactual.json",
    ] {
        let path = out_dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = std::fs::metadata(&path)?.len();
        text.push_str(&format!("\n[{name}] ({bytes} bytes)\n"));
        match name {
            "summary.json" => {
                let summary = io::read_summary_json(File::open(&path)?)?;
                text.push_str(&format!(
                    "  label {} point estimate {:?}\n",
                    summary.summary.label, summary.summary.beta
                ));
                if let Some(psrf) = summary.psrf {
                    text.push_str(&format!("  psrf {psrf:?}\n"));
                }
            }
            "selection.json" => {
                let selection: teps::select::SelectionResult =
                    serde_json::from_reader(File::open(&path)?)?;
                text.push_str(&format!("  chosen {}\n", selection.chosen));
                for entry in &selection.ladder {
                    text.push_str(&format!(
                        "  vs {}: stat {:.4}, df {}, p {:.4}, {}\n",
                        entry.comparison,
                        entry.stat,
                        entry.df,
                        entry.p_value,
                        if entry.rejected {
                            "rejected"
                        } else {
                            "not rejected"
                        }
                    ));
                }
            }
            _ if name.ends_with(".csv") => {
                let content = std::fs::read_to_string(&path)?;
                for line in content.lines().take(6) {
                    text.push_str("  ");
                    text.push_str(line);
                    text.push('\n');
                }
                let rows = content.lines().count().saturating_sub(1);
                text.push_str(&format!("  ... {rows} data rows\n"));
            }
            _ => {}
        }
    }
    let path = out_dir.join("report.txt");
    std::fs::write(&path, text)?;
    let seed: u64 = cfg.parse_value("seed", 0)?;
    finish_manifest(&out_dir, "report", seed, cfg, vec![path])
}
