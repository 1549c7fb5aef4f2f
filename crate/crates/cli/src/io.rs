//! Dataset ingestion and artifact serialization.
//!
//! Tabular data is CSV with headers; structured artifacts are JSON. All
//! parsers read from `io::Read` so they can be driven by files, tests, and
//! fuzz targets alike. Ids must be dense and zero-based; every reference is
//! checked and reported with its row number.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use teps::estimate::PosteriorDraws;
use teps::market::{Program, Rol};
use teps::select::{EstimateSummary, SelectionResult};
use teps::sim::{Economy, FeasibleClass, FeasiblePartition, PriorityRule, RuleMode, TieBreak};

use crate::error::CliError;
use crate::Result;

/// Economy plus the student-level extras the estimation and counterfactual
/// stages need.
#[derive(Debug, Clone)]
pub struct ParsedEconomy {
    pub economy: Economy,
    /// Student covariate columns (named `x_*` in students.csv), row-major.
    pub student_covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// Optional `group` column for counterfactual aggregation.
    pub groups: Option<Vec<usize>>,
    /// Variance type per program (`var_type` column, default all zero).
    pub var_types: Vec<usize>,
    pub attribute_names: Vec<String>,
}

fn headers_of(reader: &mut csv::Reader<impl Read>) -> Result<Vec<String>> {
    Ok(reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

fn column(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::validation(format!("missing column {name:?}")))
}

fn parse_field<T: std::str::FromStr>(raw: &str, what: &str, row: usize) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::validation(format!("row {row}: cannot parse {what} from {raw:?}")))
}

/// One parsed program row before assembly into an economy.
#[derive(Debug, Clone)]
pub struct ProgramRow {
    pub program: Program,
    pub mode: RuleMode,
    pub zoned: bool,
    pub var_type: usize,
}

/// Parses `programs.csv`: columns `id, school_id, capacity, rule_mode,
/// n_groups` plus optional `zoned`, `var_type`, and any number of `attr_*`
/// columns. Ids must be dense and sorted.
pub fn parse_programs_csv(input: impl Read) -> Result<(Vec<ProgramRow>, Vec<String>)> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let id_col = column(&headers, "id")?;
    let school_col = column(&headers, "school_id")?;
    let capacity_col = column(&headers, "capacity")?;
    let mode_col = column(&headers, "rule_mode")?;
    let groups_col = column(&headers, "n_groups")?;
    let zoned_col = headers.iter().position(|h| h == "zoned");
    let var_col = headers.iter().position(|h| h == "var_type");
    let attr_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.starts_with("attr_").then_some(i))
        .collect();
    let attr_names = attr_cols
        .iter()
        .map(|&i| headers[i].clone())
        .collect::<Vec<_>>();

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2; // header is row 1
        let id: usize = parse_field(&record[id_col], "id", row)?;
        if id != rows.len() {
            return Err(CliError::validation(format!(
                "row {row}: program ids must be dense and sorted; expected {}, got {id}",
                rows.len()
            )));
        }
        let capacity: i64 = parse_field(&record[capacity_col], "capacity", row)?;
        if capacity < 0 {
            return Err(CliError::validation(format!(
                "row {row}: capacity {capacity} is negative"
            )));
        }
        let n_groups: u32 = parse_field(&record[groups_col], "n_groups", row)?;
        let mode = match record[mode_col].trim().to_ascii_lowercase().as_str() {
            "lottery" => RuleMode::LotteryCoarse { n_groups },
            "deterministic" => RuleMode::Deterministic,
            "exam" => RuleMode::Exam,
            other => {
                return Err(CliError::validation(format!(
                    "row {row}: unknown rule_mode {other:?}"
                )))
            }
        };
        let zoned = match zoned_col {
            Some(c) => parse_field::<u8>(&record[c], "zoned", row)? != 0,
            None => false,
        };
        let var_type = match var_col {
            Some(c) => parse_field(&record[c], "var_type", row)?,
            None => 0,
        };
        let mut program = Program::new(
            id,
            parse_field(&record[school_col], "school_id", row)?,
            capacity as usize,
        );
        for &c in &attr_cols {
            program
                .attributes
                .push(parse_field(&record[c], "attribute", row)?);
        }
        rows.push(ProgramRow {
            program,
            mode,
            zoned,
            var_type,
        });
    }
    if rows.is_empty() {
        return Err(CliError::validation("programs.csv has no rows"));
    }
    Ok((rows, attr_names))
}

/// Parsed `students.csv`: dense ids, `x_*` covariates, optional wide
/// priority columns `t_<program_id>`, optional `group`.
pub struct StudentTable {
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// `students x programs` intrinsic priorities when `t_*` columns exist.
    pub priorities: Option<Vec<Vec<f64>>>,
    pub groups: Option<Vec<usize>>,
}

pub fn parse_students_csv(input: impl Read, n_programs: usize) -> Result<StudentTable> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let id_col = column(&headers, "id")?;
    let x_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.starts_with("x_").then_some(i))
        .collect();
    let covariate_names = x_cols.iter().map(|&i| headers[i].clone()).collect();
    let group_col = headers.iter().position(|h| h == "group");
    let mut t_cols: Vec<(usize, usize)> = Vec::new(); // (program id, column)
    for (i, h) in headers.iter().enumerate() {
        if let Some(rest) = h.strip_prefix("t_") {
            let program: usize = rest.parse().map_err(|_| {
                CliError::validation(format!("priority column {h:?} does not name a program id"))
            })?;
            if program >= n_programs {
                return Err(CliError::validation(format!(
                    "priority column {h:?} references unknown program {program}"
                )));
            }
            t_cols.push((program, i));
        }
    }
    let has_priorities = !t_cols.is_empty();
    if has_priorities && t_cols.len() != n_programs {
        return Err(CliError::validation(format!(
            "students.csv has {} priority columns for {n_programs} programs",
            t_cols.len()
        )));
    }

    let mut covariates = Vec::new();
    let mut priorities = Vec::new();
    let mut groups = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let id: usize = parse_field(&record[id_col], "id", row)?;
        if id != covariates.len() {
            return Err(CliError::validation(format!(
                "row {row}: student ids must be dense and sorted; expected {}, got {id}",
                covariates.len()
            )));
        }
        let mut x = Vec::with_capacity(x_cols.len());
        for &c in &x_cols {
            x.push(parse_field(&record[c], "covariate", row)?);
        }
        covariates.push(x);
        if has_priorities {
            let mut t = vec![0.0; n_programs];
            for &(program, c) in &t_cols {
                t[program] = parse_field(&record[c], "priority", row)?;
            }
            priorities.push(t);
        }
        if let Some(c) = group_col {
            groups.push(parse_field(&record[c], "group", row)?);
        }
    }
    Ok(StudentTable {
        covariates,
        covariate_names,
        priorities: has_priorities.then_some(priorities),
        groups: group_col.map(|_| groups),
    })
}

/// Parses long-format `priorities.csv` (`student_id, program_id, value`).
pub fn parse_priorities_csv(
    input: impl Read,
    n_students: usize,
    n_programs: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let student_col = column(&headers, "student_id")?;
    let program_col = column(&headers, "program_id")?;
    let value_col = column(&headers, "value")?;
    let mut out = vec![vec![f64::NAN; n_programs]; n_students];
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let student: usize = parse_field(&record[student_col], "student_id", row)?;
        let program: usize = parse_field(&record[program_col], "program_id", row)?;
        if student >= n_students {
            return Err(CliError::validation(format!(
                "row {row}: dangling student id {student}"
            )));
        }
        if program >= n_programs {
            return Err(CliError::validation(format!(
                "row {row}: dangling program id {program}"
            )));
        }
        if !out[student][program].is_nan() {
            return Err(CliError::validation(format!(
                "row {row}: duplicate priority for student {student}, program {program}"
            )));
        }
        out[student][program] = parse_field(&record[value_col], "value", row)?;
    }
    for (student, trow) in out.iter().enumerate() {
        if let Some(program) = trow.iter().position(|v| v.is_nan()) {
            return Err(CliError::validation(format!(
                "missing priority for student {student}, program {program}"
            )));
        }
    }
    Ok(out)
}

/// Parses `rols.csv` (`student_id, rank, program_id`) into one list per
/// student. Ranks within a student must be unique; order inside the file is
/// irrelevant.
pub fn parse_rols_csv(input: impl Read, n_students: usize, n_programs: usize) -> Result<Vec<Rol>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let student_col = column(&headers, "student_id")?;
    let rank_col = column(&headers, "rank")?;
    let program_col = column(&headers, "program_id")?;
    let mut entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_students];
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let student: usize = parse_field(&record[student_col], "student_id", row)?;
        let rank: usize = parse_field(&record[rank_col], "rank", row)?;
        let program: usize = parse_field(&record[program_col], "program_id", row)?;
        if student >= n_students {
            return Err(CliError::validation(format!(
                "row {row}: dangling student id {student}"
            )));
        }
        if program >= n_programs {
            return Err(CliError::validation(format!(
                "row {row}: dangling program id {program}"
            )));
        }
        if let Some(previous) = seen.insert((student, rank), row) {
            return Err(CliError::validation(format!(
                "row {row}: duplicate rank {rank} for student {student} (also row {previous})"
            )));
        }
        entries[student].push((rank, program));
    }
    entries
        .into_iter()
        .enumerate()
        .map(|(student, mut ranked)| {
            ranked.sort_unstable();
            let list: Vec<usize> = ranked.into_iter().map(|(_, c)| c).collect();
            Rol::new(list).map_err(|e| CliError::validation(format!("student {student}: {e}")))
        })
        .collect()
}

/// Loads and cross-validates the full economy inputs.
pub fn parse_inputs(
    programs_path: &Path,
    students_path: &Path,
    priorities_path: Option<&Path>,
    tiebreak: TieBreak,
) -> Result<ParsedEconomy> {
    let (rows, attribute_names) = parse_programs_csv(open(programs_path)?)?;
    let n_programs = rows.len();
    let students = parse_students_csv(open(students_path)?, n_programs)?;
    let n_students = students.covariates.len();
    let priorities = match (students.priorities, priorities_path) {
        (Some(wide), None) => wide,
        (None, Some(path)) => parse_priorities_csv(open(path)?, n_students, n_programs)?,
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "provide either wide t_* columns or priorities.csv, not both",
            ))
        }
        (None, None) => vec![vec![0.0; n_programs]; n_students],
    };
    let modes: Vec<RuleMode> = rows.iter().map(|r| r.mode).collect();
    let zoned: Vec<bool> = rows.iter().map(|r| r.zoned).collect();
    let var_types: Vec<usize> = rows.iter().map(|r| r.var_type).collect();
    let programs: Vec<Program> = rows.into_iter().map(|r| r.program).collect();
    let mut economy = Economy::new(programs, PriorityRule { modes, tiebreak }, priorities)?;
    economy.zoned = zoned;
    Ok(ParsedEconomy {
        economy,
        student_covariates: students.covariates,
        covariate_names: students.covariate_names,
        groups: students.groups,
        var_types,
        attribute_names,
    })
}

/// Parses `rols.csv` against an already-parsed economy.
pub fn parse_rols_for(economy: &Economy, path: &Path) -> Result<Vec<Rol>> {
    parse_rols_csv(open(path)?, economy.n_students(), economy.n_programs())
}

/// Long-format per-(student, program) covariate matrix for the utility
/// model: `student_id, program_id` plus one column per parameter.
pub fn parse_xmat_csv(
    input: impl Read,
    n_students: usize,
    n_programs: usize,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let student_col = column(&headers, "student_id")?;
    let program_col = column(&headers, "program_id")?;
    let value_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != student_col && i != program_col)
        .collect();
    let p = value_cols.len();
    if p == 0 {
        return Err(CliError::validation("xmat has no covariate columns"));
    }
    let mut out = vec![vec![f64::NAN; n_programs * p]; n_students];
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let student: usize = parse_field(&record[student_col], "student_id", row)?;
        let program: usize = parse_field(&record[program_col], "program_id", row)?;
        if student >= n_students || program >= n_programs {
            return Err(CliError::validation(format!(
                "row {row}: dangling id ({student}, {program})"
            )));
        }
        for (j, &c) in value_cols.iter().enumerate() {
            let slot = &mut out[student][program * p + j];
            if !slot.is_nan() {
                return Err(CliError::validation(format!(
                    "row {row}: duplicate xmat entry ({student}, {program})"
                )));
            }
            *slot = parse_field(&record[c], "covariate", row)?;
        }
    }
    for (student, srow) in out.iter().enumerate() {
        if let Some(flat) = srow.iter().position(|v| v.is_nan()) {
            return Err(CliError::validation(format!(
                "missing xmat entry for student {student}, program {}",
                flat / p
            )));
        }
    }
    Ok((out, p))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| CliError::dependency(format!("cannot open {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

/// Exports an economy in the `programs.csv` schema.
pub fn write_programs_csv(
    out: impl std::io::Write,
    economy: &Economy,
    var_types: &[usize],
    attribute_names: &[String],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![
        "id".to_string(),
        "school_id".to_string(),
        "capacity".to_string(),
        "rule_mode".to_string(),
        "n_groups".to_string(),
        "zoned".to_string(),
        "var_type".to_string(),
    ];
    header.extend(attribute_names.iter().cloned());
    writer.write_record(&header)?;
    for (c, program) in economy.programs.iter().enumerate() {
        let (mode, n_groups) = match economy.rule.modes[c] {
            RuleMode::LotteryCoarse { n_groups } => ("lottery", n_groups),
            RuleMode::Deterministic => ("deterministic", 1),
            RuleMode::Exam => ("exam", 1),
        };
        let mut record = vec![
            program.id.to_string(),
            program.school_id.to_string(),
            program.capacity.to_string(),
            mode.to_string(),
            n_groups.to_string(),
            u8::from(economy.zoned[c]).to_string(),
            var_types.get(c).copied().unwrap_or(0).to_string(),
        ];
        record.extend(program.attributes.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

/// Exports students with wide priority columns and optional covariates.
pub fn write_students_csv(
    out: impl std::io::Write,
    economy: &Economy,
    covariates: &[Vec<f64>],
    covariate_names: &[String],
    groups: Option<&[usize]>,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let n_programs = economy.n_programs();
    let mut header = vec!["id".to_string()];
    header.extend(covariate_names.iter().cloned());
    if groups.is_some() {
        header.push("group".to_string());
    }
    header.extend((0..n_programs).map(|c| format!("t_{c}")));
    writer.write_record(&header)?;
    for i in 0..economy.n_students() {
        let mut record = vec![i.to_string()];
        if let Some(row) = covariates.get(i) {
            record.extend(row.iter().map(|v| v.to_string()));
        }
        if let Some(groups) = groups {
            record.push(groups[i].to_string());
        }
        record.extend((0..n_programs).map(|c| economy.intrinsic(i, c).to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

/// Exports lists in the `rols.csv` schema.
pub fn write_rols_csv(out: impl std::io::Write, rols: &[Rol]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["student_id", "rank", "program_id"])?;
    for (student, rol) in rols.iter().enumerate() {
        for (rank, &program) in rol.as_slice().iter().enumerate() {
            writer.write_record(&[student.to_string(), rank.to_string(), program.to_string()])?;
        }
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

/// Writes one cutoff vector per draw: `draw, cutoff_0, ..., cutoff_{C-1}`.
pub fn write_cutoffs_csv(out: impl std::io::Write, cutoffs: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let n_programs = cutoffs.first().map_or(0, Vec::len);
    let mut header = vec!["draw".to_string()];
    header.extend((0..n_programs).map(|c| format!("cutoff_{c}")));
    writer.write_record(&header)?;
    for (draw, row) in cutoffs.iter().enumerate() {
        let mut record = vec![draw.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionClassJson {
    bitmask: u128,
    assigned: Option<usize>,
    prob: f64,
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionsJson {
    n_draws: u64,
    /// student id (as string key) -> classes sorted by descending count
    partitions: std::collections::BTreeMap<String, Vec<PartitionClassJson>>,
}

/// Serializes per-student partitions as JSON keyed by student id.
pub fn write_partitions_json(
    out: impl std::io::Write,
    partitions: &[FeasiblePartition],
) -> Result<()> {
    let n_draws = partitions.first().map_or(0, |p| p.n_draws);
    let map = partitions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                i.to_string(),
                p.classes
                    .iter()
                    .map(|c| PartitionClassJson {
                        bitmask: c.feasible,
                        assigned: c.assigned,
                        prob: p.prob(c),
                        count: c.count,
                    })
                    .collect(),
            )
        })
        .collect();
    serde_json::to_writer_pretty(
        out,
        &PartitionsJson {
            n_draws,
            partitions: map,
        },
    )?;
    Ok(())
}

/// Reads partitions back; student keys must be dense.
pub fn read_partitions_json(input: impl Read) -> Result<Vec<FeasiblePartition>> {
    let parsed: PartitionsJson = serde_json::from_reader(input)?;
    let n_students = parsed.partitions.len();
    let mut out = vec![None; n_students];
    for (key, classes) in parsed.partitions {
        let id: usize = key
            .parse()
            .map_err(|_| CliError::validation(format!("partition key {key:?} is not an id")))?;
        if id >= n_students {
            return Err(CliError::validation(format!(
                "partition ids must be dense; {id} out of range for {n_students} students"
            )));
        }
        let classes: Vec<FeasibleClass> = classes
            .into_iter()
            .map(|c| FeasibleClass {
                feasible: c.bitmask,
                assigned: c.assigned,
                count: c.count,
            })
            .collect();
        let total: u64 = classes.iter().map(|c| c.count).sum();
        if total != parsed.n_draws {
            return Err(CliError::validation(format!(
                "student {id}: class counts sum to {total}, expected {}",
                parsed.n_draws
            )));
        }
        out[id] = Some(FeasiblePartition {
            classes,
            n_draws: parsed.n_draws,
        });
    }
    out.into_iter()
        .enumerate()
        .map(|(id, p)| {
            p.ok_or_else(|| CliError::validation(format!("missing partition for student {id}")))
        })
        .collect()
}

/// Relations as CSV rows `student_id, preferred_program, dispreferred_program`.
pub fn write_relations_csv(
    out: impl std::io::Write,
    relations: &[teps::infer::RelationSet],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["student_id", "preferred_program", "dispreferred_program"])?;
    for (student, rels) in relations.iter().enumerate() {
        for (x, y) in rels.pairs() {
            writer.write_record(&[student.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

pub fn read_relations_csv(
    input: impl Read,
    n_students: usize,
    n_programs: usize,
) -> Result<Vec<teps::infer::RelationSet>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let student_col = column(&headers, "student_id")?;
    let x_col = column(&headers, "preferred_program")?;
    let y_col = column(&headers, "dispreferred_program")?;
    let mut out = vec![teps::infer::RelationSet::new(n_programs); n_students];
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let student: usize = parse_field(&record[student_col], "student_id", row)?;
        let x: usize = parse_field(&record[x_col], "preferred_program", row)?;
        let y: usize = parse_field(&record[y_col], "dispreferred_program", row)?;
        if student >= n_students {
            return Err(CliError::validation(format!(
                "row {row}: dangling student id {student}"
            )));
        }
        if x >= n_programs || y >= n_programs || x == y {
            return Err(CliError::validation(format!(
                "row {row}: invalid relation ({x}, {y})"
            )));
        }
        out[student].insert(x, y);
    }
    Ok(out)
}

/// Flat posterior draw table: `chain, iter, param, value`. Sigma draws are
/// stored as params `sigma2_<type>` after the beta coordinates.
pub fn write_draws_csv(out: impl std::io::Write, draws: &PosteriorDraws) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["chain", "iter", "param", "value"])?;
    for (chain, (betas, sigmas)) in draws.beta.iter().zip(&draws.sigma2).enumerate() {
        for (iter, (beta, sigma)) in betas.iter().zip(sigmas).enumerate() {
            for (j, value) in beta.iter().enumerate() {
                writer.write_record(&[
                    chain.to_string(),
                    iter.to_string(),
                    format!("beta_{j}"),
                    value.to_string(),
                ])?;
            }
            for (t, value) in sigma.iter().enumerate() {
                writer.write_record(&[
                    chain.to_string(),
                    iter.to_string(),
                    format!("sigma2_{t}"),
                    value.to_string(),
                ])?;
            }
        }
    }
    writer.flush().map_err(CliError::from)?;
    Ok(())
}

pub fn read_draws_csv(input: impl Read) -> Result<PosteriorDraws> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = headers_of(&mut reader)?;
    let chain_col = column(&headers, "chain")?;
    let iter_col = column(&headers, "iter")?;
    let param_col = column(&headers, "param")?;
    let value_col = column(&headers, "value")?;
    let mut beta: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut sigma: Vec<Vec<Vec<f64>>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let chain: usize = parse_field(&record[chain_col], "chain", row)?;
        let iter: usize = parse_field(&record[iter_col], "iter", row)?;
        let value: f64 = parse_field(&record[value_col], "value", row)?;
        let param = record[param_col].trim().to_string();
        while beta.len() <= chain {
            beta.push(Vec::new());
            sigma.push(Vec::new());
        }
        while beta[chain].len() <= iter {
            beta[chain].push(Vec::new());
            sigma[chain].push(Vec::new());
        }
        if let Some(j) = param.strip_prefix("beta_") {
            let j: usize = parse_field(j, "param index", row)?;
            let slot = &mut beta[chain][iter];
            if slot.len() != j {
                return Err(CliError::validation(format!(
                    "row {row}: out-of-order beta index {j}"
                )));
            }
            slot.push(value);
        } else if param.strip_prefix("sigma2_").is_some() {
            sigma[chain][iter].push(value);
        } else {
            return Err(CliError::validation(format!(
                "row {row}: unknown param {param:?}"
            )));
        }
    }
    if beta.is_empty() || beta[0].is_empty() {
        return Err(CliError::validation("draw table is empty"));
    }
    let n_params = beta[0][0].len();
    let mut mean = vec![0.0; n_params];
    let mut count = 0usize;
    for chain in &beta {
        for draw in chain {
            if draw.len() != n_params {
                return Err(CliError::validation("ragged draw table"));
            }
            for (m, v) in mean.iter_mut().zip(draw) {
                *m += v;
            }
            count += 1;
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut cov = vec![vec![0.0; n_params]; n_params];
    for chain in &beta {
        for draw in chain {
            for j in 0..n_params {
                for l in 0..n_params {
                    cov[j][l] += (draw[j] - mean[j]) * (draw[l] - mean[l]);
                }
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= (count.max(2) - 1) as f64;
        }
    }
    Ok(PosteriorDraws {
        beta,
        sigma2: sigma,
        mean,
        cov,
    })
}

/// Posterior summary JSON: label, point estimate, covariance, diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryJson {
    pub summary: EstimateSummary,
    pub psrf: Option<Vec<f64>>,
    pub n_retained: usize,
}

pub fn write_summary_json(out: impl std::io::Write, summary: &SummaryJson) -> Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

pub fn read_summary_json(input: impl Read) -> Result<SummaryJson> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_selection_json(out: impl std::io::Write, result: &SelectionResult) -> Result<()> {
    serde_json::to_writer_pretty(out, result)?;
    Ok(())
}

/// Run manifest: enough to replay a stage byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub version: String,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, cfg: &crate::config::RunConfig) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            config_hash: format!("{:016x}", cfg.hash()),
            config: cfg
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub fn write_manifest(out: impl std::io::Write, manifest: &Manifest) -> Result<()> {
    serde_json::to_writer_pretty(out, manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn programs_roundtrip_with_attributes() {
        let csv = "id,school_id,capacity,rule_mode,n_groups,zoned,var_type,attr_quality\n\
                   0,0,10,lottery,4,0,0,1.5\n\
                   1,0,0,deterministic,1,1,1,2.5\n";
        let (rows, names) = parse_programs_csv(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(names, vec!["attr_quality"]);
        assert_eq!(rows[0].mode, RuleMode::LotteryCoarse { n_groups: 4 });
        assert!(rows[1].zoned);
        assert_eq!(rows[1].program.capacity, 0);
        assert_eq!(rows[1].program.attributes, vec![2.5]);
    }

    #[test]
    fn negative_capacity_is_rejected() {
        let csv = "id,school_id,capacity,rule_mode,n_groups\n0,0,-3,lottery,4\n";
        let err = parse_programs_csv(csv.as_bytes()).unwrap_err();
        assert!(err.message.contains("negative"), "{}", err.message);
    }

    #[test]
    fn rols_report_dangling_ids_with_rows() {
        let csv = "student_id,rank,program_id\n0,0,1\n0,1,7\n";
        let err = parse_rols_csv(csv.as_bytes(), 1, 3).unwrap_err();
        assert!(err.message.contains("row 3"), "{}", err.message);
        assert!(err.message.contains("dangling program id 7"));
    }

    #[test]
    fn duplicate_student_rank_is_rejected() {
        let csv = "student_id,rank,program_id\n0,0,1\n0,0,2\n";
        let err = parse_rols_csv(csv.as_bytes(), 1, 3).unwrap_err();
        assert!(err.message.contains("duplicate rank"));
    }

    #[test]
    fn partitions_json_roundtrip() {
        let rol = Rol::new(vec![2, 0]).unwrap();
        let p = FeasiblePartition::from_counts([(0b101u128, 30), (0b001, 70)], &rol);
        let mut buf = Vec::new();
        write_partitions_json(&mut buf, &[p.clone()]).unwrap();
        let back = read_partitions_json(buf.as_slice()).unwrap();
        assert_eq!(back, vec![p]);
    }

    #[test]
    fn draws_roundtrip_preserves_summary() {
        let draws = PosteriorDraws {
            beta: vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]]],
            sigma2: vec![vec![vec![1.0], vec![1.5]]],
            mean: vec![2.0, 3.0],
            cov: vec![vec![2.0, 2.0], vec![2.0, 2.0]],
        };
        let mut buf = Vec::new();
        write_draws_csv(&mut buf, &draws).unwrap();
        let back = read_draws_csv(buf.as_slice()).unwrap();
        assert_eq!(back.beta, draws.beta);
        assert_eq!(back.sigma2, draws.sigma2);
        assert_eq!(back.mean, draws.mean);
        assert_eq!(back.cov, draws.cov);
    }
}
