//! Front end for the `qfactor` binary: argument handling, check batteries
//! and report rendering. [`run_args`] is the whole program minus process
//! exit, so it is testable in-process.

pub mod checks;
pub mod config;
pub mod output;

use std::collections::BTreeMap;

use qfactor::families::file::build_from_document;
use qfactor::families::{self, catalog, Family, FamilyDocument};

pub use config::{Cli, Command, Format, RunConfig, UsageError};
pub use output::{Check, Report, Status, Table};

use checks::Ctx;
use output::{checks_table, render_csv, render_json, render_text, Cell};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(err: impl std::fmt::Display) -> Self {
        Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {err}\n") }
    }
}

/// Parse `args` (including the program name) and run.
pub fn run_args<I, T>(args: I, env_tol: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    match RunConfig::from_cli(cli, env_tol) {
        Ok(cfg) => run(&cfg),
        Err(e) => Outcome::usage(e),
    }
}

pub fn load_family(cfg: &RunConfig) -> Result<Family, UsageError> {
    let q = cfg.q.unwrap_or(config::DEFAULT_Q);
    if let Some(path) = &cfg.family_file {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let doc = FamilyDocument::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        return build_from_document(&doc, cfg.q, &cfg.params).map_err(|e| UsageError(format!("{}: {e}", path.display())));
    }
    let name = cfg.family.as_deref().ok_or_else(|| UsageError("no family given".into()))?;
    families::build(name, q, &cfg.params).map_err(|e| UsageError(e.to_string()))
}

fn list(cfg: &RunConfig) -> Outcome {
    let entries = catalog();
    let stdout = match cfg.format {
        Format::Json => {
            let v: Vec<serde_json::Value> = entries
                .iter()
                .map(|e| serde_json::json!({ "name": e.name, "summary": e.summary, "defaults": e.default_params() }))
                .collect();
            let mut s = serde_json::to_string_pretty(&v).expect("catalog serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut t = Table::new(&["name", "defaults", "summary"]);
            for e in entries {
                let d: Vec<String> = e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
                t.push(vec![Cell::Text(e.name.into()), Cell::Text(d.join(";")), Cell::Text(e.summary.into())]);
            }
            render_csv(&t)
        }
        Format::Text => {
            let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
            entries
                .iter()
                .map(|e| {
                    let d: Vec<String> = e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let d = if d.is_empty() { String::new() } else { format!(" [{}]", d.join(", ")) };
                    format!("{:width$}  {}{d}\n", e.name, e.summary)
                })
                .collect()
        }
    };
    Outcome { code: EXIT_PASS, stdout, stderr: String::new() }
}

pub fn run(cfg: &RunConfig) -> Outcome {
    if cfg.command == Command::List {
        return list(cfg);
    }
    let fam = match load_family(cfg) {
        Ok(f) => f,
        Err(e) => return Outcome::usage(e),
    };
    let (report, table) = match execute(cfg, &fam) {
        Ok(r) => r,
        Err(e) => return Outcome::usage(e),
    };
    let stdout = match cfg.format {
        Format::Json => render_json(&report),
        Format::Csv => render_csv(&table.unwrap_or_else(|| checks_table(&report))),
        Format::Text => render_text(&report),
    };
    let code = if report.failed() { EXIT_FAIL } else { EXIT_PASS };
    let stderr = if report.failed() {
        report
            .checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| format!("check failed: {} (residual {}) {}\n", c.name, c.residual.map(|r| format!("{r:e}")).unwrap_or("-".into()), c.details))
            .collect()
    } else {
        String::new()
    };
    Outcome { code, stdout, stderr }
}

/// Runs the checks of one command against a built family.
pub fn execute(cfg: &RunConfig, fam: &Family) -> Result<(Report, Option<Table>), UsageError> {
    let ctx = Ctx::new(fam, cfg);
    let mut report = Report {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        family: Some(fam.name.clone()),
        params: fam.params.clone().into_iter().collect::<BTreeMap<_, _>>(),
        q: Some(fam.base()),
        checks: vec![],
        notes: vec![],
    };
    for n in &fam.notes {
        report.add_note(n.clone());
    }
    let mut table = None;
    let usage = |e: qfactor::Error| UsageError(e.to_string());
    match cfg.command {
        Command::List => unreachable!("handled by run"),
        Command::Info => report.checks.push(checks::info(&ctx)),
        Command::Pearson => {
            let (c, t) = checks::pearson(&ctx);
            report.checks.extend(c);
            table = Some(t);
        }
        Command::Eigencheck => {
            let (c, t) = checks::eigencheck(&ctx);
            report.checks.extend(c);
            table = Some(t);
        }
        Command::Spectrum => {
            let (c, t) = checks::spectrum(&ctx);
            report.checks.extend(c);
            table = Some(t);
        }
        Command::Factorize => {
            let rep = checks::search(&ctx);
            rep.notes.iter().for_each(|n| report.add_note(n.clone()));
            report.checks.extend(checks::factorize(&ctx, &rep));
        }
        Command::Ladder => {
            let rep = checks::search(&ctx);
            let (c, t) = checks::ladder(&ctx, &rep);
            report.checks.extend(c);
            table = Some(t);
        }
        Command::Shiftops => report.checks.extend(checks::shiftops(&ctx).map_err(usage)?),
        Command::Gram => {
            let rep = checks::search(&ctx);
            let (c, t) = checks::gram(&ctx, &rep);
            report.checks.extend(c);
            table = Some(t);
        }
        Command::Algebra => {
            let rep = checks::search(&ctx);
            let (c, notes) = checks::algebra(&ctx, &rep).map_err(usage)?;
            report.checks.extend(c);
            notes.into_iter().for_each(|n| report.add_note(n));
        }
        Command::Report => {
            report.checks.push(checks::info(&ctx));
            report.checks.extend(checks::pearson(&ctx).0);
            report.checks.extend(checks::spectrum(&ctx).0);
            report.checks.extend(checks::eigencheck(&ctx).0);
            let rep = checks::search(&ctx);
            rep.notes.iter().for_each(|n| report.add_note(n.clone()));
            report.checks.extend(checks::factorize(&ctx, &rep));
            report.checks.extend(checks::ladder(&ctx, &rep).0);
            if let Ok(c) = checks::shiftops(&ctx) {
                report.checks.extend(c);
            }
            report.checks.extend(checks::gram(&ctx, &rep).0);
            let (c, notes) = checks::algebra(&ctx, &rep).map_err(usage)?;
            report.checks.extend(c);
            notes.into_iter().for_each(|n| report.add_note(n));
        }
    }
    Ok((report, table))
}
