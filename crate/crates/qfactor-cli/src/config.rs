//! Command-line arguments and the validated run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qfactor::families::expr::{Env, Expr};
use qfactor::families::GridSpec;
use qfactor::qcore::QBase;
use qfactor::C64;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_Q: f64 = 0.5;
pub const TOL_ENV: &str = "QFACTOR_TOL";

#[derive(Debug, Parser)]
#[command(name = "qfactor", version, about = "Factorization checks for q-hypergeometric difference equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// catalog family name (see `qfactor list`)
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// parameter overrides, e.g. b=0.5,c=1; values may use q, e.g. alpha=-1/2 or a=q^(1/2)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub params: Option<String>,
    /// base q (default 0.5, or the value in --family-file)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// N (family grid with N points), real:START:STEP:COUNT or theta:LO:HI:COUNT
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// check tolerance (default 1e-8, or $QFACTOR_TOL)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// largest degree checked
    #[arg(long = "n-max", global = true, default_value_t = 8)]
    pub n_max: usize,
    /// output format (default text; json for `report`)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// family-definition document (TOML) used instead of --family
    #[arg(long = "family-file", global = true)]
    pub family_file: Option<PathBuf>,
    /// dimension of the truncated su_q(1,1) representation
    #[arg(long, global = true, default_value_t = 12)]
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// list catalog families
    List,
    /// lattice, support, grid and notes of a family
    Info,
    /// eigenvalues, recurrence defect and q-linearity class
    Spectrum,
    /// Pearson equation on the grid
    Pearson,
    /// eigen-equation residuals for n = 0..n-max
    Eigencheck,
    /// search for (alpha, varsigma, Lambda)
    Factorize,
    /// alpha-ladder or parameter-ladder checks
    Ladder,
    /// forward and backward shift identities
    Shiftops,
    /// Gram matrix and adjointness of the alpha-operators
    Gram,
    /// su_q(1,1) commutation relations in a truncated eigenbasis
    Algebra,
    /// full battery as one JSON document
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::List => "list",
            Command::Info => "info",
            Command::Spectrum => "spectrum",
            Command::Pearson => "pearson",
            Command::Eigencheck => "eigencheck",
            Command::Factorize => "factorize",
            Command::Ladder => "ladder",
            Command::Shiftops => "shiftops",
            Command::Gram => "gram",
            Command::Algebra => "algebra",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridArg {
    /// the family grid with this many points
    Count(usize),
    Spec(GridSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub family: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub q: Option<f64>,
    pub grid: Option<GridArg>,
    pub tol: f64,
    pub n_max: usize,
    pub format: Format,
    pub family_file: Option<PathBuf>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

impl RunConfig {
    /// `env_tol` is the value of QFACTOR_TOL, if set.
    pub fn from_cli(cli: Cli, env_tol: Option<&str>) -> Result<Self, UsageError> {
        let tol = match (cli.tol, env_tol) {
            (Some(t), _) => t,
            (None, Some(v)) => v.trim().parse().map_err(|_| usage(format!("{TOL_ENV}={v} is not a number")))?,
            (None, None) => DEFAULT_TOL,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(usage(format!("tolerance must be positive, got {tol}")));
        }
        if cli.n_max < 1 {
            return Err(usage("--n-max must be at least 1"));
        }
        if cli.dim < 4 {
            return Err(usage("--dim must be at least 4"));
        }
        if let Some(q) = cli.q {
            QBase::new(q).map_err(|e| usage(e.to_string()))?;
        }
        let needs_family = !matches!(cli.command, Command::List);
        if needs_family && cli.family.is_none() && cli.family_file.is_none() {
            return Err(usage(format!("`{}` needs --family or --family-file", cli.command.name())));
        }
        if cli.family.is_some() && cli.family_file.is_some() {
            return Err(usage("give either --family or --family-file, not both"));
        }
        if let Some(name) = &cli.family {
            qfactor::families::catalog::entry(name).map_err(|e| usage(format!("{e}; see `qfactor list`")))?;
        }
        let params = parse_params(cli.params.as_deref().unwrap_or(""), cli.q.unwrap_or(DEFAULT_Q))?;
        let grid = cli.grid.as_deref().map(parse_grid).transpose()?;
        let format = cli.format.unwrap_or(if cli.command == Command::Report { Format::Json } else { Format::Text });
        Ok(RunConfig {
            command: cli.command,
            family: cli.family,
            params,
            q: cli.q,
            grid,
            tol,
            n_max: cli.n_max,
            format,
            family_file: cli.family_file,
            dim: cli.dim,
        })
    }
}

/// `b=0.5,c=1`; values are expressions in q.
pub fn parse_params(src: &str, q: f64) -> Result<BTreeMap<String, f64>, UsageError> {
    let mut out = BTreeMap::new();
    for item in src.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| usage(format!("parameter '{item}' is not of the form name=value")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(usage(format!("empty parameter name in '{item}'")));
        }
        let e = Expr::parse(v.trim()).map_err(|e| usage(format!("parameter {k}: {e}")))?;
        let empty = BTreeMap::new();
        let env = Env { q, s: C64::new(0.0, 0.0), n: 0.0, params: &empty, extra: &[] };
        let val = e.eval(&env).map_err(|e| usage(format!("parameter {k}: {e}")))?;
        if val.im.abs() > 1e-14 * val.re.abs().max(1.0) || !val.re.is_finite() {
            return Err(usage(format!("parameter {k} = {val} is not a finite real number")));
        }
        if out.insert(k.to_string(), val.re).is_some() {
            return Err(usage(format!("parameter {k} given twice")));
        }
    }
    Ok(out)
}

pub fn parse_grid(src: &str) -> Result<GridArg, UsageError> {
    let bad = || usage(format!("grid '{src}' is not N, real:START:STEP:COUNT or theta:LO:HI:COUNT"));
    let parts: Vec<&str> = src.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let count = |s: &str| match s.parse::<usize>() {
        Ok(n) if n >= 4 => Ok(n),
        Ok(_) => Err(usage("a grid needs at least 4 points")),
        Err(_) => Err(bad()),
    };
    match parts.as_slice() {
        [n] => Ok(GridArg::Count(count(n)?)),
        ["real", start, step, n] => Ok(GridArg::Spec(GridSpec::Real { start: num(start)?, step: num(step)?, count: count(n)? })),
        ["theta", lo, hi, n] => Ok(GridArg::Spec(GridSpec::Theta { lo: num(lo)?, hi: num(hi)?, count: count(n)? })),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qfactor").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn params_with_expressions() {
        let p = parse_params("b=0.5, c=1,alpha=q^(-1/2)", 0.25).unwrap();
        assert_eq!(p["b"], 0.5);
        assert_eq!(p["c"], 1.0);
        assert!((p["alpha"] - 2.0).abs() < 1e-15);
        assert!(parse_params("b", 0.5).is_err());
        assert!(parse_params("b=1,b=2", 0.5).is_err());
        assert!(parse_params("b=zeta", 0.5).is_err());
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("12").unwrap(), GridArg::Count(12));
        assert!(matches!(parse_grid("real:0.3:0.5:10").unwrap(), GridArg::Spec(GridSpec::Real { count: 10, .. })));
        assert!(matches!(parse_grid("theta:0.1:3:8").unwrap(), GridArg::Spec(GridSpec::Theta { count: 8, .. })));
        assert!(parse_grid("2").is_err());
        assert!(parse_grid("spiral:1:2:3").is_err());
    }

    #[test]
    fn tolerance_precedence() {
        let c = RunConfig::from_cli(cli(&["eigencheck", "--family", "wall"]), Some("1e-6")).unwrap();
        assert_eq!(c.tol, 1e-6);
        let c = RunConfig::from_cli(cli(&["eigencheck", "--family", "wall", "--tol", "1e-3"]), Some("1e-6")).unwrap();
        assert_eq!(c.tol, 1e-3);
        let c = RunConfig::from_cli(cli(&["eigencheck", "--family", "wall"]), None).unwrap();
        assert_eq!(c.tol, DEFAULT_TOL);
        assert!(RunConfig::from_cli(cli(&["eigencheck", "--family", "wall"]), Some("abc")).is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::from_cli(cli(&["eigencheck"]), None).is_err());
        assert!(RunConfig::from_cli(cli(&["eigencheck", "--family", "nope"]), None).is_err());
        assert!(RunConfig::from_cli(cli(&["eigencheck", "--family", "wall", "--q", "1"]), None).is_err());
        assert!(RunConfig::from_cli(cli(&["eigencheck", "--family", "wall", "--n-max", "0"]), None).is_err());
        assert!(RunConfig::from_cli(cli(&["eigencheck", "--family", "wall", "--tol", "-1"]), None).is_err());
        assert!(RunConfig::from_cli(cli(&["list"]), None).is_ok());
    }

    #[test]
    fn report_defaults_to_json() {
        let c = RunConfig::from_cli(cli(&["report", "--family", "wall"]), None).unwrap();
        assert_eq!(c.format, Format::Json);
        let c = RunConfig::from_cli(cli(&["gram", "--family", "wall"]), None).unwrap();
        assert_eq!(c.format, Format::Text);
    }
}
