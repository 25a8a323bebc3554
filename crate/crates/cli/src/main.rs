use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod config;
mod run;

use config::{Command, ExperimentConfig, Format};

#[derive(Debug)]
pub struct CliError {
    /// 2 for configuration errors, 3 for numerical certification failures.
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 2, kind: "config", message }
    }

    pub fn numeric(message: String) -> Self {
        CliError { code: 3, kind: "numeric", message }
    }

    fn emit(&self) -> ExitCode {
        eprintln!("{}", json!({ "error": self.kind, "code": self.code, "message": self.message }));
        ExitCode::from(self.code)
    }
}

impl From<abelian_degen::Error> for CliError {
    fn from(e: abelian_degen::Error) -> Self {
        use abelian_degen::Error::*;
        match e {
            WindowExhausted(_) | UnsupportedChart(_) | OutsideImBand { .. } | NotPositiveDefiniteMetric(_) | SingularGenerator(_) => {
                CliError::numeric(e.to_string())
            }
            _ => CliError::config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "abdegen", version, about = "Toric degenerations of principally polarized abelian varieties")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct Common {
    /// Quadratic form as a flat row-major list, e.g. 2,1,1,2
    #[arg(long = "Z", value_name = "ENTRIES", allow_hyphen_values = true)]
    z: String,
    #[arg(long)]
    k: u32,
    /// Output path; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Cells of the periodic decomposition
    Subdivide {
        #[command(flatten)]
        common: Common,
    },
    /// Monge-Ampere measure of phi on the quotient torus
    Ma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sup_gap: bool,
        /// Test function for the weak pairing: one, sin2 or bump (f=name also accepted)
        #[arg(long)]
        pairing: Option<String>,
        /// Reference midpoint samples per axis
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Theta values, gradients and local expansions
    Theta {
        #[command(flatten)]
        common: Common,
        /// Base point as re,im
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        /// Evaluation point as re,im pairs
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        #[arg(long)]
        grad: bool,
        /// Vertex of the decomposition for the monomial chart, e.g. vertex=0
        #[arg(long, allow_hyphen_values = true)]
        expand: Option<String>,
        /// Expansion terms have |nu| <= order
        #[arg(long, default_value_t = 2)]
        order: u32,
        #[arg(long, default_value_t = config::default_eps())]
        eps: f64,
    },
    /// Gram matrix of the theta basis and balanced-embedding checks
    Balanced {
        #[arg(long = "Z", value_name = "ENTRIES", allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        /// Quadrature points per axis (default 64, 24 or 8 for rank 1, 2, 3)
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        report: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-5)]
        defect_tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        volume_tol: f64,
        #[arg(long, default_value_t = config::default_eps())]
        eps: f64,
    },
    /// Sup-norm and weak convergence over a list of levels (CSV)
    Converge {
        #[arg(long = "Z", value_name = "ENTRIES", allow_hyphen_values = true)]
        z: String,
        /// Comma-separated levels
        #[arg(long)]
        k: String,
        #[arg(long, default_value = "sin2")]
        pairing: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn build(cli: Cli) -> Result<ExperimentConfig, CliError> {
    let eps_default = config::default_eps();
    let cfg = match cli.command {
        Sub::Subdivide { common } => ExperimentConfig {
            command: Command::Subdivide,
            q: config::parse_form(&common.z)?,
            k: common.k,
            t: None,
            eps: eps_default,
            out: common.out,
            format: common.format,
        },
        Sub::Ma { common, sup_gap, pairing, samples } => ExperimentConfig {
            command: Command::Ma { sup_gap, pairing: pairing.as_deref().map(config::parse_pairing).transpose()?, samples },
            q: config::parse_form(&common.z)?,
            k: common.k,
            t: None,
            eps: eps_default,
            out: common.out,
            format: common.format,
        },
        Sub::Theta { common, t, w, grad, expand, order, eps } => {
            let expand = expand.map(|s| {
                let s = s.strip_prefix("vertex=").unwrap_or(&s).to_string();
                s.split(',').map(|x| x.trim().to_string()).collect()
            });
            ExperimentConfig {
                command: Command::Theta { w: config::parse_complex_list(&w, "--w")?, grad, expand, order },
                q: config::parse_form(&common.z)?,
                k: common.k,
                t: Some(single_complex(&t)?),
                eps,
                out: common.out,
                format: common.format,
            }
        }
        Sub::Balanced { z, k, t, grid, report, out, defect_tol, volume_tol, eps } => {
            let q = config::parse_form(&z)?;
            let grid = grid.unwrap_or_else(|| config::default_grid(q.rank()));
            ExperimentConfig {
                command: Command::Balanced { grid, defect_tol, volume_tol },
                q,
                k,
                t: Some(single_complex(&t)?),
                eps,
                out,
                format: report,
            }
        }
        Sub::Converge { z, k, pairing, samples, out, format } => {
            let ks = config::parse_list::<u32>(&k, "--k")?;
            ExperimentConfig {
                command: Command::Converge { ks: ks.clone(), pairing: config::parse_pairing(&pairing)?, samples },
                q: config::parse_form(&z)?,
                k: ks.iter().copied().max().unwrap_or(0),
                t: None,
                eps: eps_default,
                out,
                format,
            }
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn single_complex(s: &str) -> Result<num_complex::Complex64, CliError> {
    let v = config::parse_complex_list(s, "--t")?;
    if v.len() != 1 {
        return Err(CliError::config("--t takes a single re,im pair".into()));
    }
    Ok(v[0])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("");
            return CliError::config(first.trim_start_matches("error: ").to_string()).emit();
        }
    };
    let result = build(cli).and_then(|cfg| {
        let output = run::run(&cfg)?;
        run::write_output(cfg.out.as_deref(), &output.text)?;
        match output.failed_checks.is_empty() {
            true => Ok(()),
            false => Err(CliError::numeric(format!("checks failed: {}", output.failed_checks.join(", ")))),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.emit(),
    }
}
