use std::path::PathBuf;

use abelian_degen::lattice::QForm;
use abelian_degen::monge_ampere::TestFunction;
use abelian_degen::theta::DEFAULT_EPS;
use num_complex::Complex64;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Subdivide,
    Ma { sup_gap: bool, pairing: Option<TestFunction>, samples: Option<usize> },
    Theta { w: Vec<Complex64>, grad: bool, expand: Option<Vec<String>>, order: u32 },
    Balanced { grid: usize, defect_tol: f64, volume_tol: f64 },
    Converge { ks: Vec<u32>, pairing: TestFunction, samples: Option<usize> },
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Command,
    pub q: QForm,
    pub k: u32,
    pub t: Option<Complex64>,
    pub eps: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub fn max_level(n: usize) -> Option<u32> {
    match n {
        1 => Some(64),
        2 => Some(6),
        3 => Some(3),
        _ => None,
    }
}

/// Per-axis quadrature resolution used when `--grid` is absent.
pub fn default_grid(n: usize) -> usize {
    match n {
        1 => 64,
        2 => 24,
        _ => 8,
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.q.rank();
        let Some(limit) = max_level(n) else {
            return Err(CliError::config(format!("rank {n} is above the supported maximum 3")));
        };
        let ks: Vec<u32> = match &self.command {
            Command::Converge { ks, .. } => ks.clone(),
            _ => vec![self.k],
        };
        for k in ks {
            if k == 0 || k > limit {
                return Err(CliError::config(format!("k = {k} outside 1..={limit} for rank {n}")));
            }
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CliError::config(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        let needs_t = matches!(self.command, Command::Theta { .. } | Command::Balanced { .. });
        match self.t {
            None if needs_t => return Err(CliError::config("--t is required".into())),
            Some(t) if !(t.norm() > 0.0 && t.norm() < 1.0) => {
                return Err(CliError::config(format!("|t| = {} must lie in (0, 1)", t.norm())))
            }
            _ => {}
        }
        let csv_ok = matches!(self.command, Command::Ma { .. } | Command::Balanced { .. } | Command::Converge { .. });
        if self.format == Format::Csv && !csv_ok {
            return Err(CliError::config("this command only writes json".into()));
        }
        match &self.command {
            Command::Theta { w, .. } if w.len() != n => {
                Err(CliError::config(format!("--w has {} coordinates, expected {n}", w.len())))
            }
            Command::Balanced { grid, .. } if *grid < 8 => Err(CliError::config(format!("grid {grid} must be at least 8"))),
            Command::Ma { samples: Some(0), .. } | Command::Converge { samples: Some(0), .. } => {
                Err(CliError::config("--samples must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn parse_form(s: &str) -> Result<QForm, CliError> {
    let flat = parse_list::<i64>(s, "--Z")?;
    QForm::from_flat(&flat).map_err(CliError::from)
}

pub fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| CliError::config(format!("{flag}: cannot parse {x:?}"))))
        .collect()
}

/// `re,im` pairs.
pub fn parse_complex_list(s: &str, flag: &str) -> Result<Vec<Complex64>, CliError> {
    let xs = parse_list::<f64>(s, flag)?;
    if xs.len() % 2 != 0 || xs.is_empty() {
        return Err(CliError::config(format!("{flag}: expected re,im pairs")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config(format!("{flag}: non-finite value")));
    }
    Ok(xs.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

pub fn parse_pairing(s: &str) -> Result<TestFunction, CliError> {
    let name = s.strip_prefix("f=").unwrap_or(s);
    TestFunction::parse(name).ok_or_else(|| CliError::config(format!("unknown test function {name:?}; use one, sin2 or bump")))
}

pub fn default_eps() -> f64 {
    DEFAULT_EPS
}
