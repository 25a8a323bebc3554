use std::fmt::Write as _;
use std::path::Path;

use abelian_degen::balanced::{self, AbelianFiber};
use abelian_degen::expansion::monomial_expansion;
use abelian_degen::heisenberg::generators;
use abelian_degen::lattice::residues;
use abelian_degen::linalg::{format_rational, parse_rational};
use abelian_degen::monge_ampere::{self, default_reference_samples, TestFunction};
use abelian_degen::subdivision::build_subdivision;
use abelian_degen::theta::{ThetaContext, DEFAULT_IM_W_BOUND};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, Format};
use crate::CliError;

pub struct Output {
    pub text: String,
    /// Names of report checks that did not meet their tolerance.
    pub failed_checks: Vec<String>,
}

impl Output {
    fn clean(text: String) -> Self {
        Output { text, failed_checks: Vec::new() }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    match &cfg.command {
        Command::Subdivide => subdivide(cfg),
        Command::Ma { sup_gap, pairing, samples } => ma(cfg, *sup_gap, *pairing, *samples),
        Command::Theta { w, grad, expand, order } => theta(cfg, w, *grad, expand.as_deref(), *order),
        Command::Balanced { grid, defect_tol, volume_tol } => balanced_report(cfg, *grid, *defect_tol, *volume_tol),
        Command::Converge { ks, pairing, samples } => converge(cfg, ks, *pairing, *samples),
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn c(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn subdivide(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let sub = build_subdivision(&cfg.q, cfg.k)?;
    Ok(Output::clean(pretty(&sub.to_doc())))
}

fn samples_for(n: usize, samples: Option<usize>) -> usize {
    samples.unwrap_or_else(|| default_reference_samples(n))
}

fn ma(cfg: &ExperimentConfig, sup_gap: bool, pairing: Option<TestFunction>, samples: Option<usize>) -> Result<Output, CliError> {
    let sub = build_subdivision(&cfg.q, cfg.k)?;
    let measure = monge_ampere::ma_measure(&sub)?;
    let doc = measure.to_doc();
    let gap = if sup_gap { Some(monge_ampere::rescaled_sup_gap(&cfg.q, cfg.k)?) } else { None };
    let pair = match pairing {
        Some(f) => {
            let (lhs, rhs) =
                monge_ampere::weak_convergence_pairing(&cfg.q, cfg.k, |y: &[f64]| f.eval(y), samples_for(cfg.q.rank(), samples))?;
            Some((f, lhs, rhs))
        }
        None => None,
    };
    let text = match cfg.format {
        Format::Json => {
            let mut v = serde_json::to_value(&doc).expect("serializable");
            if let Some(g) = &gap {
                v["sup_gap"] = json!(format_rational(g));
            }
            if let Some((f, lhs, rhs)) = pair {
                v["pairing"] = json!({ "f": f.name(), "lhs": lhs, "rhs": rhs });
            }
            pretty(&v)
        }
        Format::Csv => {
            let n = cfg.q.rank();
            let mut s = String::new();
            let coords: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
            writeln!(s, "{},mass", coords.join(",")).unwrap();
            for a in &doc.atoms {
                let m: Vec<String> = a.m.iter().map(i64::to_string).collect();
                writeln!(s, "{},{}", m.join(","), a.mass).unwrap();
            }
            s
        }
    };
    Ok(Output::clean(text))
}

fn theta(cfg: &ExperimentConfig, w: &[Complex64], grad: bool, expand: Option<&[String]>, order: u32) -> Result<Output, CliError> {
    let t = cfg.t.expect("validated");
    let band = w.iter().map(|z| z.im.abs()).fold(DEFAULT_IM_W_BOUND, f64::max);
    let ctx = ThetaContext::with_policy(cfg.q.clone(), cfg.k, t, cfg.eps, band)?;
    let n = cfg.q.rank();
    let mut v = json!({
        "k": cfg.k,
        "t": c(t),
        "w": w.iter().map(|&z| c(z)).collect::<Vec<_>>(),
        "m": residues(cfg.k, n).iter().map(|m| m.0.clone()).collect::<Vec<_>>(),
        "truncation_radius": ctx.truncation_radius(),
    });
    if grad {
        let jet = ctx.theta_jet(w)?;
        v["values"] = json!(jet.values.iter().map(|&z| c(z)).collect::<Vec<_>>());
        v["grads"] = json!(jet.grads.iter().map(|g| g.iter().map(|&z| c(z)).collect::<Vec<_>>()).collect::<Vec<_>>());
    } else {
        let vals = ctx.theta_vector(w)?;
        v["values"] = json!(vals.values.iter().map(|&z| c(z)).collect::<Vec<_>>());
    }
    if let Some(vertex) = expand {
        let vertex = vertex
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| CliError::config(format!("--expand: cannot parse {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vertex.len() != n {
            return Err(CliError::config(format!("--expand vertex has {} coordinates, expected {n}", vertex.len())));
        }
        let sub = build_subdivision(&cfg.q, cfg.k)?;
        let mut series: Vec<Value> = Vec::new();
        for m in residues(cfg.k, n) {
            let terms = monomial_expansion(&sub, &vertex, &m, order)?;
            let terms: Vec<Value> = terms
                .iter()
                .map(|t| json!({ "v": t.monomial.m.0, "r": t.monomial.r, "z_exps": t.z_exps, "t_exp": t.t_exp }))
                .collect();
            series.push(json!({ "m": m.0, "terms": terms }));
        }
        v["expansion"] = json!({
            "vertex": vertex.iter().map(format_rational).collect::<Vec<_>>(),
            "order": order,
            "series": series,
        });
    }
    Ok(Output::clean(pretty(&v)))
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value < self.tolerance
    }
}

fn balanced_report(cfg: &ExperimentConfig, grid: usize, defect_tol: f64, volume_tol: f64) -> Result<Output, CliError> {
    let t = cfg.t.expect("validated");
    let n = cfg.q.rank();
    let fiber = AbelianFiber::with_policy(cfg.q.clone(), cfg.k, t, cfg.eps, 1.0)?;
    let g = balanced::gram_matrix(&fiber, grid)?;
    let defect = balanced::balanced_defect(&g);
    let expected = (cfg.k as f64).powi(n as i32);
    let vol_err = (g.volume - expected).abs() / expected;
    let gens: Vec<_> = generators(cfg.k, n).iter().map(|m| m.to_dense()).collect();
    let commutant = balanced::commutant_dimension(&gens)?;
    let commutators = balanced::commutator_norms(&g, &gens);
    let checks = [
        Check { name: "balanced_defect", value: defect, tolerance: defect_tol },
        Check { name: "volume_relative_error", value: vol_err, tolerance: volume_tol },
    ];
    let failed_checks: Vec<String> =
        checks.iter().filter(|c| !c.pass()).map(|c| c.name.to_string()).collect();
    let text = match cfg.format {
        Format::Json => pretty(&json!({
            "q": cfg.q,
            "k": cfg.k,
            "t": c(t),
            "grid": grid,
            "gram": g.entries.iter().map(|row| row.iter().map(|&z| c(z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "balanced_defect": defect,
            "fubini_volume": g.volume,
            "expected_volume": expected,
            "estimated_error": g.estimated_error,
            "commutant_dimension": commutant,
            "commutator_norms": commutators,
            "checks": checks.iter().map(|c| json!({
                "name": c.name, "value": c.value, "tolerance": c.tolerance, "pass": c.pass(),
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = String::from("quantity,value,tolerance,pass\n");
            for c in &checks {
                writeln!(s, "{},{},{},{}", c.name, c.value, c.tolerance, c.pass()).unwrap();
            }
            writeln!(s, "fubini_volume,{},,", g.volume).unwrap();
            writeln!(s, "estimated_error,{},,", g.estimated_error).unwrap();
            writeln!(s, "commutant_dimension,{commutant},,").unwrap();
            for (i, x) in commutators.iter().enumerate() {
                writeln!(s, "commutator_norm_{i},{x},,").unwrap();
            }
            for (i, row) in g.entries.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    writeln!(s, "gram_{i}_{j}_re,{},,", z.re).unwrap();
                    writeln!(s, "gram_{i}_{j}_im,{},,", z.im).unwrap();
                }
            }
            s
        }
    };
    Ok(Output { text, failed_checks })
}

fn converge(cfg: &ExperimentConfig, ks: &[u32], pairing: TestFunction, samples: Option<usize>) -> Result<Output, CliError> {
    let n = cfg.q.rank();
    let samples = samples_for(n, samples);
    let mut rows = Vec::new();
    for &k in ks {
        let gap = monge_ampere::rescaled_sup_gap(&cfg.q, k)?;
        let (lhs, rhs) = monge_ampere::weak_convergence_pairing(&cfg.q, k, |y: &[f64]| pairing.eval(y), samples)?;
        let sub = build_subdivision(&cfg.q, k)?;
        let mass = monge_ampere::ma_measure(&sub)?.total();
        rows.push((k, format_rational(&gap), lhs, rhs, format_rational(&mass)));
    }
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("k,sup_gap,pairing_lhs,pairing_rhs,ma_total_mass\n");
            for (k, gap, lhs, rhs, mass) in &rows {
                writeln!(s, "{k},{gap},{lhs},{rhs},{mass}").unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({
            "q": cfg.q,
            "pairing": pairing.name(),
            "rows": rows.iter().map(|(k, gap, lhs, rhs, mass)| json!({
                "k": k, "sup_gap": gap, "pairing_lhs": lhs, "pairing_rhs": rhs, "ma_total_mass": mass,
            })).collect::<Vec<_>>(),
        })),
    };
    Ok(Output::clean(text))
}
