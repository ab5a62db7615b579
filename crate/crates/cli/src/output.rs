//! Artifact files: chains, threshold traces, SMC populations.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! file read back gives the same `f64` values bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use stratabc_core::samplers::{Chain, ThresholdEventKind};
use stratabc_core::smc::{ParticlePopulation, SmcGeneration};

use crate::error::{CliError, CliResult};

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Column names of the parameters as they are stored (log-scale coordinates
/// get a `log_` prefix).
pub fn param_columns(names: &[String], log_scale: &[bool]) -> Vec<String> {
    names.iter().zip(log_scale).map(|(n, &l)| if l { format!("log_{n}") } else { n.clone() }).collect()
}

/// Columns `iter, θ…, loglik, accepted, delta`.
pub fn chain_tsv(chain: &Chain) -> String {
    let mut out = String::with_capacity(chain.len() * 48);
    out.push_str("iter\t");
    for c in param_columns(&chain.names, &chain.log_scale) {
        out.push_str(&c);
        out.push('\t');
    }
    out.push_str("loglik\taccepted\tdelta\n");
    for (i, r) in chain.records.iter().enumerate() {
        let _ = write!(out, "{}", i + 1);
        for v in &r.theta {
            let _ = write!(out, "\t{v}");
        }
        let _ = writeln!(out, "\t{}\t{}\t{}", r.log_lik, u8::from(r.accepted), r.delta);
    }
    out
}

/// Columns `iter, delta, event`.
pub fn threshold_tsv(chain: &Chain) -> String {
    let mut out = String::from("iter\tdelta\tevent\n");
    for ev in &chain.threshold_trace {
        let kind = match ev.kind {
            ThresholdEventKind::Initial => "initial",
            ThresholdEventKind::Reduced => "reduced",
            ThresholdEventKind::Rescaled => "rescaled",
        };
        let _ = writeln!(out, "{}\t{}\t{kind}", ev.iter, ev.delta);
    }
    out
}

/// One row per SMC generation.
pub fn generations_tsv(trace: &[SmcGeneration]) -> String {
    let mut out = String::from("iteration\tdelta\tess\tresampled\tacceptance\tfallback\n");
    for g in trace {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            g.iteration,
            g.delta,
            g.ess_after_reweight,
            u8::from(g.resampled),
            g.acceptance,
            u8::from(g.fallback)
        );
    }
    out
}

pub fn population_header(columns: &[String]) -> String {
    format!("generation\tparticle\t{}\tweight\tdistance\n", columns.join("\t"))
}

/// Rows of one population, tagged with its generation.
pub fn population_rows(pop: &ParticlePopulation, out: &mut String) {
    for (i, p) in pop.particles.iter().enumerate() {
        let _ = write!(out, "{}\t{}", pop.iteration, i);
        for v in p {
            let _ = write!(out, "\t{v}");
        }
        let _ = writeln!(out, "\t{}\t{}", pop.weights[i], pop.distances[i]);
    }
}

/// A chain file read back: parameter columns and the remaining columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub columns: Vec<String>,
    pub theta: Vec<Vec<f64>>,
    pub log_lik: Vec<f64>,
    pub accepted: Vec<bool>,
    pub delta: Vec<f64>,
}

impl ChainTable {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn column(&self, j: usize, burn: usize) -> Vec<f64> {
        self.theta.iter().skip(burn).map(|t| t[j]).collect()
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| CliError::config("chain file is empty"))?.split('\t').collect();
        let p = header.len().checked_sub(4).filter(|_| header[0] == "iter" && header.ends_with(&["loglik", "accepted", "delta"]));
        let Some(p) = p else {
            return Err(CliError::config("chain file header must read: iter, parameters…, loglik, accepted, delta"));
        };
        let mut t = ChainTable { columns: header[1..=p].iter().map(|s| s.to_string()).collect(), theta: vec![], log_lik: vec![], accepted: vec![], delta: vec![] };
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != p + 4 {
                return Err(CliError::config(format!("chain file row {}: expected {} fields, found {}", i + 1, p + 4, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::config(format!("chain file row {}: not a number: {s:?}", i + 1)));
            t.theta.push(f[1..=p].iter().map(|s| num(s)).collect::<CliResult<_>>()?);
            t.log_lik.push(num(f[p + 1])?);
            t.accepted.push(match f[p + 2] {
                "1" => true,
                "0" => false,
                s => return Err(CliError::config(format!("chain file row {}: accepted must be 0 or 1, got {s:?}", i + 1))),
            });
            t.delta.push(num(f[p + 3])?);
        }
        Ok(t)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
