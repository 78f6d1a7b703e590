//! Chain file format.
//!
//! Tab-separated, one row per stored draw, preceded by `#` header lines
//! carrying the model, M, the sampler configuration and acceptance counts:
//!
//! ```text
//! # secr-chain v1
//! # model M3
//! # m 80
//! # config {"n_iter":5000,...}
//! # acceptance {"counts":{...}}
//! psi  phi  omega0  sigma  loglik  log_prior  log_latent_prior  z  u  L  S  ll
//! ```
//!
//! `z` and `u` are 0/1 strings, `L` lists true indices by detector-2 row,
//! `S` is `x:y` pairs joined by `;`, and `ll` the per-individual terms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Acceptance, Chain, Draw, McmcConfig};
use crate::error::{Error, Result};
use crate::model::{LatentState, ModelId, ModelParams, Permutation, Point};

pub const CHAIN_MAGIC: &str = "# secr-chain v1";

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn write_chain_string(chain: &Chain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHAIN_MAGIC}");
    let _ = writeln!(out, "# model {}", chain.model);
    let _ = writeln!(out, "# m {}", chain.m);
    let _ = writeln!(
        out,
        "# config {}",
        serde_json::to_string(&chain.config).expect("config serialises")
    );
    let _ = writeln!(
        out,
        "# acceptance {}",
        serde_json::to_string(&chain.acceptance).expect("counts serialise")
    );
    let mut cols: Vec<&str> = chain.model.active_params().iter().map(|p| p.name()).collect();
    cols.extend(["loglik", "log_prior", "log_latent_prior", "z", "u", "L", "S", "ll"]);
    let _ = writeln!(out, "{}", cols.join("\t"));
    for (d, draw) in chain.draws.iter().enumerate() {
        for v in draw.params.to_vec(chain.model) {
            let _ = write!(out, "{v:?}\t");
        }
        let lat = &draw.latent;
        let _ = write!(
            out,
            "{:?}\t{:?}\t{:?}\t{}\t{}\t",
            chain.loglik[d],
            chain.log_prior[d],
            chain.log_latent_prior[d],
            bits(&lat.z),
            bits(&lat.u)
        );
        let l: Vec<String> = lat.l.as_slice().iter().map(|v| v.to_string()).collect();
        let s: Vec<String> = lat.s.iter().map(|p| format!("{:?}:{:?}", p.x, p.y)).collect();
        let ll: Vec<String> = chain.individual_logliks(d).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}\t{}\t{}", l.join(","), s.join(";"), ll.join(","));
    }
    out
}

pub fn parse_chain(text: &str, context: &str) -> Result<Chain> {
    let perr = |line: usize, msg: String| Error::parse(format!("{context}:{line}"), msg);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == CHAIN_MAGIC => {}
        Some((_, l)) if l.starts_with("# secr-chain") => {
            return Err(Error::Schema(format!("{context}: unsupported chain version `{l}`")))
        }
        _ => return Err(perr(1, "missing `# secr-chain v1` header".into())),
    }
    let mut model = None;
    let mut m = None;
    let mut config = None;
    let mut acceptance = Acceptance::default();
    let mut header_seen = false;
    let mut draws = Vec::new();
    let mut loglik = Vec::new();
    let mut log_prior = Vec::new();
    let mut log_latent_prior = Vec::new();
    let mut per_individual = Vec::new();
    for (no, line) in lines {
        let no = no + 1;
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "model" => model = Some(value.parse::<ModelId>()?),
                "m" => {
                    m = Some(value.parse::<usize>().map_err(|e| perr(no, e.to_string()))?)
                }
                "config" => {
                    config = Some(
                        serde_json::from_str::<McmcConfig>(value)
                            .map_err(|e| perr(no, e.to_string()))?,
                    )
                }
                "acceptance" => {
                    acceptance = serde_json::from_str(value).map_err(|e| perr(no, e.to_string()))?
                }
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let model = model.ok_or_else(|| perr(no, "model line missing".into()))?;
        let m = m.ok_or_else(|| perr(no, "m line missing".into()))?;
        let n_par = model.active_params().len();
        if !header_seen {
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != n_par + 8 {
            return Err(perr(no, format!("expected {} columns, found {}", n_par + 8, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(no, format!("bad number `{s}`")));
        let values = f[..n_par].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let params = ModelParams::from_slice(model, &values);
        loglik.push(num(f[n_par])?);
        log_prior.push(num(f[n_par + 1])?);
        log_latent_prior.push(num(f[n_par + 2])?);
        let parse_bits = |s: &str| -> Result<Vec<bool>> {
            if s.len() != m {
                return Err(perr(no, format!("bit string of length {} (M = {m})", s.len())));
            }
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(perr(no, format!("bad bit `{c}`"))),
                })
                .collect()
        };
        let z = parse_bits(f[n_par + 3])?;
        let u = parse_bits(f[n_par + 4])?;
        let l = f[n_par + 5]
            .split(',')
            .map(|v| v.parse::<u32>().map_err(|_| perr(no, format!("bad index `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        let l = Permutation::from_vec(l)?;
        let s = f[n_par + 6]
            .split(';')
            .map(|pt| {
                let (x, y) = pt.split_once(':').ok_or_else(|| perr(no, format!("bad point `{pt}`")))?;
                Ok(Point::new(num(x)?, num(y)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let ll = f[n_par + 7].split(',').map(num).collect::<Result<Vec<_>>>()?;
        if l.len() != m || s.len() != m || ll.len() != m {
            return Err(perr(no, format!("latent vectors do not have length M = {m}")));
        }
        per_individual.extend(ll);
        draws.push(Draw {
            params,
            latent: LatentState { z, u, s, l },
        });
    }
    let model = model.ok_or_else(|| perr(1, "model line missing".into()))?;
    let m = m.ok_or_else(|| perr(1, "m line missing".into()))?;
    Ok(Chain {
        model,
        m,
        config: config.unwrap_or_default(),
        draws,
        loglik,
        log_prior,
        log_latent_prior,
        per_individual,
        acceptance,
    })
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<()> {
    fs::write(path, write_chain_string(chain)).map_err(|e| Error::io(path, e))
}

pub fn read_chain(path: &Path) -> Result<Chain> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chain(&text, &path.display().to_string())
}
