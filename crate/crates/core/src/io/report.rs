//! CSV and gnuplot outputs of an [`EvalReport`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::training::{EvalReport, EvalRow};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "method,codebook,overhead_bits,mean_rate,ci95,n,seed,config_hash";

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// CSV text; floats use the shortest representation that reads back exactly.
pub fn report_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:?},{:?},{},{},{}",
            quote(&r.method),
            quote(&r.codebook),
            r.overhead_bits,
            r.mean_rate,
            r.ci95,
            r.n,
            r.seed,
            quote(&r.config_hash)
        )
        .unwrap();
    }
    out
}

/// Rate against feedback overhead, one gnuplot data block per method (in
/// order of first appearance), points sorted by overhead. Select a block
/// with `index i`.
pub fn report_dat(rows: &[EvalRow]) -> String {
    let mut order: Vec<&str> = Vec::new();
    let mut blocks: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
    for r in rows {
        if !blocks.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        blocks.entry(&r.method).or_default().push(r);
    }
    let mut out = String::new();
    let hashes: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.config_hash.as_str()).collect();
    writeln!(out, "# config_hash {}", hashes.into_iter().collect::<Vec<_>>().join(" ")).unwrap();
    for (i, m) in order.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let mut pts = blocks[m].clone();
        pts.sort_by(|a, b| a.overhead_bits.cmp(&b.overhead_bits).then_with(|| a.codebook.cmp(&b.codebook)));
        writeln!(out, "# {m}").unwrap();
        writeln!(out, "# overhead_bits mean_rate ci95 codebook").unwrap();
        for r in pts {
            writeln!(out, "{} {:?} {:?} {}", r.overhead_bits, r.mean_rate, r.ci95, r.codebook).unwrap();
        }
    }
    out
}

/// Write `<stem>.csv` and `<stem>.dat` into `dir`; returns both paths.
pub fn emit_report(report: &EvalReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if report.rows.is_empty() {
        return Err(Error::Contract("refusing to emit an empty report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let dat = dir.join(format!("{stem}.dat"));
    std::fs::write(&csv, report_csv(&report.rows))?;
    std::fs::write(&dat, report_dat(&report.rows))?;
    Ok((csv, dat))
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

/// Parse CSV text written by [`report_csv`].
pub fn parse_report_csv(text: &str, origin: &str) -> Result<Vec<EvalRow>> {
    let bad = |line: usize, what: &str| Error::Config(format!("{origin}:{line}: {what}"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "not an evaluation report (unexpected header)"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f = split_csv_line(l);
            if f.len() != 8 {
                return Err(bad(i + 2, &format!("expected 8 fields, found {}", f.len())));
            }
            let num = |j: usize| f[j].parse::<f64>().map_err(|_| bad(i + 2, &format!("bad number `{}`", f[j])));
            let int = |j: usize| f[j].parse::<u64>().map_err(|_| bad(i + 2, &format!("bad integer `{}`", f[j])));
            Ok(EvalRow {
                method: f[0].clone(),
                codebook: f[1].clone(),
                overhead_bits: int(2)? as usize,
                mean_rate: num(3)?,
                ci95: num(4)?,
                n: int(5)? as usize,
                seed: int(6)?,
                config_hash: f[7].clone(),
            })
        })
        .collect()
}

pub fn read_report_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let text = std::fs::read_to_string(path)?;
    parse_report_csv(&text, &path.display().to_string())
}
