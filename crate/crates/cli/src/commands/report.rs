use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ArgMatches;
use spurprobe_core::evaluation::{
    aggregate_runs, delta_report, evaluate, DeltaBlock, DeltaReport, DeltaTable, EvalReport, Predictions,
};
use spurprobe_core::selftest::run_selftest;

use super::{create_parent, load_corpus, subset_corpus, to_json, write_file};
use crate::cli::{AggregateArgs, DiffArgs, EvalArgs, Format, ShowArgs};
use crate::manifest::{file_manifest, RunManifest};
use crate::{EXIT_INTERNAL, EXIT_OK};

pub fn eval(a: EvalArgs, m: &ArgMatches) -> Result<i32> {
    if let Some(v) = &a.verify {
        let recorded = RunManifest::read(v)?;
        // An earlier eval's inputs are compared with this run's files; any
        // other manifest's inputs are re-hashed where they were recorded.
        let current: Vec<(&str, &Path)> = if recorded.subcommand == "eval" {
            vec![("corpus", &a.corpus), ("preds", &a.preds)]
        } else {
            Vec::new()
        };
        recorded
            .verify(&current)
            .with_context(|| format!("verifying against {}", v.display()))?;
    }
    let mut corpus = load_corpus(&a.corpus, a.scheme)?;
    if let Some(s) = &a.subset {
        corpus = subset_corpus(&corpus, s)?;
    }
    let preds = Predictions::read(&a.preds).with_context(|| format!("reading {}", a.preds.display()))?;
    let report = evaluate(&corpus, &preds)?;
    let json = to_json(&report)?;

    if let Some(out) = &a.out {
        create_parent(out)?;
        let mut man = RunManifest::new("eval", m, None);
        man.input("corpus", &a.corpus)?;
        man.input("preds", &a.preds)?;
        if let Some(s) = &a.subset {
            man.input("subset", s)?;
        }
        man.output(out);
        man.write(&file_manifest(out))?;
        write_file(out, &json)?;
    }
    match a.format {
        Format::Json => print!("{json}"),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(EXIT_OK)
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

fn first_seen(values: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

pub fn diff(a: DiffArgs, m: &ArgMatches) -> Result<i32> {
    let n = a.strategy.len();
    if a.column.len() != n || a.before.len() != n || a.after.len() != n {
        bail!(
            "--strategy, --column, --before and --after must be given the same number of times \
             ({}, {}, {}, {})",
            n,
            a.column.len(),
            a.before.len(),
            a.after.len()
        );
    }
    let columns = first_seen(&a.column);
    let strategies = first_seen(&a.strategy);
    let mut cells: Vec<Vec<Option<DeltaReport>>> = vec![vec![None; columns.len()]; strategies.len()];
    for i in 0..n {
        let s = strategies.iter().position(|x| *x == a.strategy[i]).unwrap();
        let c = columns.iter().position(|x| *x == a.column[i]).unwrap();
        if cells[s][c].is_some() {
            bail!("cell ({}, {}) given twice", a.strategy[i], a.column[i]);
        }
        let before = read_report(&a.before[i])?;
        let after = read_report(&a.after[i])?;
        let d = delta_report(&before, &after)
            .with_context(|| format!("{} vs {}", a.before[i].display(), a.after[i].display()))?;
        cells[s][c] = Some(d);
    }
    let mut blocks = Vec::with_capacity(strategies.len());
    for (s, row) in strategies.into_iter().zip(cells) {
        let reports = row
            .into_iter()
            .zip(&columns)
            .map(|(cell, col)| cell.with_context(|| format!("no reports for ({s}, {col})")))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(DeltaBlock { strategy: s, reports });
    }
    let table = DeltaTable { columns, blocks };
    let text = match a.format {
        Format::Text => table.render(),
        Format::Json => to_json(&table)?,
    };
    if let Some(out) = &a.out {
        create_parent(out)?;
        let mut man = RunManifest::new("report diff", m, None);
        for (i, (b, f)) in a.before.iter().zip(&a.after).enumerate() {
            man.input(&format!("before[{i}]"), b)?;
            man.input(&format!("after[{i}]"), f)?;
        }
        man.output(out);
        man.write(&file_manifest(out))?;
        write_file(out, &text)?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn aggregate(a: AggregateArgs, m: &ArgMatches) -> Result<i32> {
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    let summary = aggregate_runs(&reports)?;
    let text = match a.format {
        Format::Json => to_json(&summary)?,
        Format::Text => summary.to_text(),
    };
    if let Some(out) = &a.out {
        create_parent(out)?;
        let mut man = RunManifest::new("report aggregate", m, None);
        for (i, p) in a.reports.iter().enumerate() {
            man.input(&format!("report[{i}]"), p)?;
        }
        man.output(out);
        man.write(&file_manifest(out))?;
        write_file(out, &text)?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn show(a: ShowArgs) -> Result<i32> {
    print!("{}", read_report(&a.report)?.to_text());
    Ok(EXIT_OK)
}

/// A failed check is a broken invariant, so it exits as an internal error.
pub fn selftest() -> i32 {
    let results = run_selftest();
    let passed = results.iter().filter(|r| r.passed).count();
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        if r.detail.is_empty() {
            println!("{tag} {}", r.name);
        } else {
            println!("{tag} {}: {}", r.name, r.detail);
        }
    }
    println!("{passed}/{} checks passed", results.len());
    if passed == results.len() {
        EXIT_OK
    } else {
        EXIT_INTERNAL
    }
}
