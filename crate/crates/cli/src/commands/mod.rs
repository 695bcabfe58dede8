mod data;
mod report;
mod train;

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::ArgMatches;
use serde::Serialize;
use spurprobe_core::corpus::ingest_corpus;
use spurprobe_core::{Corpus, LabelScheme};

use crate::cli::{Cli, Command, ReportCommand};

pub fn dispatch(cli: Cli, matches: &ArgMatches) -> Result<i32> {
    let (_, m) = matches
        .subcommand()
        .ok_or_else(|| anyhow!("no subcommand given"))?;
    match cli.command {
        Command::Convert(a) => data::convert(a, m),
        Command::Cartography(a) => data::cartography(a, m),
        Command::Partition(a) => data::partition(a, m),
        Command::Curriculum(a) => data::curriculum(a, m),
        Command::Kmeans(a) => data::kmeans(a, m),
        Command::Sample(a) => data::sample(a, m),
        Command::Corrupt(a) => data::corrupt(a, m),
        Command::Synth(a) => data::synth(a, m),
        Command::TrainProbe(a) => train::train_probe(a, m),
        Command::HexTrain(a) => train::hex_train(a, m),
        Command::Eval(a) => report::eval(a, m),
        Command::Report(r) => {
            let (_, m) = m.subcommand().ok_or_else(|| anyhow!("no report subcommand given"))?;
            match r {
                ReportCommand::Diff(a) => report::diff(a, m),
                ReportCommand::Aggregate(a) => report::aggregate(a, m),
                ReportCommand::Show(a) => report::show(a),
            }
        }
        Command::Selftest => Ok(report::selftest()),
    }
}

pub(crate) fn load_corpus(path: &Path, scheme: LabelScheme) -> Result<Corpus> {
    ingest_corpus(path, scheme).with_context(|| format!("loading corpus {}", path.display()))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json(value)?)
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Creates the parent directory of a file output.
pub(crate) fn create_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// One id per line; blank lines are skipped.
pub(crate) fn read_ids(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Restricts `corpus` to the ids in `path`, failing on ids it lacks.
pub(crate) fn subset_corpus(corpus: &Corpus, path: &Path) -> Result<Corpus> {
    let ids = read_ids(path)?;
    let present: HashSet<&str> = corpus.ids().collect();
    if let Some(missing) = ids.iter().find(|id| !present.contains(id.as_str())) {
        bail!("subset id {missing:?} is not in corpus {}", corpus.name);
    }
    let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
    Ok(corpus.retain_ids(&keep))
}

/// Comma-separated list; an empty string is an empty list.
pub(crate) fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow!("bad list item {t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("512, 64").unwrap(), vec![512, 64]);
        assert!(parse_list::<usize>("").unwrap().is_empty());
        assert!(parse_list::<f64>("0.1,x").is_err());
    }
}
