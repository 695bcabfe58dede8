use anyhow::{bail, Context, Result};
use clap::ArgMatches;
use serde::{Deserialize, Serialize};
use spurprobe_core::cartography::{
    compute_map, curriculum_order, map_from_csv, map_to_csv, partition as split_map, CurriculumSchedule,
    EasyPick, Partition,
};
use spurprobe_core::clustering::{kmeans_best_of, KMeansConfig, SampleMode, SamplePlan};
use spurprobe_core::corpus::{convert_tsv, load_embeddings, write_corpus, write_embeddings};
use spurprobe_core::corruption::{corrupt_corpus, records_to_jsonl, CorruptionConfig};
use spurprobe_core::random::derive_seed;
use spurprobe_core::synth::synth_demo;
use spurprobe_core::{DynamicsLog, EmbeddingMatrix};

use super::{create_dir, create_parent, load_corpus, parse_list, subset_corpus, write_file, write_json};
use crate::cli::{
    CartographyArgs, ConvertArgs, CorruptArgs, CurriculumArgs, EasyPickArg, KmeansArgs, PartitionArgs,
    SampleArgs, SynthArgs,
};
use crate::config::resolve_seed;
use crate::manifest::{dir_manifest, file_manifest, RunManifest};

pub fn convert(a: ConvertArgs, m: &ArgMatches) -> Result<i32> {
    let is_tsv = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    let corpus = if is_tsv {
        convert_tsv(&a.input, a.scheme)
    } else {
        spurprobe_core::corpus::ingest_corpus(&a.input, a.scheme)
    }
    .with_context(|| format!("reading {}", a.input.display()))?;

    create_parent(&a.out)?;
    let mut man = RunManifest::new("convert", m, None);
    man.input("in", &a.input)?;
    man.output(&a.out);
    man.write(&file_manifest(&a.out))?;
    write_corpus(&corpus, &a.out)?;
    println!("{} examples -> {}", corpus.examples.len(), a.out.display());
    Ok(0)
}

pub fn cartography(a: CartographyArgs, m: &ArgMatches) -> Result<i32> {
    let log = DynamicsLog::read(&a.dynamics)?;
    let points = compute_map(&log)?;
    create_dir(&a.out)?;
    let map = a.out.join("map.csv");
    let mut man = RunManifest::new("cartography", m, None);
    man.input("dynamics", &a.dynamics)?;
    man.output(&map);
    man.write(&dir_manifest(&a.out))?;
    write_file(&map, map_to_csv(&points))?;
    println!("{} examples over {} epochs -> {}", points.len(), log.epochs(), map.display());
    Ok(0)
}

pub fn partition(a: PartitionArgs, m: &ArgMatches) -> Result<i32> {
    let mut man = RunManifest::new("partition", m, None);
    let points = match (&a.map, &a.dynamics) {
        (Some(p), _) => {
            man.input("map", p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            map_from_csv(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        (None, Some(p)) => {
            man.input("dynamics", p)?;
            compute_map(&DynamicsLog::read(p)?)?
        }
        (None, None) => bail!("one of --map or --dynamics is required"),
    };
    let part = split_map(&points, a.hard_q, a.ambiguous_q)?;
    create_dir(&a.out)?;
    let path = a.out.join("partition.json");
    man.output(&path);
    man.write(&dir_manifest(&a.out))?;
    write_json(&path, &part)?;
    println!(
        "easy {}, ambiguous {}, hard {} -> {}",
        part.easy.len(),
        part.ambiguous.len(),
        part.hard.len(),
        path.display()
    );
    Ok(0)
}

pub fn curriculum(a: CurriculumArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    let text = std::fs::read_to_string(&a.partition)
        .with_context(|| format!("reading {}", a.partition.display()))?;
    let part: Partition =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.partition.display()))?;
    let schedule = CurriculumSchedule {
        easy_fraction: a.easy_fraction,
        easy_epochs: a.easy_epochs,
        hard_fractions: parse_list(&a.fractions)?,
        source: a.source,
        easy_pick: match a.easy_pick {
            EasyPickArg::Top => EasyPick::Top,
            EasyPickArg::Random => EasyPick::Random { seed },
        },
        include_easy: a.include_easy,
    };
    let cur = curriculum_order(&part, &schedule)?;
    create_dir(&a.out)?;
    let path = a.out.join("curriculum.json");
    let mut man = RunManifest::new("curriculum", m, Some(seed))
        .derived("curriculum-easy", derive_seed(seed, "curriculum-easy"));
    man.input("partition", &a.partition)?;
    man.output(&path);
    man.write(&dir_manifest(&a.out))?;
    write_json(&path, &cur)?;
    for w in &cur.warnings {
        eprintln!("warning: {w}");
    }
    for p in &cur.phases {
        println!("{:<16} {:>8} ids", p.name, p.ids.len());
    }
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ClustersFile {
    pub k: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inertia_history: Vec<f64>,
    pub ids: Vec<String>,
    pub assignments: Vec<usize>,
    /// Squared distance of each point to its centroid.
    pub distances: Vec<f64>,
}

pub fn kmeans(a: KmeansArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    if a.restarts == 0 {
        bail!("--restarts must be at least 1");
    }
    let emb = load_embeddings(&a.emb)?;
    let config = KMeansConfig {
        k: a.k,
        seed,
        max_iters: a.max_iters,
        tol: a.tol,
        normalize: a.normalize,
    };
    let model = kmeans_best_of(&emb.to_matrix(), &config, a.restarts)?;

    create_dir(&a.out)?;
    let clusters = a.out.join("clusters.json");
    let centroids = a.out.join("centroids.emb");
    let mut man = RunManifest::new("kmeans", m, Some(seed));
    for r in 0..a.restarts as u64 {
        man = man.derived(&format!("kmeans++/{r}"), derive_seed(seed.wrapping_add(r), "kmeans++"));
    }
    man.input("emb", &a.emb)?;
    man.output(&clusters);
    man.output(&centroids);
    man.write(&dir_manifest(&a.out))?;

    let centroid_ids = (0..model.k).map(|c| format!("c{c}")).collect();
    write_embeddings(&EmbeddingMatrix::from_matrix(centroid_ids, &model.centroids)?, &centroids)?;
    write_json(
        &clusters,
        &ClustersFile {
            k: model.k,
            inertia: model.inertia,
            iterations: model.iterations,
            converged: model.converged,
            inertia_history: model.inertia_history.clone(),
            ids: emb.ids().to_vec(),
            assignments: model.assignments.clone(),
            distances: model.distances.clone(),
        },
    )?;
    if !model.converged {
        eprintln!("warning: no convergence after {} iterations", model.iterations);
    }
    println!("k={} inertia={} iterations={}", model.k, model.inertia, model.iterations);
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SampleEntry {
    fraction: f64,
    count: usize,
    indices: Vec<usize>,
    ids: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SamplesFile {
    n_total: usize,
    samples: Vec<SampleEntry>,
}

pub fn sample(a: SampleArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    let mut man = RunManifest::new("sample", m, Some(seed));
    let (ids, clusters) = match (&a.clusters, &a.emb) {
        (Some(p), _) => {
            man.input("clusters", p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let c: ClustersFile =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if c.ids.len() != c.assignments.len() || c.distances.len() != c.assignments.len() {
                bail!("{}: ids, assignments and distances differ in length", p.display());
            }
            (c.ids.clone(), Some(c))
        }
        (None, Some(p)) => {
            man.input("emb", p)?;
            (load_embeddings(p)?.ids().to_vec(), None)
        }
        (None, None) => bail!("one of --clusters or --emb is required"),
    };
    if a.mode == SampleMode::Diverse && clusters.is_none() {
        bail!("diverse sampling needs --clusters");
    }
    let plan = SamplePlan {
        mode: a.mode,
        fractions: parse_list(&a.fractions)?,
        seed,
        within: a.within,
    };
    let n_total = ids.len();
    let runs = plan.run(
        n_total,
        clusters
            .as_ref()
            .map(|c| (c.assignments.as_slice(), c.k, Some(c.distances.as_slice()))),
    )?;
    let stream = match a.mode {
        SampleMode::Diverse => "diverse",
        SampleMode::Random => "random-sample",
    };
    man = man.derived(stream, derive_seed(seed, stream));

    create_dir(&a.out)?;
    let path = a.out.join("samples.json");
    man.output(&path);
    man.write(&dir_manifest(&a.out))?;
    let samples = runs
        .into_iter()
        .map(|(fraction, indices)| SampleEntry {
            fraction,
            count: indices.len(),
            ids: indices.iter().map(|&i| ids[i].clone()).collect(),
            indices,
        })
        .collect::<Vec<_>>();
    for s in &samples {
        println!("{:>6} {:>8}", s.fraction, s.count);
    }
    write_json(&path, &SamplesFile { n_total, samples })?;
    Ok(0)
}

pub fn corrupt(a: CorruptArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    let mut corpus = load_corpus(&a.input, a.scheme)?;
    if let Some(s) = &a.subset {
        corpus = subset_corpus(&corpus, s)?;
    }
    let mut config = CorruptionConfig {
        strategy: a.strategy,
        word_rate: a.rate,
        seed,
        ..Default::default()
    };
    if let Some(cs) = &a.charset {
        config.charset = cs.chars().collect();
    }
    let (out, records) = corrupt_corpus(&corpus, &config)?;

    create_parent(&a.out)?;
    let mut man = RunManifest::new("corrupt", m, Some(seed));
    man.input("in", &a.input)?;
    if let Some(s) = &a.subset {
        man.input("subset", s)?;
    }
    man.output(&a.out);
    if let Some(r) = &a.record {
        create_parent(r)?;
        man.output(r);
    }
    man.write(&file_manifest(&a.out))?;
    write_corpus(&out, &a.out)?;
    if let Some(r) = &a.record {
        write_file(r, records_to_jsonl(&records))?;
    }
    let words: usize = records.iter().map(|r| r.premise.len() + r.hypothesis.len()).sum();
    println!("{} examples, {words} words corrupted -> {}", out.examples.len(), a.out.display());
    Ok(0)
}

pub fn synth(a: SynthArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    let data = synth_demo(seed, a.n, a.d, a.bias)?;
    create_dir(&a.out)?;
    let mut man = RunManifest::new("synth", m, Some(seed));
    for split in ["train", "anti", "probe"] {
        let stream = format!("synth-{split}");
        man = man.derived(&stream, derive_seed(seed, &stream));
        man.output(&a.out.join(format!("{split}.jsonl")));
        for part in ["main", "premise", "hypothesis"] {
            man.output(&a.out.join(format!("{split}.{part}.emb")));
        }
    }
    man.output(&a.out.join("meta.csv"));
    man.write(&dir_manifest(&a.out))?;
    let written = data.write(&a.out)?;
    println!(
        "train {}, anti {}, probe {} examples; {} files -> {}",
        data.train.corpus.examples.len(),
        data.anti.corpus.examples.len(),
        data.probe.corpus.examples.len(),
        written.len(),
        a.out.display()
    );
    Ok(0)
}
