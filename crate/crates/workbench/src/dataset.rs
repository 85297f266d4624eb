//! On-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/ontology.ont
//! <dir>/{train,eval,test}/sample_<id>.tsv
//! <dir>/labels/{train,eval,test}/sample_<id>.tsv
//! ```
//!
//! Sample ids are unique across splits and double as the generator's stream
//! index, so any single sample can be regenerated from the manifest seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rrn_core::datagen::countries::{CountriesConfig, CountriesGenerator, CountriesSample, WorldData};
use rrn_core::datagen::family::{family_labeled_sample, family_ontology, FamilyGenConfig};
use rrn_core::datagen::LabeledSample;
use rrn_core::dsl::{serialize_program, Program};
use serde::{Deserialize, Serialize};

use crate::checkpoint::vocabulary_hash;
use crate::io::{facts_to_text, join, labels_to_text, load_facts, load_program, parse_labels, read_text, write_text};
use crate::parallel::par_map;
use crate::{Result, WorkbenchError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ONTOLOGY_FILE: &str = "ontology.ont";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Eval, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown split `{s}` (expected train, eval or test)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: u64,
    pub facts: String,
    pub labels: String,
    pub num_facts: usize,
    pub num_queries: usize,
    pub num_positive: usize,
    /// Countries whose facts were dropped (countries datasets only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_individuals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<SampleEntry>,
    pub eval: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[SampleEntry] {
        match split {
            Split::Train => &self.train,
            Split::Eval => &self.eval,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut Vec<SampleEntry> {
        match split {
            Split::Train => &mut self.train,
            Split::Eval => &mut self.eval,
            Split::Test => &mut self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: u32,
    pub generator: String,
    pub seed: u64,
    pub ontology: String,
    pub vocabulary_hash: String,
    /// Generator settings, echoed for reproduction.
    pub config: serde_json::Value,
    pub splits: Splits,
}

/// Writes samples into a dataset directory; the manifest is written last.
pub struct DatasetWriter {
    dir: PathBuf,
    program: Program,
    manifest: DatasetManifest,
}

impl DatasetWriter {
    pub fn create(dir: &Path, program: &Program, generator: &str, seed: u64, config: serde_json::Value) -> Result<Self> {
        write_text(&dir.join(ONTOLOGY_FILE), &serialize_program(program))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            program: program.clone(),
            manifest: DatasetManifest {
                format: FORMAT,
                generator: generator.to_string(),
                seed,
                ontology: ONTOLOGY_FILE.to_string(),
                vocabulary_hash: vocabulary_hash(&program.vocabulary),
                config,
                splits: Splits::default(),
            },
        })
    }

    pub fn add(&mut self, split: Split, id: u64, sample: &LabeledSample, test_individuals: Vec<String>) -> Result<()> {
        let vocab = &self.program.vocabulary;
        let facts = format!("{split}/sample_{id}.tsv");
        let labels = format!("labels/{split}/sample_{id}.tsv");
        write_text(&join(&self.dir, &facts), &facts_to_text(&sample.kb, vocab))?;
        write_text(&join(&self.dir, &labels), &labels_to_text(&sample.queries, vocab, &sample.kb.roster))?;
        self.manifest.splits.get_mut(split).push(SampleEntry {
            id,
            facts,
            labels,
            num_facts: sample.kb.num_facts(),
            num_queries: sample.queries.len(),
            num_positive: sample.queries.iter().filter(|q| q.label).count(),
            test_individuals,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<DatasetManifest> {
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|source| WorkbenchError::Json { path: path.clone(), source })?;
        write_text(&path, &(json + "\n"))?;
        Ok(self.manifest)
    }
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub program: Program,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest: DatasetManifest = serde_json::from_str(&read_text(&path)?)
            .map_err(|source| WorkbenchError::Json { path: path.clone(), source })?;
        if manifest.format != FORMAT {
            return Err(WorkbenchError::Dataset {
                path: dir.to_path_buf(),
                message: format!("unsupported format version {}", manifest.format),
            });
        }
        let program = load_program(&join(dir, &manifest.ontology))?;
        let found = vocabulary_hash(&program.vocabulary);
        if found != manifest.vocabulary_hash {
            return Err(WorkbenchError::VocabularyMismatch { expected: manifest.vocabulary_hash, found });
        }
        Ok(Self { dir: dir.to_path_buf(), manifest, program })
    }

    pub fn entries(&self, split: Split) -> &[SampleEntry] {
        self.manifest.splits.get(split)
    }

    pub fn load_sample(&self, entry: &SampleEntry) -> Result<LabeledSample> {
        let vocab = &self.program.vocabulary;
        let kb = load_facts(&join(&self.dir, &entry.facts), vocab)?;
        let path = join(&self.dir, &entry.labels);
        let queries = parse_labels(&read_text(&path)?, vocab, &kb.roster, &path)?;
        Ok(LabeledSample { kb, queries })
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<LabeledSample>> {
        self.entries(split).iter().map(|e| self.load_sample(e)).collect()
    }

    /// Loads a split, reading up to `jobs` samples concurrently.
    pub fn load_split_par(&self, split: Split, jobs: usize) -> Result<Vec<LabeledSample>> {
        par_map(self.entries(split), jobs, |_, e| self.load_sample(e)).into_iter().collect()
    }

    pub fn find(&self, split: Split, id: u64) -> Option<&SampleEntry> {
        self.entries(split).iter().find(|e| e.id == id)
    }
}

/// Sample counts per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub eval: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyDatasetConfig {
    pub sizes: SplitSizes,
    pub generator: FamilyGenConfig,
}

/// Generates a family dataset; sample `id` is drawn from stream `id`.
pub fn generate_family_dataset(dir: &Path, cfg: &FamilyDatasetConfig, seed: u64, jobs: usize) -> Result<DatasetManifest> {
    cfg.generator.validate()?;
    let program = family_ontology();
    let config = serde_json::to_value(cfg).expect("plain config serializes");
    let mut w = DatasetWriter::create(dir, &program, "family", seed, config)?;
    let s = cfg.sizes;
    let plan: Vec<(Split, u64)> = [(Split::Train, s.train), (Split::Eval, s.eval), (Split::Test, s.test)]
        .into_iter()
        .flat_map(|(split, n)| std::iter::repeat_n(split, n))
        .zip(0u64..)
        .collect();
    let samples = par_map(&plan, jobs, |_, &(_, id)| family_labeled_sample(&program, &cfg.generator, seed, id));
    for (&(split, id), sample) in plan.iter().zip(samples) {
        w.add(split, id, &sample?, Vec::new())?;
    }
    w.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountriesDatasetConfig {
    pub train_samples: usize,
    pub generator: CountriesConfig,
}

/// Generates a countries dataset: `train_samples` training samples (ids
/// `0..n`), one eval sample (id `n`) and one test sample (id `n + 1`).
pub fn generate_countries_dataset(
    dir: &Path,
    world: &WorldData,
    cfg: &CountriesDatasetConfig,
    seed: u64,
    jobs: usize,
) -> Result<DatasetManifest> {
    let gen = CountriesGenerator::new(world.clone(), cfg.generator, seed)?;
    let config = serde_json::to_value(cfg).expect("plain config serializes");
    let name = format!("countries-{}", cfg.generator.version.name());
    let mut w = DatasetWriter::create(dir, gen.program(), &name, seed, config)?;
    let ids: Vec<u64> = (0..cfg.train_samples as u64).collect();
    let train = par_map(&ids, jobs, |_, &id| gen.train_sample(id));
    let add = |w: &mut DatasetWriter, split, id, s: CountriesSample| {
        let names = s.test_countries.iter().map(|&i| s.labeled.kb.roster.name(i).to_string()).collect();
        w.add(split, id, &s.labeled, names)
    };
    for (id, s) in ids.iter().zip(train) {
        add(&mut w, Split::Train, *id, s?)?;
    }
    let n = cfg.train_samples as u64;
    add(&mut w, Split::Eval, n, gen.eval_sample())?;
    add(&mut w, Split::Test, n + 1, gen.test_sample())?;
    w.finish()
}
