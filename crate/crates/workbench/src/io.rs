//! Text formats: ontologies, fact TSV files, label files and world tables.

use std::fs;
use std::path::{Path, PathBuf};

use rrn_core::datagen::countries::{Country, WorldData};
use rrn_core::dsl::{parse_facts, parse_program, Program};
use rrn_core::kb::{
    Group, LabeledQuery, Origin, Roster, SampleKb, Triple, TripleObject, TriplePredicate,
    Vocabulary, MEMBER_TOKEN,
};

use crate::{Result, WorkbenchError};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| WorkbenchError::Io { path: path.to_path_buf(), source })
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let io = |source| WorkbenchError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

pub fn load_program(path: &Path) -> Result<Program> {
    let text = read_text(path)?;
    parse_program(&text).map_err(|source| WorkbenchError::Parse { path: path.to_path_buf(), source })
}

pub fn load_facts(path: &Path, vocab: &Vocabulary) -> Result<SampleKb> {
    let text = read_text(path)?;
    parse_facts(&text, vocab).map_err(|source| WorkbenchError::Parse { path: path.to_path_buf(), source })
}

/// Renders a sample as a fact TSV file. The leading `@individual` line keeps
/// individuals without facts and fixes the id order on reload.
pub fn facts_to_text(kb: &SampleKb, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    if !kb.roster.is_empty() {
        out.push_str("@individual ");
        out.push_str(&kb.roster.names().join(", "));
        out.push_str(".\n");
    }
    out.push_str(&kb.to_tsv(vocab));
    out
}

/// One line per query: `s<TAB>p<TAB>o<TAB>+|-<TAB>true|false<TAB>specified|inferable`.
pub fn labels_to_text(queries: &[LabeledQuery], vocab: &Vocabulary, roster: &Roster) -> String {
    let mut out = String::new();
    for q in queries {
        let t = &q.triple;
        let p = match t.predicate {
            TriplePredicate::Member => MEMBER_TOKEN,
            TriplePredicate::Relation(r) => vocab.relation_name(r),
        };
        let o = match t.object {
            TripleObject::Individual(i) => roster.name(i),
            TripleObject::Class(c) => vocab.class_name(c),
        };
        let origin = match q.origin {
            Origin::Specified => "specified",
            Origin::Inferable => "inferable",
        };
        out.push_str(&format!(
            "{}\t{p}\t{o}\t{}\t{}\t{origin}\n",
            roster.name(t.subject),
            if t.negated { '-' } else { '+' },
            q.label,
        ));
    }
    out
}

pub fn parse_labels(
    text: &str,
    vocab: &Vocabulary,
    roster: &Roster,
    path: &Path,
) -> Result<Vec<LabeledQuery>> {
    let bad = |line: usize, message: String| WorkbenchError::Format { path: path.to_path_buf(), line, message };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad(n, format!("expected 6 tab-separated fields, found {}", f.len())));
        }
        let ind = |name: &str| roster.get(name).ok_or_else(|| bad(n, format!("unknown individual `{name}`")));
        let s = ind(f[0])?;
        let mut triple = if f[1] == MEMBER_TOKEN {
            let c = vocab.class(f[2]).ok_or_else(|| bad(n, format!("unknown class `{}`", f[2])))?;
            Triple::member(s, c)
        } else {
            let r = vocab.relation(f[1]).ok_or_else(|| bad(n, format!("unknown relation `{}`", f[1])))?;
            Triple::relation(s, r, ind(f[2])?)
        };
        match f[3] {
            "+" => {}
            "-" => triple = triple.negation(),
            other => return Err(bad(n, format!("expected `+` or `-`, found `{other}`"))),
        }
        let label = match f[4] {
            "true" => true,
            "false" => false,
            other => return Err(bad(n, format!("expected `true` or `false`, found `{other}`"))),
        };
        let origin = match f[5] {
            "specified" => Origin::Specified,
            "inferable" => Origin::Inferable,
            other => return Err(bad(n, format!("expected `specified` or `inferable`, found `{other}`"))),
        };
        out.push(LabeledQuery { triple, label, origin, group: Group::of(&triple) });
    }
    Ok(out)
}

/// Parses a world table: `country<TAB>region[<TAB>subregion]` rows and
/// `neighbor<TAB>a<TAB>b` rows.
pub fn parse_world(text: &str, path: &Path) -> Result<WorldData> {
    let bad = |line: usize, message: String| WorkbenchError::Format { path: path.to_path_buf(), line, message };
    let mut world = WorldData::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        match f.as_slice() {
            ["neighbor", a, b] => world.neighbors.push((a.to_string(), b.to_string())),
            [name, region] => world.countries.push(Country {
                name: name.to_string(),
                region: region.to_string(),
                subregion: None,
            }),
            [name, region, sub] => world.countries.push(Country {
                name: name.to_string(),
                region: region.to_string(),
                subregion: (!sub.is_empty()).then(|| sub.to_string()),
            }),
            _ => return Err(bad(n, "expected a country row or a neighbor row".into())),
        }
    }
    world.normalized().map_err(|e| bad(0, e.to_string()))
}

pub fn world_to_text(world: &WorldData) -> String {
    let mut out = String::new();
    for c in &world.countries {
        out.push_str(&format!("{}\t{}\t{}\n", c.name, c.region, c.subregion.as_deref().unwrap_or("")));
    }
    for (a, b) in &world.neighbors {
        out.push_str(&format!("neighbor\t{a}\t{b}\n"));
    }
    out
}

pub fn load_world(path: &Path) -> Result<WorldData> {
    parse_world(&read_text(path)?, path)
}

pub(crate) fn join(dir: &Path, rel: &str) -> PathBuf {
    rel.split('/').fold(dir.to_path_buf(), |p, c| p.join(c))
}
