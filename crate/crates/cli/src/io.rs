use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context as _, Result};
use scdag_core::corpus::{parse_conll, Sentence};
use scdag_core::ensemble::HeadLogits;
use scdag_core::gazetteer::Gazetteer;
use scdag_core::heads::HeadKind;
use scdag_core::nn::Container;
use serde_json::json;

/// Marks an argument or I/O problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for I/O and argument errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<std::io::Error>() || cause.is::<UsageError>() {
            return 2;
        }
        if let Some(scdag_core::Error::Io(_)) = cause.downcast_ref::<scdag_core::Error>() {
            return 2;
        }
    }
    1
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_conll(path: &Path) -> Result<Vec<Sentence>> {
    parse_conll(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

/// Whitespace-tokenised sentences, one per nonblank line, all tagged `O`.
pub fn read_plain(path: &Path) -> Result<Vec<Sentence>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            let tags = vec![scdag_core::taxonomy::Tag::O; tokens.len()];
            Ok(Sentence::new(scdag_core::corpus::default_id(i), tokens, tags)?)
        })
        .collect()
}

pub fn read_gazetteer(path: &Path) -> Result<Gazetteer> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Gazetteer::load(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

pub fn write_gazetteer(path: &Path, g: &Gazetteer) -> Result<()> {
    let mut buf = Vec::new();
    g.save(&mut buf)?;
    write_text(path, std::str::from_utf8(&buf)?)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Logit sidecar: one tensor per sentence (`start`/`end` pairs for spans).
pub fn logits_to_container(ids: &[String], logits: &[HeadLogits]) -> Result<Container> {
    let head = logits.first().map(|l| l.kind()).unwrap_or(HeadKind::Softmax);
    let mut c = Container::new(json!({ "head": head.name(), "ids": ids }));
    for (i, l) in logits.iter().enumerate() {
        match l {
            HeadLogits::Softmax(m) | HeadLogits::Crf(m) => c.push(i.to_string(), m.clone()),
            HeadLogits::Span { start, end } => {
                c.push(format!("{i}.start"), start.clone());
                c.push(format!("{i}.end"), end.clone());
            }
        }
    }
    Ok(c)
}

pub fn container_to_logits(c: &Container) -> Result<(Vec<String>, Vec<HeadLogits>)> {
    let head: HeadKind = c
        .meta
        .get("head")
        .and_then(|h| h.as_str())
        .ok_or_else(|| anyhow::anyhow!("logits file has no head kind"))?
        .parse()?;
    let ids: Vec<String> = serde_json::from_value(c.meta.get("ids").cloned().unwrap_or_default())?;
    let get = |name: String| {
        c.get(&name)
            .cloned()
            .ok_or_else(|| anyhow::anyhow!("logits file lacks tensor `{name}`"))
    };
    let logits = (0..ids.len())
        .map(|i| {
            Ok(match head {
                HeadKind::Softmax => HeadLogits::Softmax(get(i.to_string())?),
                HeadKind::Crf => HeadLogits::Crf(get(i.to_string())?),
                HeadKind::Span => HeadLogits::Span {
                    start: get(format!("{i}.start"))?,
                    end: get(format!("{i}.end"))?,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok((ids, logits))
}

pub fn read_container(path: &Path) -> Result<Container> {
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    Container::load(path).with_context(|| format!("in {}", path.display()))
}
