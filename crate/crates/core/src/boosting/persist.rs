//! Versioned text model format.
//!
//! ```text
//! BXT1
//! format_version 1
//! <config and metadata, one `key value` per line>
//! stage_count <J>
//! stage <alpha> <tree count>
//! tree <node count>
//! S <feature> <threshold>        split node, children follow in pre-order
//! L <-1|1> <signal fraction>     leaf
//! ...
//! checksum <sha256 of every preceding byte>
//! ```
//!
//! Reals are written with 17 significant digits so they parse back bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BoostConfig, BoostedModel, Stage, TrainingMetadata};
use crate::bagging::Forest;
use crate::data::{to_hex, Label};
use crate::error::{Error, Result};
use crate::tree::{Node, Tree, TreeConfig};

const MAGIC: &str = "BXT1";
const FORMAT_VERSION: u32 = 1;

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

impl BoostedModel {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let t = &c.tree_config;
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "format_version {FORMAT_VERSION}");
        let _ = writeln!(s, "mode {}", t.mode);
        match t.k_features {
            Some(k) => {
                let _ = writeln!(s, "k_features {k}");
            }
            None => {
                let _ = writeln!(s, "k_features auto");
            }
        }
        let _ = writeln!(s, "max_depth {}", t.max_depth);
        let _ = writeln!(s, "min_samples_leaf {}", t.min_samples_leaf);
        let _ = writeln!(s, "min_weighted_fraction_split {}", real(t.min_weighted_fraction_split));
        let _ = writeln!(s, "stages {}", c.stages);
        let _ = writeln!(s, "trees_per_stage {}", c.trees_per_stage);
        let _ = writeln!(s, "epsilon_floor {}", real(c.epsilon_floor));
        let _ = writeln!(s, "seed {}", c.seed);
        let _ = writeln!(s, "n_features {}", self.n_features);
        let _ = writeln!(s, "dataset_sha256 {}", self.metadata.dataset_sha256);
        let _ = writeln!(s, "n_train {}", self.metadata.n_train);
        let _ = writeln!(s, "stage_count {}", self.stages.len());
        for stage in &self.stages {
            let _ = writeln!(s, "stage {} {}", real(stage.alpha), stage.forest.len());
            for tree in stage.forest.trees() {
                let _ = writeln!(s, "tree {}", tree.nodes().len());
                for node in tree.nodes() {
                    match *node {
                        Node::Split {
                            feature, threshold, ..
                        } => {
                            let _ = writeln!(s, "S {feature} {}", real(threshold));
                        }
                        Node::Leaf {
                            vote,
                            signal_fraction,
                        } => {
                            let _ = writeln!(s, "L {} {}", vote as i8, real(signal_fraction));
                        }
                    }
                }
            }
        }
        let digest = to_hex(&Sha256::digest(s.as_bytes()));
        let _ = writeln!(s, "checksum {digest}");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or_default();
        if first != MAGIC {
            return Err(Error::ModelVersion(format!(
                "expected magic {MAGIC:?}, found {:?}",
                first.chars().take(16).collect::<String>()
            )));
        }
        let second = text.lines().nth(1).unwrap_or_default();
        match second.strip_prefix("format_version ") {
            Some(v) if v.trim() == FORMAT_VERSION.to_string() => {}
            Some(v) => return Err(Error::ModelVersion(format!("format version {v} is not supported"))),
            None => return Err(Error::ModelCorrupt("missing format_version line".into())),
        }

        let body_end = text
            .rfind("checksum ")
            .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
            .ok_or_else(|| Error::ModelCorrupt("missing checksum (truncated file?)".into()))?;
        let (body, tail) = text.split_at(body_end);
        let stored = tail
            .strip_prefix("checksum ")
            .and_then(|t| t.strip_suffix('\n'))
            .ok_or_else(|| Error::ModelCorrupt("malformed checksum line".into()))?;
        let actual = to_hex(&Sha256::digest(body.as_bytes()));
        if stored != actual {
            return Err(Error::ModelCorrupt("checksum mismatch".into()));
        }

        let mut p = Parser {
            lines: body.lines().enumerate().skip(2).peekable(),
        };
        let mode = p.field("mode")?.parse()?;
        let k_features = match p.field("k_features")? {
            "auto" => None,
            k => Some(p.num(k)?),
        };
        let max_depth: usize = p.parsed("max_depth")?;
        let tree_config = TreeConfig {
            mode,
            k_features,
            max_depth,
            min_samples_leaf: p.parsed("min_samples_leaf")?,
            min_weighted_fraction_split: p.parsed("min_weighted_fraction_split")?,
        };
        let config = BoostConfig {
            stages: p.parsed("stages")?,
            trees_per_stage: p.parsed("trees_per_stage")?,
            tree_config,
            epsilon_floor: p.parsed("epsilon_floor")?,
            seed: p.parsed("seed")?,
        };
        let n_features: usize = p.parsed("n_features")?;
        let metadata = TrainingMetadata {
            dataset_sha256: p.field("dataset_sha256").unwrap_or("").to_string(),
            n_train: p.parsed("n_train")?,
        };
        let stage_count: usize = p.parsed("stage_count")?;
        let mut stages = Vec::with_capacity(stage_count.min(1 << 16));
        for _ in 0..stage_count {
            let (line, rest) = p.next("stage")?;
            let mut it = rest.split_whitespace();
            let alpha: f64 = p.num(it.next().unwrap_or(""))?;
            let n_trees: usize = p.num(it.next().unwrap_or(""))?;
            if n_trees == 0 {
                return Err(corrupt(line, "stage without trees"));
            }
            let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
            for _ in 0..n_trees {
                trees.push(p.tree(n_features, max_depth)?);
            }
            let forest = Forest::from_trees(trees, config.tree_config.clone())
                .map_err(|e| corrupt(line, &e.to_string()))?;
            stages.push(Stage { alpha, forest });
        }
        if let Some((line, extra)) = p.lines.next() {
            return Err(corrupt(line, &format!("unexpected trailing content {extra:?}")));
        }
        let model = BoostedModel::from_stages(stages, config, metadata)
            .map_err(|e| Error::ModelCorrupt(e.to_string()))?;
        if model.n_features != n_features {
            return Err(Error::ModelCorrupt("feature count disagrees with trees".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if !bytes.starts_with(MAGIC.as_bytes()) {
            return Err(Error::ModelVersion(format!("{} is not a {MAGIC} model file", path.display())));
        }
        let text = String::from_utf8(bytes).map_err(|_| Error::ModelCorrupt("file is not valid UTF-8".into()))?;
        Self::from_text(&text)
    }
}

fn corrupt(line: usize, msg: &str) -> Error {
    Error::ModelCorrupt(format!("line {}: {msg}", line + 1))
}

struct Parser<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: std::iter::Peekable<I>,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Parser<'a, I> {
    fn next(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, text) = self
            .lines
            .next()
            .ok_or_else(|| Error::ModelCorrupt(format!("file ends before {key:?}")))?;
        let rest = text
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| corrupt(line, &format!("expected {key:?}, found {text:?}")))?;
        Ok((line, rest))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        Ok(self.next(key)?.1)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.next(key)?;
        v.parse()
            .map_err(|_| corrupt(line, &format!("bad value {v:?} for {key}")))
    }

    fn num<T: std::str::FromStr>(&self, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::ModelCorrupt(format!("bad number {v:?}")))
    }

    fn tree(&mut self, n_features: usize, max_depth: usize) -> Result<Tree> {
        let (line, n) = self.next("tree")?;
        let n_nodes: usize = self.num(n)?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        self.node(&mut nodes, 0, max_depth)?;
        if nodes.len() != n_nodes {
            return Err(corrupt(line, &format!("declared {n_nodes} nodes, read {}", nodes.len())));
        }
        Tree::from_nodes(nodes, n_features).map_err(|e| corrupt(line, &e.to_string()))
    }

    fn node(&mut self, nodes: &mut Vec<Node>, depth: usize, max_depth: usize) -> Result<u32> {
        let (line, text) = self
            .lines
            .next()
            .ok_or_else(|| Error::ModelCorrupt("file ends inside a tree".into()))?;
        let mut it = text.split_whitespace();
        let kind = it.next().unwrap_or("");
        let a = it.next().unwrap_or("");
        let b = it.next().unwrap_or("");
        let id = nodes.len() as u32;
        match kind {
            "L" => {
                let vote = self
                    .num::<i64>(a)
                    .ok()
                    .and_then(Label::from_sign)
                    .ok_or_else(|| corrupt(line, "bad leaf vote"))?;
                nodes.push(Node::Leaf {
                    vote,
                    signal_fraction: self.num(b)?,
                });
            }
            "S" => {
                if depth >= max_depth {
                    return Err(corrupt(line, "tree deeper than max_depth"));
                }
                let feature: u32 = self.num(a)?;
                let threshold: f64 = self.num(b)?;
                nodes.push(Node::Leaf {
                    vote: Label::Background,
                    signal_fraction: 0.0,
                });
                let left = self.node(nodes, depth + 1, max_depth)?;
                let right = self.node(nodes, depth + 1, max_depth)?;
                nodes[id as usize] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
            _ => return Err(corrupt(line, &format!("unknown node kind {kind:?}"))),
        }
        Ok(id)
    }
}
