//! Label maps, feature maps, corpora and their on-disk formats.
//!
//! A corpus on disk is a text manifest listing one instance per line; the
//! label and feature maps it references live in binary `.dgnl` / `.dgnf`
//! files next to it.

mod feature_map;
mod label_map;
mod synthetic;

use std::fmt;
use std::path::{Path, PathBuf};

pub use feature_map::{FeatureMap, FEATURE_MAP_MAGIC};
pub use label_map::{LabelMap, LABEL_MAP_MAGIC};
pub use synthetic::{generate_synthetic_corpus, object_embedding, SyntheticSpec};

use crate::codec::write_atomic;
use crate::error::{format_err, validation, Result};

pub const MANIFEST_HEADER: &str = "#DGN-MANIFEST v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One image: its scene category, full-resolution label map and optional
/// backbone feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub scene_id: usize,
    pub label_map: LabelMap,
    pub feature_map: Option<FeatureMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    num_classes: usize,
    num_objects: usize,
    instances: Vec<Instance>,
    split: Split,
}

impl Corpus {
    pub fn new(
        num_classes: usize,
        num_objects: usize,
        instances: Vec<Instance>,
        split: Split,
    ) -> Result<Self> {
        if num_classes == 0 || num_objects == 0 {
            return Err(validation(format!(
                "corpus needs C >= 1 and L >= 1 (got C={num_classes}, L={num_objects})"
            )));
        }
        let mut feature_shape = None;
        for (idx, inst) in instances.iter().enumerate() {
            if inst.scene_id >= num_classes {
                return Err(validation(format!(
                    "instance {idx}: scene id {} not below C={num_classes}",
                    inst.scene_id
                )));
            }
            if inst.label_map.num_objects() != num_objects {
                return Err(validation(format!(
                    "instance {idx}: label map has L={}, corpus has L={num_objects}",
                    inst.label_map.num_objects()
                )));
            }
            let shape = inst
                .feature_map
                .as_ref()
                .map(|f| (f.width(), f.height(), f.channels()));
            match (idx, feature_shape) {
                (0, _) => feature_shape = Some(shape),
                (_, Some(expected)) if expected != shape => {
                    return Err(validation(format!(
                        "instance {idx}: feature map shape {shape:?} differs from {expected:?}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Corpus {
            num_classes,
            num_objects,
            instances,
            split,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// `(width, height, channels)` shared by every feature map, if present.
    pub fn feature_shape(&self) -> Option<(usize, usize, usize)> {
        self.instances
            .first()
            .and_then(|i| i.feature_map.as_ref())
            .map(|f| (f.width(), f.height(), f.channels()))
    }

    /// Reads a manifest and every file it references.
    pub fn load(manifest_path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text = std::fs::read_to_string(manifest_path)?;
        let manifest = Manifest::parse(&text)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
        let instances = manifest
            .entries
            .iter()
            .map(|e| {
                let label_map = LabelMap::load(base.join(&e.label_map))?;
                let feature_map = match &e.feature_map {
                    Some(p) => Some(FeatureMap::load(base.join(p))?),
                    None => None,
                };
                Ok(Instance {
                    scene_id: e.scene_id,
                    label_map,
                    feature_map,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(manifest.num_classes, manifest.num_objects, instances, split)
    }

    /// Writes the manifest `<dir>/<split>.manifest` plus one `.dgnl` (and
    /// `.dgnf`) per instance under `<dir>/<split>/`. Returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let sub = self.split.as_str();
        std::fs::create_dir_all(dir.join(sub))?;
        let mut manifest = Manifest {
            num_classes: self.num_classes,
            num_objects: self.num_objects,
            entries: Vec::with_capacity(self.instances.len()),
        };
        for (idx, inst) in self.instances.iter().enumerate() {
            let label_rel = format!("{sub}/{idx:06}.dgnl");
            inst.label_map.save(dir.join(&label_rel))?;
            let feature_rel = match &inst.feature_map {
                Some(f) => {
                    let rel = format!("{sub}/{idx:06}.dgnf");
                    f.save(dir.join(&rel))?;
                    Some(PathBuf::from(rel))
                }
                None => None,
            };
            manifest.entries.push(ManifestEntry {
                scene_id: inst.scene_id,
                label_map: PathBuf::from(label_rel),
                feature_map: feature_rel,
            });
        }
        let path = dir.join(format!("{sub}.manifest"));
        write_atomic(&path, manifest.to_string().as_bytes())?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub scene_id: usize,
    /// Relative to the manifest's directory.
    pub label_map: PathBuf,
    pub feature_map: Option<PathBuf>,
}

/// Text index of a corpus: `#DGN-MANIFEST v1 C=<C> L=<L>` followed by
/// `scene_id \t label-map \t feature-map-or-dash` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub num_classes: usize,
    pub num_objects: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| format_err("empty manifest"))?;
        let rest = header
            .strip_prefix(MANIFEST_HEADER)
            .ok_or_else(|| format_err(format!("bad manifest header {header:?}")))?;
        let mut num_classes = None;
        let mut num_objects = None;
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| format_err(format!("bad header field {field:?}")))?;
            let value: usize = value
                .parse()
                .map_err(|_| format_err(format!("bad header value {field:?}")))?;
            let slot = match key {
                "C" => &mut num_classes,
                "L" => &mut num_objects,
                _ => return Err(format_err(format!("unknown header field {key:?}"))),
            };
            if slot.replace(value).is_some() {
                return Err(format_err(format!("duplicate header field {key:?}")));
            }
        }
        let (num_classes, num_objects) = match (num_classes, num_objects) {
            (Some(c), Some(l)) => (c, l),
            _ => return Err(format_err("manifest header must carry C= and L=")),
        };
        if num_classes == 0 || num_objects == 0 {
            return Err(validation("manifest declares C=0 or L=0"));
        }

        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [scene, label, feature] = fields[..] else {
                return Err(format_err(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            };
            let scene_id: usize = scene
                .trim()
                .parse()
                .map_err(|_| format_err(format!("line {}: bad scene id {scene:?}", lineno + 2)))?;
            if scene_id >= num_classes {
                return Err(validation(format!(
                    "line {}: scene id {scene_id} not below C={num_classes}",
                    lineno + 2
                )));
            }
            if label.is_empty() || feature.is_empty() {
                return Err(format_err(format!("line {}: empty path", lineno + 2)));
            }
            entries.push(ManifestEntry {
                scene_id,
                label_map: PathBuf::from(label),
                feature_map: (feature != "-").then(|| PathBuf::from(feature)),
            });
        }
        Ok(Manifest {
            num_classes,
            num_objects,
            entries,
        })
    }
}

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{MANIFEST_HEADER} C={} L={}",
            self.num_classes, self.num_objects
        )?;
        for e in &self.entries {
            let feature = e
                .feature_map
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_else(|| "-".to_owned());
            writeln!(
                f,
                "{}\t{}\t{}",
                e.scene_id,
                e.label_map.to_string_lossy(),
                feature
            )?;
        }
        Ok(())
    }
}
