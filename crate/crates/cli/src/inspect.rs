use std::path::{Path, PathBuf};

use dgn_core::corpus::{FeatureMap, LabelMap, Manifest, FEATURE_MAP_MAGIC, LABEL_MAP_MAGIC, MANIFEST_HEADER};
use dgn_core::graph::build_instance_graph;
use dgn_core::iodp::{Prototype, PROTOTYPE_MAGIC};
use dgn_core::model::{DgnModel, CHECKPOINT_MAGIC};
use dgn_core::nn::Matrix;
use dgn_core::write_atomic;

use crate::commands::{load_corpus, load_prototype};
use crate::{Failure, InspectArgs};

/// 16-bit binary PGM, big-endian samples, `0 → 0` and the matrix maximum
/// to 65535. An all-zero (or all-negative) matrix is black.
pub fn pgm16(m: &Matrix) -> Vec<u8> {
    let max = m.as_slice().iter().copied().fold(0.0f64, f64::max);
    let mut out = format!("P5\n{} {}\n65535\n", m.cols(), m.rows()).into_bytes();
    for &v in m.as_slice() {
        let level = if max > 0.0 {
            (v.max(0.0) / max * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn prefix_of(a: &InspectArgs) -> PathBuf {
    a.out.clone().unwrap_or_else(|| a.artifact.with_extension(""))
}

fn append(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix><tag>.pgm` and `<prefix><tag>.csv`.
fn emit(prefix: &Path, tag: &str, m: &Matrix) -> Result<(), Failure> {
    let pgm = append(prefix, &format!("{tag}.pgm"));
    let table = append(prefix, &format!("{tag}.csv"));
    write_atomic(&pgm, &pgm16(m))?;
    write_atomic(&table, csv(m).as_bytes())?;
    println!("pgm{tag}={}", pgm.display());
    println!("csv{tag}={}", table.display());
    Ok(())
}

fn shape(m: &Matrix) -> String {
    format!("{}x{}", m.rows(), m.cols())
}

pub fn run(a: &InspectArgs) -> Result<(), Failure> {
    let bytes =
        std::fs::read(&a.artifact).map_err(|e| Failure::data(format!("{}: {e}", a.artifact.display())))?;
    let magic = bytes.get(..4).unwrap_or(&[]);
    let data = |e: dgn_core::Error| Failure::data(format!("{}: {e}", a.artifact.display()));
    if magic == PROTOTYPE_MAGIC {
        let p = Prototype::from_bytes(&bytes).map_err(data)?;
        println!("kind=prototype");
        println!("L={}", p.num_objects());
        println!("C={}", p.num_classes());
        println!("mode={}", p.mode());
        let metric = p.metric();
        println!(
            "metric={}{}",
            if metric.passivate { "sqrt-" } else { "" },
            metric.kind
        );
        emit(&prefix_of(a), "", p.omega())
    } else if magic == CHECKPOINT_MAGIC {
        let m = DgnModel::from_bytes(&bytes).map_err(data)?;
        println!("kind=checkpoint");
        println!("mode={}", m.mode());
        println!("lambda={}", m.lambda());
        if let Some(w) = m.gcn() {
            println!("W={}", shape(&w.weight));
        }
        println!("main_head.weight={}", shape(&m.main_head().weight));
        println!("main_head.bias={}", m.main_head().bias.len());
        if let Some(aux) = m.aux_head() {
            println!("aux_head.weight={}", shape(&aux.weight));
            println!("aux_head.bias={}", aux.bias.len());
        }
        println!("trainable_parameters={}", m.trainable_parameter_count());
        Ok(())
    } else if magic == LABEL_MAP_MAGIC {
        let lm = LabelMap::from_bytes(&bytes).map_err(data)?;
        println!("kind=label_map");
        println!("width={}", lm.width());
        println!("height={}", lm.height());
        println!("L={}", lm.num_objects());
        let present: Vec<String> = lm.object_presence().iter().map(|o| o.to_string()).collect();
        println!("objects={}", present.join(","));
        Ok(())
    } else if magic == FEATURE_MAP_MAGIC {
        let fm = FeatureMap::from_bytes(&bytes).map_err(data)?;
        println!("kind=feature_map");
        println!("width={}", fm.width());
        println!("height={}", fm.height());
        println!("channels={}", fm.channels());
        Ok(())
    } else if bytes.starts_with(MANIFEST_HEADER.as_bytes()) {
        inspect_instance(a)
    } else {
        Err(Failure::data(format!(
            "{}: unrecognized artifact",
            a.artifact.display()
        )))
    }
}

fn inspect_instance(a: &InspectArgs) -> Result<(), Failure> {
    let proto_path = a
        .prototype
        .as_deref()
        .ok_or_else(|| Failure::data("inspecting a manifest instance needs --prototype"))?;
    let prototype = load_prototype(proto_path)?;
    let text = std::fs::read_to_string(&a.artifact)?;
    Manifest::parse(&text)?;
    let corpus = load_corpus(&a.artifact)?;
    let inst = corpus.instances().get(a.instance).ok_or_else(|| {
        Failure::data(format!(
            "instance {} out of range (corpus has {})",
            a.instance,
            corpus.len()
        ))
    })?;
    let fm = inst
        .feature_map
        .as_ref()
        .ok_or_else(|| Failure::data("instance has no feature map"))?;
    let graph = build_instance_graph(fm, &inst.label_map, &prototype)?;
    println!("kind=instance");
    println!("instance={}", a.instance);
    println!("scene={}", inst.scene_id);
    println!("nodes={}", graph.nodes.len());
    let prefix = append(&prefix_of(a), &format!(".{}", a.instance));
    emit(&prefix, ".a0", &graph.raw)?;
    emit(&prefix, ".a", &graph.adjacency)
}
