//! On-disk test case bundles: three Turtle files and a metadata record.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::rdf::{parse_turtle, serialize_turtle, serialize_turtle_labeled, Graph, TurtleError};
use crate::shacl::{parse_manifest_turtle, Manifest, ShaclError};

use super::{EditOp, TestCase};

pub(crate) const ORIGINAL: &str = "original.ttl";
pub(crate) const INVALID: &str = "invalid.ttl";
pub(crate) const MANIFEST: &str = "manifest.ttl";
const META: &str = "meta.json";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Turtle { path: PathBuf, source: TurtleError },
    #[error("{path}: {source}")]
    Shacl { path: PathBuf, source: ShaclError },
    #[error("{path}: {message}")]
    Meta { path: PathBuf, message: String },
}

/// The parts of `meta.json` a consumer needs back.
#[derive(Clone, Debug)]
pub struct BundleMeta {
    pub id: String,
    pub seed: u64,
    pub rendered: String,
    pub ops: Vec<EditOp>,
    pub inverse_ops: Vec<EditOp>,
    pub alpha: usize,
    pub notes: Vec<String>,
    /// The whole record as written.
    pub raw: Value,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub original: Graph,
    pub invalid: Graph,
    pub manifest: Manifest,
    pub meta: BundleMeta,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes `case` to `<root>/<case.id>/` and returns that directory.
pub fn write_bundle(case: &TestCase, m: &Manifest, root: &Path) -> Result<PathBuf, BundleError> {
    let dir = root.join(&case.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut original = case.original.clone();
    let mut invalid = case.invalid.clone();
    for (k, v) in m.prefixes().iter() {
        if original.prefixes().get(k).is_none() {
            original.prefixes_mut().insert(k.clone(), v.clone());
        }
        if invalid.prefixes().get(k).is_none() {
            invalid.prefixes_mut().insert(k.clone(), v.clone());
        }
    }
    let files = [
        (ORIGINAL, serialize_turtle_labeled(&original)),
        (INVALID, serialize_turtle_labeled(&invalid)),
        (MANIFEST, serialize_turtle(m.graph())),
        (
            META,
            serde_json::to_string_pretty(&case.meta_json()).expect("JSON values serialize") + "\n",
        ),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(dir)
}

fn read_graph(path: &Path) -> Result<Graph, BundleError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_turtle(&text).map_err(|source| BundleError::Turtle {
        path: path.to_owned(),
        source,
    })
}

/// Loads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<Bundle, BundleError> {
    let meta_path = dir.join(META);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let bad = |message: String| BundleError::Meta {
        path: meta_path.clone(),
        message,
    };
    let raw: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let ops = |key: &str| -> Result<Vec<EditOp>, BundleError> {
        raw.get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("missing \"{key}\"")))?
            .iter()
            .map(|v| EditOp::from_json(v).map_err(&bad))
            .collect()
    };
    let meta = BundleMeta {
        id: raw
            .get("id")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned(),
        seed: raw.get("seed").and_then(Value::as_u64).unwrap_or_default(),
        rendered: raw
            .get("rendered")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned(),
        ops: ops("ops")?,
        inverse_ops: ops("inverse_ops")?,
        alpha: raw
            .get("alpha")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing \"alpha\"".into()))? as usize,
        notes: raw
            .get("notes")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_str)
                    .map(str::to_owned)
                    .collect()
            })
            .unwrap_or_default(),
        raw: raw.clone(),
    };
    let file = |key: &str, default: &str| -> PathBuf {
        dir.join(raw["files"][key].as_str().unwrap_or(default))
    };
    let manifest_path = file("manifest", MANIFEST);
    let manifest_text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest = parse_manifest_turtle(&manifest_text).map_err(|source| BundleError::Shacl {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(Bundle {
        dir: dir.to_owned(),
        original: read_graph(&file("original", ORIGINAL))?,
        invalid: read_graph(&file("invalid", INVALID))?,
        manifest,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{running_graph, running_manifest};
    use crate::materialize::{materialize_plans, DeterministicNamer};
    use crate::parallel::Exec;
    use crate::rdf::isomorphic;
    use crate::vio::{collect_with, CollectOptions, ScriptedPolicy};

    fn case() -> TestCase {
        let (g, m) = (running_graph(), running_manifest());
        let col = collect_with(
            &g,
            &m,
            &CollectOptions::default(),
            &mut ScriptedPolicy::single_tree(&[&[0, 0, 1]]),
        );
        let (mut cases, _) = materialize_plans(
            &col.plans,
            &g,
            &m,
            0,
            &|| Box::new(DeterministicNamer::new()),
            Exec::Sequential,
        );
        cases.remove(0)
    }

    #[test]
    fn round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let case = case();
        let dir = write_bundle(&case, &running_manifest(), tmp.path()).unwrap();
        assert!(dir.ends_with("case_0001"));
        let b = read_bundle(&dir).unwrap();
        assert!(isomorphic(&b.original, &case.original));
        assert!(isomorphic(&b.invalid, &case.invalid));
        assert_eq!(b.meta.ops, case.ops);
        assert_eq!(b.meta.inverse_ops, case.inverse_ops);
        assert_eq!(b.meta.alpha, case.alpha);
        assert!(isomorphic(
            &crate::materialize::apply_ops(&b.invalid, &b.meta.inverse_ops).unwrap(),
            &b.original
        ));
        assert_eq!(b.manifest.len(), running_manifest().len());
        let keys: Vec<&String> = b.meta.raw.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            [
                "id",
                "seed",
                "plan",
                "rendered",
                "tree",
                "path",
                "ops",
                "inverse_ops",
                "alpha",
                "files",
                "notes"
            ]
        );
    }

    #[test]
    fn unwritable_target_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("file");
        fs::write(&blocker, "").unwrap();
        let err = write_bundle(&case(), &running_manifest(), &blocker).unwrap_err();
        assert!(matches!(err, BundleError::Io { .. }));
        assert!(matches!(
            read_bundle(tmp.path()),
            Err(BundleError::Io { .. })
        ));
    }
}
