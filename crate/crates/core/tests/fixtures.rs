//! The committed fixture tree is exactly what the generator writes.
//! Run with `TRIPCRAFT_REGEN=1` to rewrite it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tripcraft_core::ingest::{load_split, read_plan_records, SplitName};
use tripcraft_core::synth::{write_fixtures, TRAIN_SIZE, VALIDATION_SIZE};

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn walk(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn committed_fixtures_match_generator() {
    let root = fixtures_root();
    if std::env::var_os("TRIPCRAFT_REGEN").is_some() {
        let _ = fs::remove_dir_all(&root);
        write_fixtures(&root).unwrap();
    }
    let tmp = tempfile::tempdir().unwrap();
    write_fixtures(tmp.path()).unwrap();
    let fresh = walk(tmp.path());
    let committed = walk(&root);
    assert_eq!(
        fresh.keys().collect::<Vec<_>>(),
        committed.keys().collect::<Vec<_>>(),
        "file sets differ; regenerate with TRIPCRAFT_REGEN=1"
    );
    for (path, bytes) in &fresh {
        assert!(committed[path] == *bytes, "{} differs", path.display());
    }
}

#[test]
fn fixtures_load() {
    let root = fixtures_root();
    let t = root.join("train");
    let train = load_split(
        SplitName::Train,
        &t.join("queries.jsonl"),
        &t.join("reference"),
        Some(&t.join("plans.jsonl")),
    )
    .unwrap();
    assert_eq!(train.len(), TRAIN_SIZE);
    assert!(train.records.iter().all(|r| r.plan.is_some()));

    let v = root.join("validation");
    let val = load_split(SplitName::Validation, &v.join("queries.jsonl"), &v.join("reference"), None).unwrap();
    assert_eq!(val.len(), VALIDATION_SIZE);
    assert_eq!(read_plan_records(&v.join("drafts.jsonl")).unwrap().len(), VALIDATION_SIZE);

    let e = root.join("eval");
    let eval = load_split(SplitName::Test, &e.join("queries.jsonl"), &e.join("reference"), None).unwrap();
    assert_eq!(eval.len(), 6);
}
