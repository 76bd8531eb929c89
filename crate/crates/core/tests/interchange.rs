//! Wire format and tensor naming shared with external weight writers.

use std::process::Command;

use sha2::{Digest, Sha256};

use nwbeam_core::model_store::{StoreError, Tensor, TensorContainer};
use nwbeam_core::pipeline::{ModelBundle, NwfInit, PipelineConfig, PipelineMode};

/// Byte-level replacement of the first occurrence, leaving binary data intact.
fn replace_once(bytes: &[u8], from: &str, to: &str) -> Vec<u8> {
    let at = bytes.windows(from.len()).position(|w| w == from.as_bytes()).unwrap();
    [&bytes[..at], to.as_bytes(), &bytes[at + from.len()..]].concat()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hand_built() -> Vec<u8> {
    assemble("")
}

/// Assembles a container byte by byte, independent of the serializer.
/// `space` goes after the first key, so anything but "" is non-canonical.
fn assemble(space: &str) -> Vec<u8> {
    let mut data = Vec::new();
    for v in [1.0f32, -2.0, 0.5] {
        data.extend_from_slice(&v.to_le_bytes());
    }
    data.extend_from_slice(&[0; 4]);
    data.extend_from_slice(&3.25f32.to_le_bytes());
    let body = |sha: &str| {
        format!(
            concat!(
                r#"{{"metadata":{}{{"dnn1.H":"2","mode":"dnn1"}},"tensors":["#,
                r#"{{"name":"a","dtype":"f32","shape":[3],"offset":0,"length":12}},"#,
                r#"{{"name":"b","dtype":"f32","shape":[1,1],"offset":16,"length":4}}],"sha256":"{}"}}"#
            ),
            space, sha
        )
    };
    let mut h = Sha256::new();
    h.update(body("").as_bytes());
    h.update(&data);
    let manifest = body(&hex(&h.finalize()));
    let mut out = b"NWFT".to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    while !out.len().is_multiple_of(8) {
        out.push(0);
    }
    out.extend_from_slice(&data);
    out
}

#[test]
fn hand_built_file_matches_serializer() {
    let bytes = hand_built();
    let c = TensorContainer::from_bytes(&bytes).unwrap();
    assert_eq!(c.meta("mode"), Some("dnn1"));
    assert_eq!(c.get("a").unwrap().data, vec![1.0, -2.0, 0.5]);
    assert_eq!(c.get("b").unwrap().shape, vec![1, 1]);

    let mut built = TensorContainer::new();
    built.push(Tensor::new("a", vec![3], vec![1.0, -2.0, 0.5]));
    built.push(Tensor::new("b", vec![1, 1], vec![3.25]));
    built.set_meta("mode", "dnn1");
    built.set_meta("dnn1.H", 2);
    assert_eq!(built.to_bytes().unwrap(), bytes);
}

#[test]
fn distinct_errors_per_violation() {
    let good = hand_built();

    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(TensorContainer::from_bytes(&bad), Err(StoreError::BadMagic)));

    let truncated = &good[..good.len() - 3];
    assert!(matches!(TensorContainer::from_bytes(truncated), Err(StoreError::ShortRead { .. })));

    let mut longer = good.clone();
    longer.extend_from_slice(&[0; 8]);
    assert!(matches!(TensorContainer::from_bytes(&longer), Err(StoreError::TrailingBytes(8))));

    let mut version = good.clone();
    version[4] = 2;
    assert!(matches!(TensorContainer::from_bytes(&version), Err(StoreError::UnsupportedVersion(2))));

    // a declared length of 20 runs into the next tensor
    let overlapping = replace_once(&good, r#""length":12"#, r#""length":20"#);
    assert!(matches!(TensorContainer::from_bytes(&overlapping), Err(StoreError::Overlap(..))));

    let mut flipped = good.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 0x10;
    assert!(matches!(TensorContainer::from_bytes(&flipped), Err(StoreError::Checksum)));

    assert!(matches!(TensorContainer::from_bytes(&assemble(" ")), Err(StoreError::NonCanonical)));

    let mut dup = TensorContainer::new();
    dup.push(Tensor::new("x", vec![1], vec![0.0]));
    dup.push(Tensor::new("x", vec![1], vec![0.0]));
    assert!(matches!(dup.to_bytes(), Err(StoreError::DuplicateName(_))));
}

#[test]
fn full_stack_tensor_names() {
    let cfg = PipelineConfig::<f64>::standard(PipelineMode::FullStack, 8);
    let c = ModelBundle::init(&cfg, NwfInit::Dft, 0).unwrap().to_container();
    let names: Vec<(&str, Vec<usize>)> = c.tensors.iter().map(|t| (t.name.as_str(), t.shape.clone())).collect();
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    for (prefix, m, ow) in [("dnn1", 8, 16), ("dnn2", 9, 32)] {
        let p = |s: &str| format!("{prefix}.{s}");
        expected.extend([
            (p("in_proj.w"), vec![8, 256]),
            (p("in_proj.b"), vec![8]),
            (p("in_ln.g"), vec![8]),
            (p("in_ln.b"), vec![8]),
            (p("prelu.a"), vec![8]),
            (p("spatial.w"), vec![8, m * 8]),
            (p("spatial.b"), vec![8]),
        ]);
        for k in 0..2 {
            expected.extend([
                (p(&format!("blk{k}.ln.g")), vec![8]),
                (p(&format!("blk{k}.ln.b")), vec![8]),
                (p(&format!("blk{k}.lstm.wx")), vec![32, 8]),
                (p(&format!("blk{k}.lstm.wh")), vec![32, 8]),
                (p(&format!("blk{k}.lstm.b")), vec![32]),
            ]);
        }
        expected.extend([(p("out_proj.w"), vec![ow, 8]), (p("out_proj.b"), vec![ow])]);
        if prefix == "dnn1" {
            expected.push(("nwf.B".into(), vec![258, 256]));
            expected.push(("nwf.D".into(), vec![16, 258]));
        }
    }
    let expected: Vec<(&str, Vec<usize>)> = expected.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    assert_eq!(names, expected);
    for key in ["mode", "fs", "dnn1.M", "dnn1.H", "dnn1.synthesis", "dnn2.oW", "nwf.F", "nwf.iW", "nwf.synthesis"] {
        assert!(c.meta(key).is_some(), "missing metadata {key}");
    }
    assert_eq!(c.meta("dnn2.synthesis"), Some("ola"));
    assert_eq!(c.meta("nwf.synthesis"), Some("concat"));
}

const PY_WRITER: &str = r#"
import hashlib, json, struct, sys
tensors = [("w", [2, 2], [0.5, -1.0, 2.0, 4.0]), ("b", [3], [1.0, 2.0, 3.0])]
data = b""
entries = []
for name, shape, vals in tensors:
    data += b"\0" * (-len(data) % 8)
    entries.append({"name": name, "dtype": "f32", "shape": shape, "offset": len(data), "length": 4 * len(vals)})
    data += struct.pack("<%df" % len(vals), *vals)
man = {"metadata": {"source": "python"}, "tensors": entries, "sha256": ""}
dump = lambda m: json.dumps(m, separators=(",", ":"), ensure_ascii=False).encode()
man["sha256"] = hashlib.sha256(dump(man) + data).hexdigest()
text = dump(man)
out = b"NWFT" + struct.pack("<IQ", 1, len(text)) + text
out += b"\0" * (-len(out) % 8) + data
open(sys.argv[1], "wb").write(out)
"#;

#[test]
fn python_stdlib_writer_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("py.nwft");
    let status = Command::new("python3").arg("-c").arg(PY_WRITER).arg(&path).status();
    let Ok(status) = status else {
        eprintln!("python3 not available; skipping");
        return;
    };
    assert!(status.success());
    let c = TensorContainer::load(&path).unwrap();
    assert_eq!(c.expect("w", &[2, 2]).unwrap().data, vec![0.5, -1.0, 2.0, 4.0]);
    assert_eq!(c.meta("source"), Some("python"));
    assert_eq!(c.to_bytes().unwrap(), std::fs::read(&path).unwrap());
}
