//! Extractor-facing file interfaces: SCT1 tensors, alignment JSON and the
//! corpus manifest, written by hand the way an external dumper would.

use std::fs;
use std::path::Path;

use astprobe::corpus::{load_corpus, LoadOptions, Manifest};
use astprobe::tensorio::{load_attention, load_hidden, read_tensor, SubwordAlignment};
use astprobe::Error;

/// Encodes an f32 tensor byte by byte, independently of the library writer.
fn sct1(dims: &[u64], data: &[f32]) -> Vec<u8> {
    let mut out = b"SCT1".to_vec();
    out.push(0x01);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

// `x = f(a)` has words x = f ( a ); the dumper split `f` into two subwords
// and wrapped the sequence in [CLS] ... [SEP].
const SOURCE: &str = "x = f(a)\n";
const ALIGNMENT: &str = r#"{"words": [[1, 2], [2, 3], [3, 5], [5, 6], [6, 7], [7, 8]], "special": [0, 8]}"#;
const M: usize = 9;

type ErrorCheck = fn(&Error) -> bool;

fn manifest_json(extra: &str) -> String {
    format!(
        r#"{{"snippets": [{{"id": "s0", "language": "python", "source_file": "src/s0.py",
  "tensors": {{"attention": "t/s0.attn.sct", "hidden": "t/s0.hidden.sct", "alignment": "t/s0.align.json"}}{extra}}}]}}"#
    )
}

fn write_corpus(dir: &Path, attention: &[f32], hidden: &[f32], d: usize) {
    fs::create_dir_all(dir.join("src")).unwrap();
    fs::create_dir_all(dir.join("t")).unwrap();
    fs::write(dir.join("src/s0.py"), SOURCE).unwrap();
    fs::write(dir.join("t/s0.attn.sct"), sct1(&[1, 1, M as u64, M as u64], attention)).unwrap();
    fs::write(dir.join("t/s0.hidden.sct"), sct1(&[2, M as u64, d as u64], hidden)).unwrap();
    fs::write(dir.join("t/s0.align.json"), ALIGNMENT).unwrap();
    fs::write(dir.join("manifest.json"), manifest_json("")).unwrap();
}

#[test]
fn hand_written_corpus_loads_at_word_level() {
    let tmp = tempfile::tempdir().unwrap();
    let attention: Vec<f32> = (0..M * M).map(|k| (k % 7) as f32 / 10.0).collect();
    let d = 2;
    let hidden: Vec<f32> = (0..2 * M * d).map(|k| k as f32).collect();
    write_corpus(tmp.path(), &attention, &hidden, d);

    let snippets = load_corpus(&tmp.path().join("manifest.json"), LoadOptions::default()).unwrap();
    assert_eq!(snippets.len(), 1);
    let s = &snippets[0];
    let words: Vec<&str> = s.snippet.words.iter().map(|w| w.text.as_str()).collect();
    assert_eq!(words, ["x", "=", "f", "(", "a", ")"]);

    let attn = load_attention(s.attention.as_ref().unwrap(), s.alignment.as_deref(), false).unwrap();
    assert_eq!((attn.layers(), attn.heads(), attn.n()), (1, 1, 6));
    let spans = [[1, 2], [2, 3], [3, 5], [5, 6], [6, 7], [7, 8]];
    let sub = |i: usize, j: usize| attention[i * M + j] as f64;
    for (u, &[rs, re]) in spans.iter().enumerate() {
        for (v, &[cs, ce]) in spans.iter().enumerate() {
            let mut want = 0.0;
            for r in rs..re {
                for c in cs..ce {
                    want += sub(r, c);
                }
            }
            want /= (re - rs) as f64;
            assert!((attn.get(0, 0, u, v) as f64 - want).abs() < 1e-6, "({u}, {v})");
        }
    }

    let states = load_hidden(s.hidden.as_ref().unwrap(), s.alignment.as_deref()).unwrap();
    assert_eq!((states.layers(), states.n(), states.d_model()), (2, 6, 2));
    // Word `f` averages subwords 3 and 4 of layer 1.
    let base = M * d;
    let want = [(hidden[base + 3 * d] + hidden[base + 4 * d]) / 2.0, (hidden[base + 3 * d + 1] + hidden[base + 4 * d + 1]) / 2.0];
    assert_eq!(states.vector(1, 2), want);
}

#[test]
fn library_reads_exact_hand_encoding() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("t.sct");
    let data = [1.5f32, -0.0, f32::MIN_POSITIVE, 3.25, 7.0, -2.5];
    fs::write(&path, sct1(&[2, 3], &data)).unwrap();
    let blob = read_tensor(&path).unwrap();
    assert_eq!(blob.dims, [2, 3]);
    assert_eq!(blob.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), data.map(f32::to_bits));
    assert_eq!(blob.to_bytes(), sct1(&[2, 3], &data));
}

#[test]
fn malformed_tensors_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let good = sct1(&[2, 2], &[0.0; 4]);
    let cases: Vec<(Vec<u8>, ErrorCheck)> = vec![
        (b"SCT2".iter().chain(&good[4..]).copied().collect(), |e| matches!(e, Error::BadMagic)),
        ({ let mut b = good.clone(); b[4] = 0x02; b }, |e| matches!(e, Error::UnsupportedDtype(2))),
        (good[..good.len() - 1].to_vec(), |e| matches!(e, Error::TruncatedPayload { .. })),
        ({ let mut b = good.clone(); b.push(0); b }, |e| matches!(e, Error::TrailingBytes(1))),
        (sct1(&[u64::MAX, 2], &[]), |e| matches!(e, Error::DimOverflow(_))),
    ];
    for (k, (bytes, ok)) in cases.into_iter().enumerate() {
        let path = tmp.path().join(format!("{k}.sct"));
        fs::write(&path, bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(ok(&err), "case {k}: {err:?}");
        assert!(err.is_bad_input());
    }
}

#[test]
fn alignment_json_round_trip_and_validation() {
    let align: SubwordAlignment = serde_json::from_str(ALIGNMENT).unwrap();
    assert_eq!(align.num_words(), 6);
    align.validate(M).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("a.json");
    align.write(&path).unwrap();
    assert_eq!(SubwordAlignment::read(&path).unwrap(), align);

    // `special` is optional.
    let plain: SubwordAlignment = serde_json::from_str(r#"{"words": [[0, 1], [1, 3]]}"#).unwrap();
    plain.validate(3).unwrap();

    for bad in [
        r#"{"words": [[0, 1], [2, 3]]}"#,
        r#"{"words": [[0, 2], [1, 3]]}"#,
        r#"{"words": [[0, 0], [0, 3]]}"#,
        r#"{"words": [[0, 1], [1, 3]], "special": [1]}"#,
        r#"{"words": [[0, 1], [1, 4]]}"#,
    ] {
        let a: SubwordAlignment = serde_json::from_str(bad).unwrap();
        assert!(matches!(a.validate(3), Err(Error::AlignmentMismatch(_))), "{bad}");
    }
    assert!(serde_json::from_str::<SubwordAlignment>(r#"{"words": [], "extra": 1}"#).is_err());
}

#[test]
fn attention_dims_must_match_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), &vec![0.1; M * M], &[0.0; 2 * M * 2], 2);
    // A dump one subword short of what the alignment covers.
    fs::write(tmp.path().join("t/s0.attn.sct"), sct1(&[1, 1, 8, 8], &[0.0; 64])).unwrap();
    let err = load_attention(&tmp.path().join("t/s0.attn.sct"), Some(&tmp.path().join("t/s0.align.json")), false).unwrap_err();
    assert!(matches!(err, Error::AlignmentMismatch(_)), "{err:?}");
}

#[test]
fn manifest_schema_is_strict() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("manifest.json");
    fs::write(&path, manifest_json("")).unwrap();
    let m = Manifest::read(&path).unwrap();
    assert_eq!(m.snippets[0].tensors.alignment.as_deref(), Some("t/s0.align.json"));

    fs::write(&path, manifest_json(r#", "bogus": true"#)).unwrap();
    assert!(matches!(Manifest::read(&path), Err(Error::ManifestSchema(_))));
    fs::write(&path, r#"{"snippets": [{"id": "a"}]}"#).unwrap();
    assert!(matches!(Manifest::read(&path), Err(Error::ManifestSchema(_))));

    // Tensor paths are optional.
    fs::write(&path, r#"{"snippets": [{"id": "a", "language": "java", "source_file": "a.java"}]}"#).unwrap();
    let m = Manifest::read(&path).unwrap();
    assert_eq!(m.snippets[0].tensors, Default::default());
    m.write(&path).unwrap();
    assert_eq!(Manifest::read(&path).unwrap(), m);
}

#[test]
fn empty_manifest_loads_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("manifest.json");
    fs::write(&path, r#"{"snippets": []}"#).unwrap();
    assert!(load_corpus(&path, LoadOptions::default()).unwrap().is_empty());
}
