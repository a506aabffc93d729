use std::path::PathBuf;

use hih_core::datasets::{
    canonical_from_str, canonical_to_string, load_canonical, load_dataset, parse_pts, parse_wflw_line, parse_wflw_list,
    subset_counts, write_canonical, write_pts, write_wflw_line, AnnotationRecord, Attributes,
};
use hih_core::error::Error;
use hih_core::{LandmarkSet, Point2, Space};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

fn wflw_line(n_tokens: usize, patch: &[(usize, &str)]) -> String {
    let mut toks: Vec<String> = (0..196).map(|i| format!("{}.5", 100 + i)).collect();
    toks.extend(["90", "95", "400", "420"].map(String::from));
    toks.extend(["0", "1", "0", "0", "1", "0"].map(String::from));
    toks.push("a/b.jpg".into());
    for &(i, v) in patch {
        toks[i] = v.to_string();
    }
    toks.truncate(n_tokens);
    toks.join(" ")
}

#[test]
fn pts_golden_roundtrip() {
    let text = read("face_68.pts");
    let lms = parse_pts(&text).unwrap();
    assert_eq!(lms.len(), 68);
    assert_eq!(lms.space(), Space::Raw);
    // first line is `221.75 378.5`, 1-based
    assert_eq!(lms.points()[0], Point2::new(220.75, 377.5));
    assert_eq!(write_pts(&lms), text);
    assert_eq!(parse_pts(&write_pts(&lms)).unwrap(), lms);
}

#[test]
fn pts_line_endings_do_not_matter() {
    let lf = parse_pts(&read("face_68.pts")).unwrap();
    let crlf = parse_pts(&read("face_68_crlf.pts")).unwrap();
    assert_eq!(lf, crlf);
}

#[test]
fn wflw_golden_roundtrip() {
    let text = read("wflw_list.txt");
    let recs = parse_wflw_list(&text).unwrap();
    assert_eq!(recs.len(), 3);
    for (rec, line) in recs.iter().zip(text.lines()) {
        assert_eq!(rec.landmarks.len(), 98);
        assert_eq!(write_wflw_line(rec).unwrap(), line);
    }
    // repeated image path: second face gets a suffixed id
    assert_eq!(recs[1].id, recs[1].image_path);
    assert_eq!(recs[2].id, format!("{}#1", recs[2].image_path));
    assert_eq!(subset_counts(&recs), [1, 1, 1, 1, 1, 1]);
    let crlf = text.replace('\n', "\r\n");
    assert_eq!(parse_wflw_list(&crlf).unwrap(), recs);
}

#[test]
fn wflw_attributes_in_file_order() {
    let rec = parse_wflw_line(&wflw_line(207, &[]), 1).unwrap();
    let a = rec.attributes.unwrap();
    assert_eq!(
        a,
        Attributes {
            expression: true,
            occlusion: true,
            ..Attributes::default()
        }
    );
    assert_eq!(rec.bbox, Some([90.0, 95.0, 400.0, 420.0]));
    assert_eq!(rec.landmarks.points()[97], Point2::new(294.5, 295.5));
}

/// Parse error must carry the expected line.
fn located(result: Result<impl std::fmt::Debug, Error>, line: usize, needle: &str) -> Result<(), String> {
    match result {
        Err(Error::Parse { location, message }) => {
            if location.line != line {
                return Err(format!("line {} != {line}: {message}", location.line));
            }
            if !message.contains(needle) {
                return Err(format!("`{message}` lacks `{needle}`"));
            }
            Ok(())
        }
        other => Err(format!("expected parse error, got {other:?}")),
    }
}

#[test]
fn malformed_corpus_yields_located_errors() {
    let good = read("face_68.pts");
    let body: Vec<&str> = good.lines().collect();
    let with_line = |i: usize, s: &str| {
        let mut l = body.clone();
        l[i] = s;
        l.join("\n")
    };
    let without_line = |i: usize| {
        let mut l = body.clone();
        l.remove(i);
        l.join("\n")
    };

    let pts_cases: Vec<(&str, String, usize, &str)> = vec![
        ("empty file", String::new(), 1, "missing `{`"),
        ("header only", "version: 1\nn_points: 2\n".into(), 3, "missing `{`"),
        ("no n_points", "version: 1\n{\n1 2\n}\n".into(), 2, "missing n_points"),
        ("bad n_points", with_line(1, "n_points: many"), 2, "bad n_points"),
        ("zero n_points", "n_points: 0\n{\n}\n".into(), 1, "positive"),
        ("bad version", with_line(0, "version: one"), 1, "bad version"),
        ("unknown key", with_line(0, "format: 2"), 1, "unknown header key"),
        ("header without colon", with_line(0, "version 1"), 1, "malformed header"),
        ("non-numeric x", with_line(5, "abc 12.0"), 6, "x"),
        ("non-numeric y", with_line(9, "12.0 y"), 10, "y"),
        ("nan coordinate", with_line(4, "NaN 3"), 5, "x"),
        ("inf coordinate", with_line(4, "3 inf"), 5, "y"),
        ("one token", with_line(7, "12.5"), 8, "expected `x y`"),
        ("three tokens", with_line(7, "1 2 3"), 8, "expected `x y`"),
        ("missing point", without_line(20), 71, "count mismatch"),
        ("extra point", good.replace("}\n", "1 1\n}\n"), 72, "count mismatch"),
        ("no closing brace", without_line(71), 72, "missing closing"),
        ("trailing content", format!("{good}junk\n"), 73, "unexpected content"),
    ];
    let mut failures = Vec::new();
    for (name, text, line, needle) in &pts_cases {
        if let Err(e) = located(parse_pts(text), *line, needle) {
            failures.push(format!("pts/{name}: {e}"));
        }
    }

    let wflw_cases: Vec<(&str, String, &str)> = vec![
        ("short line", wflw_line(206, &[]), "expected 207 tokens"),
        ("long line", wflw_line(207, &[]) + " extra", "expected 207 tokens"),
        ("bad landmark", wflw_line(207, &[(17, "1.2.3")]), "landmark 8 y"),
        ("bad bbox", wflw_line(207, &[(197, "top")]), "bbox"),
        ("unordered bbox", wflw_line(207, &[(196, "500")]), "not ordered"),
        ("attribute not 0/1", wflw_line(207, &[(203, "2")]), "make-up"),
        ("attribute word", wflw_line(207, &[(205, "yes")]), "blur"),
    ];
    let good_line = wflw_line(207, &[]);
    for (name, line, needle) in &wflw_cases {
        // bad line sits on line 3 of a list with a blank line before it
        let list = format!("{good_line}\n\n{line}\n{good_line}\n");
        if let Err(e) = located(parse_wflw_list(&list), 3, needle) {
            failures.push(format!("wflw/{name}: {e}"));
        }
    }
    if let Err(e) = located(parse_wflw_list("\n\n"), 1, "empty") {
        failures.push(format!("wflw/empty list: {e}"));
    }

    let total = pts_cases.len() + wflw_cases.len() + 1;
    assert!(total >= 20);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn canonical_schema_errors_name_the_field() {
    let cases = [
        (r#"{"dataset":"x","n_landmarks":2}"#, "records"),
        (r#"{"dataset":"x","n_landmarks":0,"records":[]}"#, "n_landmarks"),
        (
            r#"{"dataset":"x","n_landmarks":2,"records":[{"id":"a","image_path":"a","points":[[1,2]],"bbox":null,"attributes":null}]}"#,
            "records[0].points",
        ),
        (
            r#"{"dataset":"x","n_landmarks":1,"records":[{"id":"a","image_path":"a","points":[[1,2]],"bbox":[5,0,1,1],"attributes":null}]}"#,
            "records[0].bbox",
        ),
        (
            r#"{"dataset":"x","n_landmarks":1,"records":[{"id":"a","image_path":"a","points":[[1,2]],"bbox":null,"attributes":null,"extra":1}]}"#,
            "extra",
        ),
        (
            r#"{"dataset":"x","n_landmarks":1,"records":[{"id":"a","points":[[1,2]],"bbox":null,"attributes":null}]}"#,
            "image_path",
        ),
    ];
    for (text, field) in cases {
        match canonical_from_str(text) {
            Err(Error::Schema { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    // syntax errors report line and column
    match canonical_from_str("{\n  \"dataset\": \"x\",\n  oops\n}") {
        Err(Error::Schema { message, .. }) => assert!(message.contains("line 3"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn canonical_file_roundtrip_and_loader() {
    let dir = tempfile::tempdir().unwrap();
    let recs = parse_wflw_list(&read("wflw_list.txt")).unwrap();
    let path = dir.path().join("wflw.json");
    write_canonical(&path, "WFLW", &recs).unwrap();
    let back = load_canonical(&path).unwrap();
    assert_eq!(back.dataset, "WFLW");
    assert_eq!(back.n_landmarks, 98);
    assert_eq!(back.records, recs);

    let loaded = load_dataset(&format!("json:{}", path.display())).unwrap();
    assert_eq!(loaded.spec.name, "WFLW");
    assert_eq!(loaded.spec.norm_indices, Some((60, 72)));
    assert_eq!(loaded.records, recs);
}

#[test]
fn pts_directory_loads_sorted_with_source_names() {
    let dir = tempfile::tempdir().unwrap();
    let text = read("face_68.pts");
    for name in ["b_face.pts", "a_face.PTS", "notes.txt"] {
        std::fs::write(dir.path().join(name), &text).unwrap();
    }
    let loaded = load_dataset(&format!("pts:{}", dir.path().display())).unwrap();
    let ids: Vec<&str> = loaded.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["a_face", "b_face"]);
    assert_eq!(loaded.spec.n_landmarks, 68);
    assert_eq!(loaded.spec.norm_indices, Some((36, 45)));

    std::fs::write(dir.path().join("c_face.pts"), "n_points: 1\n{\n1 x\n}\n").unwrap();
    let err = load_dataset(&format!("pts:{}", dir.path().display())).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("c_face.pts:3"), "{msg}");
}

#[test]
fn twenty_nine_point_canonical_loads() {
    let pts: Vec<Point2> = (0..29).map(|k| Point2::new(k as f64, 2.0 * k as f64)).collect();
    let rec = AnnotationRecord {
        id: "cofw_0001".into(),
        image_path: "cofw_0001.png".into(),
        landmarks: LandmarkSet::new(pts, Space::Raw).unwrap(),
        bbox: None,
        attributes: None,
    };
    let c = canonical_from_str(&canonical_to_string("COFW", &[rec]).unwrap()).unwrap();
    assert_eq!(c.n_landmarks, 29);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.1 + 0.2),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #[test]
    fn canonical_write_then_parse_is_identity(
        pts in prop::collection::vec((finite(), finite()), 1..12),
        bbox in prop::option::of((finite(), finite(), 0.0f64..1e3, 0.0f64..1e3)),
        flags in prop::option::of(any::<[bool; 6]>()),
        id in "[a-z0-9_/#.]{1,16}",
    ) {
        let attributes = flags.map(|f| Attributes {
            pose: f[0], expression: f[1], illumination: f[2], make_up: f[3], occlusion: f[4], blur: f[5],
        });
        let rec = AnnotationRecord {
            id: id.clone(),
            image_path: format!("{id}.jpg"),
            landmarks: LandmarkSet::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(), Space::Raw).unwrap(),
            bbox: bbox.map(|(x, y, w, h)| [x, y, x + w, y + h]).filter(|b| b.iter().all(|v| v.is_finite())),
            attributes,
        };
        let text = canonical_to_string("t", std::slice::from_ref(&rec)).unwrap();
        let back = canonical_from_str(&text).unwrap();
        prop_assert_eq!(&back.records[0], &rec);
        for (a, b) in back.records[0].landmarks.points().iter().zip(rec.landmarks.points()) {
            prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
            prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn pts_parser_never_panics(text in "[ -~\n\r{}]{0,200}") {
        let _ = parse_pts(&text);
    }

    #[test]
    fn wflw_parser_never_panics(text in "[0-9a-z .\n-]{0,400}") {
        let _ = parse_wflw_list(&text);
    }
}
