use std::fs;

use mdlnmf::io::{load_matrix, write_matrix, LoadOptions};
use mdlnmf::HarnessError;
use ndarray::Array2;
use proptest::prelude::*;
use tempfile::tempdir;

fn load_str(text: &str, transpose: bool) -> Result<mdlnmf_core::DataMatrix, HarnessError> {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, text).unwrap();
    load_matrix(
        &path,
        &LoadOptions {
            transpose,
            ..LoadOptions::default()
        },
    )
}

#[test]
fn three_by_two() {
    let m = load_str("1,2\n3,4\n5,6\n", false).unwrap();
    assert_eq!(m.shape(), (3, 2));
    assert_eq!(m.values()[[2, 1]], 6.0);
}

#[test]
fn transpose_option() {
    let m = load_str("1,2\n3,4\n5,6\n", true).unwrap();
    assert_eq!(m.shape(), (2, 3));
    assert_eq!(m.values()[[1, 0]], 2.0);
}

#[test]
fn negative_entry_is_rejected() {
    let err = load_str("1,2\n-1,4\n", false).unwrap_err();
    assert!(
        matches!(err, HarnessError::NegativeEntry { line: 2, column: 1, value, .. } if value == -1.0),
        "{err}"
    );
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn ragged_rows_are_rejected() {
    let err = load_str("1,2,3\n4,5\n", false).unwrap_err();
    assert!(matches!(err, HarnessError::RaggedRows { line: 2, expected: 3, found: 2, .. }), "{err}");
}

#[test]
fn unparsable_field_names_its_line() {
    let err = load_str("a,b\n1,2\n3,oops\n", false).unwrap_err();
    assert!(matches!(err, HarnessError::ParseError { line: 3, .. }), "{err}");
}

#[test]
fn header_and_labels_detected() {
    let m = load_str("id,x,y\nr1,1,2\nr2,3,4\n", false).unwrap();
    assert_eq!(m.shape(), (2, 2));
    assert_eq!(m.col_labels().unwrap(), ["x", "y"]);
    assert_eq!(m.row_labels().unwrap(), ["r1", "r2"]);
}

#[test]
fn semicolon_delimiter() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, "1;2\n3;4\n").unwrap();
    let m = load_matrix(
        &path,
        &LoadOptions {
            delimiter: b';',
            ..LoadOptions::default()
        },
    )
    .unwrap();
    assert_eq!(m.shape(), (2, 2));
}

#[test]
fn missing_file_is_a_data_error() {
    let err = load_matrix(std::path::Path::new("/nonexistent/m.csv"), &LoadOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_bit_exact(
        (m, n, vals) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
            (Just(m), Just(n), prop::collection::vec(
                prop_oneof![Just(0.0), 0.0f64..1e-300, 0.0f64..1.0, 0.0f64..1e300], m * n))
        })
    ) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let a = Array2::from_shape_vec((m, n), vals).unwrap();
        write_matrix(&path, &a, None).unwrap();
        let back = load_matrix(&path, &LoadOptions::default()).unwrap();
        prop_assert_eq!(back.shape(), (m, n));
        for (x, y) in a.iter().zip(back.values().iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
