use std::path::Path;
use std::process::{Command, Output};

use diffconv::npy::{read_npy_file, write_npy_file};
use ndarray::{array, Array2};

fn diffconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffconv"))
        .args(args)
        .output()
        .expect("run diffconv")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn kernels_exact_corner_transform() {
    let doc = json(&diffconv(&["kernels", "--size", "3", "--pos", "0,0", "--exact"]));
    assert_eq!(doc["position"], serde_json::json!([0, 0]));
    assert_eq!(doc["differential_kernels"].as_array().unwrap().len(), 9);
    assert_eq!(doc["d_matrix"]["entries"][0][4], "9/4");
    let t = &doc["transform"];
    let ones_image: Vec<i64> = (0..9)
        .map(|r| {
            t[r].as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_str().unwrap().parse::<i64>().unwrap())
                .sum()
        })
        .collect();
    assert_eq!(ones_image, vec![16, -8, 4, -8, 4, -2, 4, -2, 1]);
}

#[test]
fn kernels_centre_transform_is_identity() {
    let doc = json(&diffconv(&["kernels", "--size", "3", "--pos", "1,1"]));
    let t = doc["transform"].as_array().unwrap();
    for (r, row) in t.iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(v.as_f64().unwrap(), if r == c { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        vec!["kernels", "--size", "4"],
        vec!["kernels", "--size", "3", "--pos", "3,0"],
        vec!["make-kernel", "--size", "3", "--op", "30:1"],
        vec!["make-kernel", "--size", "3", "--op", "nonsense"],
        vec!["compare", "--orders", "5..2"],
        vec!["frobnicate"],
    ] {
        let out = diffconv(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffconv(&[
        "filter",
        "--input",
        path_str(&dir.path().join("absent.npy")),
        "--kernel",
        path_str(&dir.path().join("absent_k.npy")),
        "--method",
        "diff",
        "--output",
        path_str(&dir.path().join("out.npy")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn filter(dir: &Path, image: &Array2<f64>, kernel: &Array2<f64>, method: &str) -> Output {
    let (i, k, o) = (dir.join("in.npy"), dir.join("k.npy"), dir.join("out.npy"));
    write_npy_file(&i, image).unwrap();
    write_npy_file(&k, kernel).unwrap();
    diffconv(&[
        "filter",
        "--input",
        path_str(&i),
        "--kernel",
        path_str(&k),
        "--method",
        method,
        "--output",
        path_str(&o),
    ])
}

#[test]
fn filter_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.npy");
    let image = Array2::from_shape_fn((7, 8), |(y, x)| ((y * 3 + x) as f64).sin());
    let identity = array![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];

    assert!(filter(dir.path(), &image, &identity, "diff").status.success());
    assert_eq!(read_npy_file(&out_path).unwrap(), image);

    let ones = Array2::ones((4, 4));
    assert!(filter(dir.path(), &ones, &Array2::ones((3, 3)), "partial").status.success());
    assert!(read_npy_file(&out_path).unwrap().iter().all(|&v| v == 9.0));

    let kernel = Array2::from_shape_fn((3, 3), |(y, x)| (y as f64 - x as f64 * 0.5).cos());
    assert!(filter(dir.path(), &image, &kernel, "zero").status.success());
    let zero = read_npy_file(&out_path).unwrap();
    assert!(filter(dir.path(), &image, &kernel, "diff").status.success());
    let diff = read_npy_file(&out_path).unwrap();
    for ((y, x), v) in zero.indexed_iter() {
        let interior = (1..6).contains(&y) && (1..7).contains(&x);
        if interior {
            assert_eq!(v.to_bits(), diff[(y, x)].to_bits());
        }
    }
}

#[test]
fn filter_rejects_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let image = Array2::zeros((6, 6));
    for kernel in [Array2::zeros((3, 5)), Array2::zeros((4, 4)), Array2::zeros((11, 11))] {
        let out = filter(dir.path(), &image, &kernel, "diff");
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("kernel must be square"));
    }
    let out = filter(dir.path(), &Array2::zeros((2, 9)), &Array2::zeros((3, 3)), "diff");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least as large"));
    let out = filter(dir.path(), &image, &Array2::zeros((3, 3)), "fourier");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn make_kernel_prints_rows() {
    let rows = json(&diffconv(&["make-kernel", "--size", "3", "--op", "20:1,02:1"]));
    assert_eq!(rows, serde_json::json!([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]));
}

#[test]
fn gen_writes_extended_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.npy");
    let out = diffconv(&[
        "gen", "--family", "chebyshev", "--order", "3", "--height", "10", "--width", "12", "--margin", "2",
        "--output", path_str(&path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_npy_file(&path).unwrap().dim(), (14, 16));

    let out = diffconv(&[
        "gen", "--family", "polynomial", "--coeffs", "11:2", "--height", "3", "--width", "4", "--output",
        path_str(&path),
    ]);
    assert!(out.status.success());
    let f = read_npy_file(&path).unwrap();
    assert_eq!(f[(2, 3)], 12.0);

    let out = diffconv(&["gen", "--family", "polynomial", "--height", "3", "--width", "4", "--output", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_row_count_and_header() {
    let out = diffconv(&[
        "compare", "--orders", "1..3", "--height", "20", "--width", "20", "--filters", "2", "--seed", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,order,method,kernel_index,eps1,eps2"));
    assert_eq!(lines.count(), 48);
}
