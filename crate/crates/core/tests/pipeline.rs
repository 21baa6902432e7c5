use diffconv::bench::{apply_method, Method};
use diffconv::fields::{generate, oracle_convolution, random_kernel, FieldFamily, FieldSpec, PolyDomain};
use diffconv::metrics::{interior_frame_split, l1_error, squared_error_map};
use diffconv::{
    build_bank, conv2d_diff, kernel_from_operator, operator_coeffs, Kernel, KernelSize, OperatorCoeffs, TransformBank,
};
use ndarray::array;

fn size(k: usize) -> KernelSize {
    KernelSize::new(k).unwrap()
}

#[test]
fn laplacian_from_operator_and_back() {
    let mut c = OperatorCoeffs::zeros(size(3));
    c.set(2, 0, 1.0).unwrap();
    c.set(0, 2, 1.0).unwrap();
    let k = kernel_from_operator(&c).unwrap();
    assert_eq!(k.weights(), &array![[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]);
    let back = operator_coeffs(&k);
    for (a, b) in back.alpha.iter().zip(&c.alpha) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn quadratic_field_is_filtered_exactly_to_the_border() {
    // u = h² + 3hw - w on index coordinates; Laplacian is 2 everywhere
    let field = generate(&FieldSpec {
        family: FieldFamily::Polynomial {
            coeffs: vec![vec![0.0, -1.0], vec![0.0, 3.0], vec![1.0, 0.0]],
            domain: PolyDomain::Index,
        },
        height: 9,
        width: 11,
        margin: 1,
    })
    .unwrap();
    let lap = Kernel::new(array![[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
    let out = conv2d_diff(&field.central(), &lap).unwrap();
    assert!(out.iter().all(|v| (v - 2.0).abs() < 1e-9), "{out:?}");
    let truth = oracle_convolution(&field, &lap).unwrap();
    assert!(l1_error(&out, &truth).unwrap() < 1e-9);
}

#[test]
fn bank_survives_json() {
    let kernel = random_kernel(size(5), 11, 2);
    let bank = build_bank(&kernel);
    let back = TransformBank::from_json(&bank.to_json().unwrap()).unwrap();
    for ((pos, a), (_, b)) in bank.iter().zip(back.iter()) {
        assert_eq!(a.weights(), b.weights(), "{pos:?}");
    }
}

#[test]
fn diff_errors_sit_in_the_frame_only() {
    let field = generate(&FieldSpec {
        family: FieldFamily::Chebyshev { order: 6 },
        height: 40,
        width: 40,
        margin: 2,
    })
    .unwrap();
    let kernel = random_kernel(size(5), 3, 0);
    let truth = oracle_convolution(&field, &kernel).unwrap();
    let image = field.central();
    for method in Method::ALL {
        let out = apply_method(&image, &kernel, method, 5).unwrap();
        let map = squared_error_map(&out, &truth).unwrap();
        let (inner, _) = interior_frame_split(&map, 2).unwrap();
        assert_eq!(inner, 0.0, "{method}");
    }
}

#[test]
fn diff_beats_zero_padding_on_a_smooth_field() {
    let field = generate(&FieldSpec {
        family: FieldFamily::Spherical { order: 3 },
        height: 64,
        width: 64,
        margin: 1,
    })
    .unwrap();
    let image = field.central();
    for j in 0..5 {
        let kernel = random_kernel(size(3), 21, j);
        let truth = oracle_convolution(&field, &kernel).unwrap();
        let diff = l1_error(&apply_method(&image, &kernel, Method::Diff, 0).unwrap(), &truth).unwrap();
        let zero = l1_error(&apply_method(&image, &kernel, Method::Zero, 0).unwrap(), &truth).unwrap();
        assert!(diff * 5.0 < zero, "kernel {j}: {diff} vs {zero}");
    }
}
