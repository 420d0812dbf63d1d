fn main() {
    use lmorse_core::foldtest::*;
    for delta in [0.05, 0.1, 0.2, 0.3, 0.5] {
        let rep = fold_scaling(&[1e-2, 1e-3, 1e-4, 1e-5], delta).unwrap();
        println!("delta={delta}: slope={:.5}", rep.slope);
    }
    for (name, ladder) in [
        ("1e-3..1e-6", vec![1e-3, 1e-4, 1e-5, 1e-6]),
        ("1e-4..1e-7", vec![1e-4, 1e-5, 1e-6, 1e-7]),
    ] {
        let rep = fold_scaling(&ladder, 0.1).unwrap();
        println!("ladder {name}: slope={:.5}", rep.slope);
    }
}
