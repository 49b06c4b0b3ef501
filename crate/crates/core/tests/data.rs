mod common;

use dmc_gawar::data::{read_csv, stratified_test_counts, write_csv};
use dmc_gawar::{stratified_split, FeatureMatrix};
use proptest::prelude::*;

fn class_labels() -> impl Strategy<Value = Vec<u8>> {
    (2usize..40, 2usize..40).prop_flat_map(|(a, b)| {
        let mut y = vec![0u8; a];
        y.extend(std::iter::repeat_n(1u8, b));
        Just(y).prop_shuffle()
    })
}

proptest! {
    #[test]
    fn split_partitions_and_respects_proportions(
        y in class_labels(),
        f in 0.1f64..0.5,
        seed in any::<u64>(),
    ) {
        let l = common::labels(y.clone());
        let counts = l.class_counts();
        let seats = stratified_test_counts(counts, f);
        prop_assume!(seats.iter().zip(counts).all(|(&s, c)| s > 0 && s < c));
        let plan = stratified_split(&l, f, seed).unwrap();
        let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for c in 0..2u8 {
            let in_test = plan.test_indices.iter().filter(|&&i| y[i] == c).count();
            prop_assert_eq!(in_test, seats[c as usize]);
            let ideal = counts[c as usize] as f64 * f;
            prop_assert!((in_test as f64 - ideal).abs() < 1.0);
        }
        prop_assert_eq!(plan.test_indices.len(), (y.len() as f64 * f).round() as usize);
        prop_assert_eq!(&stratified_split(&l, f, seed).unwrap(), &plan);
    }

    #[test]
    fn csv_round_trip(
        rows in (2usize..8, 1usize..6).prop_flat_map(|(n, m)| {
            prop::collection::vec(prop::collection::vec(-1e6f64..1e6, m), n)
        }),
    ) {
        let n = rows.len();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
        prop_assume!(n >= 4);
        let names: Vec<String> = (0..rows[0].len()).map(|j| format!("gene_{j}")).collect();
        let m = FeatureMatrix::from_rows(&rows, names).unwrap();
        let l = common::labels(y);
        let mut buf = Vec::new();
        write_csv(&mut buf, &m, &l, "label").unwrap();
        let (m2, l2) = read_csv(buf.as_slice(), Some("label")).unwrap();
        prop_assert_eq!(m2.feature_names(), m.feature_names());
        for j in 0..m.n_features() {
            let a: Vec<u64> = m.column(j).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = m2.column(j).iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(l2.as_slice(), l.as_slice());
        prop_assert_eq!(l2.class_names(), l.class_names());
    }
}

#[test]
fn label_column_by_name_and_rejections() {
    let text = "y,a,b\nT,1,2\nN,3,4\nT,5,6\nN,7,8\n";
    let (m, l) = read_csv(text.as_bytes(), Some("y")).unwrap();
    assert_eq!(m.feature_names(), &["a".to_string(), "b".to_string()]);
    assert_eq!(l.as_slice(), &[0, 1, 0, 1]);
    assert!(read_csv(text.as_bytes(), Some("missing")).is_err());
    assert!(read_csv("a,y\n1,A\nx,B\n3,A\n4,B\n".as_bytes(), None).is_err());
    assert!(read_csv("a,y\n1,A\n2,B\n3,C\n4,A\n".as_bytes(), None).is_err());
    assert!(read_csv("a,y\n1,A\n2,B\n3,A\n".as_bytes(), None).is_err());
}
