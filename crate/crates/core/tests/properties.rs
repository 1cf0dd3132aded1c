use emask::apriori::{Apriori, CountingStrategy};
use emask::corpus::{load_bitmatrix, load_itemlist, save_bitmatrix, save_itemlist};
use emask::distortion::distort_tuple;
use emask::emask::combination_counts;
use emask::{build_transition_matrix, distort_database, mine, DistortionParams, Itemset, TransactionDatabase};
use proptest::prelude::*;

fn db_strategy(max_items: usize, max_rows: usize) -> impl Strategy<Value = TransactionDatabase> {
    (1..=max_items).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::btree_set(0..n as u32, 0..=n), 1..=max_rows)
            .prop_map(move |rows| {
                let rows: Vec<Vec<u32>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
                TransactionDatabase::from_itemsets(n, rows).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn itemlist_round_trip(db in db_strategy(70, 40)) {
        let mut buf = Vec::new();
        save_itemlist(&db, &mut buf).unwrap();
        let back = load_itemlist(&buf[..], Some(db.num_items())).unwrap();
        prop_assert_eq!(back, db);
    }

    #[test]
    fn bitmatrix_round_trip(db in db_strategy(130, 40)) {
        let mut buf = Vec::new();
        save_bitmatrix(&db, &mut buf).unwrap();
        prop_assert_eq!(load_bitmatrix(&buf[..]).unwrap(), db);
    }

    #[test]
    fn distortion_is_rowwise_and_reproducible(db in db_strategy(80, 30), p in 0.0..=1.0f64, q in 0.0..=1.0f64, seed: u64) {
        let params = DistortionParams::new(p, q, seed).unwrap();
        let a = distort_database(&db, &params).unwrap();
        prop_assert_eq!(&a, &distort_database(&db, &params).unwrap());
        for r in 0..db.dbsize() {
            let t = distort_tuple(db.row(r), db.num_items(), &params, r as u64).unwrap();
            prop_assert_eq!(&t[..], a.row(r));
        }
    }

    #[test]
    fn mined_lattice_is_downward_closed(db in db_strategy(10, 60), sup in 0.05..0.6f64) {
        let l = mine(&db, sup).unwrap();
        l.check_invariants().unwrap();
        for (set, count) in l.iter() {
            for skip in 0..set.arity() {
                if set.arity() == 1 { break; }
                let sub: Vec<u32> = set.items().iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &i)| i).collect();
                let sub_count = l.count(&Itemset::new(sub).unwrap());
                prop_assert!(sub_count.is_some_and(|c| c >= *count));
            }
        }
        let col = Apriori { strategy: CountingStrategy::Columnar, max_level: None }.mine(&db, sup).unwrap();
        prop_assert_eq!(col, l);
    }

    #[test]
    fn transition_columns_are_distributions(n in 1usize..=16, p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let m = build_transition_matrix(n, p, q);
        for s in m.column_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn combination_counts_partition_rows(db in db_strategy(8, 80)) {
        let items: Vec<u32> = (0..db.num_items() as u32).take(5).collect();
        let cand = Itemset::new(items).unwrap();
        let ones = |sub: &[u32]| Some((0..db.dbsize()).filter(|&r| sub.iter().all(|&i| db.contains(r, i as usize))).count() as u64);
        let cc = combination_counts(&cand, ones, db.dbsize() as u64).unwrap();
        prop_assert_eq!(cc.total(), db.dbsize() as f64);
    }
}
