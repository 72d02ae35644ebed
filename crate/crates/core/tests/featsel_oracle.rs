mod oracle;

use droidlens::encoding::{ValueKind, Vocabulary};
use droidlens::featsel::{
    chi_square, column_variances, mutual_information, pearson, sails, sails_scores, select_top_k,
    t_test, variance_threshold, wfs, SailsBase, WfsMode,
};
use droidlens::{AppId, FeatureMatrix, Label};
use oracle::Dense;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn dense(rows: usize, cols: usize, values: Vec<f64>) -> impl Strategy<Value = Dense> {
    (
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(values), cols),
            rows,
        ),
        prop::collection::vec(any::<bool>(), rows).prop_filter("two rows per class", |y| {
            let m = y.iter().filter(|&&b| b).count();
            m >= 2 && y.len() - m >= 2
        }),
    )
        .prop_map(|(x, y)| Dense { x, y })
}

fn matrix(d: &Dense, kind: ValueKind) -> (FeatureMatrix, Vec<Label>) {
    let cols = d.x[0].len();
    let vocab = Vocabulary::new((0..cols).map(|j| format!("f{j}")).collect(), kind).unwrap();
    let ids = (0..d.x.len())
        .map(|i| AppId::of_bytes(&[i as u8]))
        .collect();
    let m = FeatureMatrix::from_dense(vocab, ids, &d.x).unwrap();
    (m, d.y.iter().map(|&b| Label::from_bool(b)).collect())
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TOL * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn selectors_match_brute_force(d in dense(20, 10, vec![0.0, 1.0])) {
        let (m, y) = matrix(&d, ValueKind::Binary);
        let mi = mutual_information(&m, &y).unwrap().scores;
        let chi = chi_square(&m, &y).unwrap().scores;
        let pcc = pearson(&m, &y).unwrap().scores;
        let t = t_test(&m, &y).unwrap().scores;
        let w = wfs(&m, &y, WfsMode::CountSum).unwrap().scores;
        let var = column_variances(&m);
        for j in 0..10 {
            let col = d.column(j);
            prop_assert!(close(mi[j], oracle::mutual_information(&col, &d.y)), "mi col {}", j);
            prop_assert!(close(chi[j], oracle::chi_square(&col, &d.y)), "chi col {}", j);
            prop_assert!(close(pcc[j], oracle::pearson(&col, &d.y)), "pcc col {}", j);
            prop_assert!(close(t[j], oracle::welch_t(&col, &d.y)), "t col {}", j);
            prop_assert!(close(w[j], oracle::wfs(&col, &d.y)), "wfs col {}", j);
            prop_assert!(close(var[j], oracle::variance(&col)), "var col {}", j);
        }
    }

    #[test]
    fn count_columns_match_brute_force(d in dense(20, 6, vec![0.0, 0.0, 1.0, 2.0, 5.0])) {
        let (m, y) = matrix(&d, ValueKind::Count);
        let pcc = pearson(&m, &y).unwrap().scores;
        let t = t_test(&m, &y).unwrap().scores;
        let w = wfs(&m, &y, WfsMode::CountSum).unwrap().scores;
        let var = column_variances(&m);
        for j in 0..6 {
            let col = d.column(j);
            prop_assert!(close(pcc[j], oracle::pearson(&col, &d.y)));
            prop_assert!(close(t[j], oracle::welch_t(&col, &d.y)));
            prop_assert!(close(w[j], oracle::wfs(&col, &d.y)));
            prop_assert!(close(var[j], oracle::variance(&col)));
        }
    }

    #[test]
    fn variance_threshold_is_antitone(d in dense(20, 10, vec![0.0, 1.0]), t1 in 0.0f64..0.3, dt in 0.0f64..0.3) {
        let (m, _) = matrix(&d, ValueKind::Binary);
        let low = variance_threshold(&m, t1).unwrap();
        let high = variance_threshold(&m, t1 + dt).unwrap();
        prop_assert!(high.iter().all(|c| low.contains(c)));
    }

    #[test]
    fn top_k_is_monotone(d in dense(20, 10, vec![0.0, 1.0]), k1 in 1usize..=10, k2 in 1usize..=10) {
        let (m, y) = matrix(&d, ValueKind::Binary);
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        for scores in [mutual_information(&m, &y).unwrap(), pearson(&m, &y).unwrap(), chi_square(&m, &y).unwrap()] {
            let small = select_top_k(&scores, lo).unwrap();
            let big = select_top_k(&scores, hi).unwrap();
            prop_assert_eq!(small.len(), lo);
            prop_assert!(small.iter().all(|c| big.contains(c)));
        }
    }

    #[test]
    fn symmetric_scores_ignore_label_encoding(d in dense(20, 10, vec![0.0, 1.0])) {
        let (m, y) = matrix(&d, ValueKind::Binary);
        let flipped: Vec<Label> = y.iter().map(|l| l.flip()).collect();
        let same = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).all(|(x, y)| close(*x, *y));
        prop_assert!(same(mutual_information(&m, &y).unwrap().scores, mutual_information(&m, &flipped).unwrap().scores));
        prop_assert!(same(chi_square(&m, &y).unwrap().scores, chi_square(&m, &flipped).unwrap().scores));
        prop_assert!(same(t_test(&m, &y).unwrap().scores, t_test(&m, &flipped).unwrap().scores));
        let abs = |v: Vec<f64>| v.iter().map(|s| s.abs()).collect::<Vec<_>>();
        prop_assert!(same(abs(pearson(&m, &y).unwrap().scores), abs(pearson(&m, &flipped).unwrap().scores)));
        let w = wfs(&m, &y, WfsMode::AppCount).unwrap().scores;
        let wf = wfs(&m, &flipped, WfsMode::AppCount).unwrap().scores;
        for j in 0..10 {
            if d.column(j).iter().any(|&v| v > 0.0) {
                prop_assert!(close(wf[j], 1.0 - w[j]));
            } else {
                prop_assert_eq!(wf[j], 0.0);
            }
        }
    }

    #[test]
    fn sails_keeps_each_class_leader(d in dense(20, 10, vec![0.0, 1.0]), k in 1usize..=10) {
        let (m, y) = matrix(&d, ValueKind::Binary);
        for base in [SailsBase::MutualInformation, SailsBase::ChiSquare] {
            let picked = sails(&m, &y, base, k).unwrap();
            let [b, mw] = sails_scores(&m, &y, base).unwrap();
            prop_assert!(picked.contains(&b.ranking()[0]));
            prop_assert!(picked.contains(&mw.ranking()[0]));
            prop_assert!(picked.len() >= k && picked.len() <= 2 * k);
        }
    }
}
