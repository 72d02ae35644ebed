use std::collections::BTreeMap;

use droidlens::encoding::{
    api_count_table, build_count_vocab, build_vocab, concat_matrices, encode_frequency,
    encode_numeric, encode_sequence, encode_usage, ngram_counts, ValueKind, Vocabulary,
};
use droidlens::{AppId, FeatureKind, FeatureMatrix, FeatureRecord, FeatureReport, Source};
use proptest::prelude::*;

const APIS: [&str; 8] = [
    "java.lang.String.length()I",
    "java.lang.Object.hashCode()I",
    "android.util.Log.d(Ljava/lang/String;Ljava/lang/String;)I",
    "java.lang.System.currentTimeMillis()J",
    "android.os.Build.getSerial()Ljava/lang/String;",
    "java.io.File.exists()Z",
    "java.net.URL.openConnection()Ljava/net/URLConnection;",
    "javax.crypto.Cipher.doFinal([B)[B",
];

/// Static report whose ApiCall records are exactly the APIs with a positive count.
fn report(i: usize, counts: &[u64]) -> FeatureReport {
    let mut r = FeatureReport::new(AppId::of_bytes(&i.to_le_bytes()), Source::Static);
    for (api, &n) in APIS.iter().zip(counts) {
        if n > 0 {
            r.insert(FeatureRecord::new(FeatureKind::ApiCall, *api).unwrap());
            r.api_counts.insert(api.to_string(), n);
        }
    }
    r
}

fn reports() -> impl Strategy<Value = Vec<FeatureReport>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec![0u64, 0, 1, 2, 7]), APIS.len()),
        1..12,
    )
    .prop_map(|rows| rows.iter().enumerate().map(|(i, c)| report(i, c)).collect())
}

proptest! {
    #[test]
    fn ngram_total_is_len_minus_n_plus_one(seq in prop::collection::vec(0u8..4, 0..30), n in 1usize..6) {
        let tokens: Vec<String> = seq.iter().map(|t| format!("op{t}")).collect();
        let total: u64 = ngram_counts(&tokens, n).values().sum();
        prop_assert_eq!(total as usize, (tokens.len() + 1).saturating_sub(n));
    }

    #[test]
    fn usage_is_presence_of_frequency(reps in reports()) {
        let vocab = match build_vocab(&reps, &[FeatureKind::ApiCall], 1) {
            Ok(v) => v,
            Err(_) => return Ok(()),
        };
        let usage: FeatureMatrix = encode_usage(&reps, &vocab).unwrap();
        let rows: Vec<(AppId, BTreeMap<String, u64>)> = reps.iter().map(|r| (r.app_id.clone(), api_count_table(r))).collect();
        let freq: FeatureMatrix = encode_frequency(&rows, &vocab).unwrap();
        for r in 0..reps.len() {
            for c in 0..vocab.len() {
                prop_assert_eq!(usage.get(r, c) == 1.0, freq.get(r, c) > 0.0);
            }
        }
    }

    #[test]
    fn frozen_vocab_makes_encoding_order_free(reps in reports(), rot in 0usize..12) {
        let vocab = match build_vocab(&reps, &[FeatureKind::ApiCall], 1) {
            Ok(v) => v,
            Err(_) => return Ok(()),
        };
        let mut shuffled = reps.clone();
        shuffled.rotate_left(rot % reps.len());
        shuffled.reverse();
        let a: FeatureMatrix = encode_usage(&reps, &vocab).unwrap();
        let b: FeatureMatrix = encode_usage(&shuffled, &vocab).unwrap();
        prop_assert_eq!(a.align_rows(b.row_ids()).unwrap(), b);
    }

    #[test]
    fn count_vocab_covers_every_positive_count(reps in reports()) {
        let tables: Vec<BTreeMap<String, u64>> = reps.iter().map(api_count_table).collect();
        if let Ok(v) = build_count_vocab(&tables, 1) {
            prop_assert_eq!(v.kind(), ValueKind::Count);
            for t in &tables {
                for name in t.keys() {
                    prop_assert!(v.get(name).is_some());
                }
            }
        }
    }

    #[test]
    fn sequence_tokens_stay_in_range(tokens in prop::collection::vec(0u8..10, 0..40), max_len in 1usize..20) {
        let vocab = Vocabulary::new((0..6).map(|i| format!("t{i}")).collect(), ValueKind::Count).unwrap();
        let names: Vec<String> = tokens.iter().map(|t| format!("t{t}")).collect();
        let enc = encode_sequence(&names, &vocab, max_len);
        prop_assert_eq!(enc.len(), max_len);
        prop_assert!(enc.iter().all(|&t| t <= vocab.len()));
        for (i, &t) in enc.iter().enumerate() {
            match names.get(i) {
                Some(n) => prop_assert_eq!(t, vocab.get(n).map_or(0, |c| c + 1)),
                None => prop_assert_eq!(t, 0),
            }
        }
    }

    #[test]
    fn concat_is_associative(vals in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8)) {
        let ids: Vec<AppId> = (0..vals.len()).map(|i| AppId::of_bytes(&[i as u8])).collect();
        let part = |names: &[&str], col: usize| {
            let rows: Vec<(AppId, Vec<f64>)> = ids.iter().cloned().zip(vals.iter().map(|v| vec![v[col]; names.len()])).collect();
            encode_numeric::<f64>(names, &rows).unwrap()
        };
        let (a, b, c) = (part(&["a"], 0), part(&["b1", "b2"], 1), part(&["c"], 2));
        let left = concat_matrices(&concat_matrices(&a, &b).unwrap(), &c).unwrap();
        let right = concat_matrices(&a, &concat_matrices(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }
}
